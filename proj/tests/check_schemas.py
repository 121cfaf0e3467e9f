"""Validates the example configs and the reports they produce against docs/*.schema.json."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema


def main() -> int:
    cli, root = sys.argv[1], pathlib.Path(sys.argv[2])
    config_schema = json.loads((root / "docs" / "config.schema.json").read_text())
    report_schema = json.loads((root / "docs" / "report.schema.json").read_text())
    failures = 0
    with tempfile.TemporaryDirectory() as tmp:
        for cfg in sorted((root / "configs").glob("*.json")):
            jsonschema.validate(json.loads(cfg.read_text()), config_schema)
            out = pathlib.Path(tmp) / cfg.name
            rc = subprocess.run([cli, "--config", str(cfg), "--out", str(out)], check=False).returncode
            report = json.loads(out.read_text())
            jsonschema.validate(report, report_schema)
            jsonschema.validate(report["config"], config_schema | {"properties": config_schema["properties"]
                                | {"moduli": {"type": ["object", "null"]}}})
            ok = rc == 0 and report["pass"]
            failures += not ok
            print(f"{cfg.name}: exit {rc} {'ok' if ok else 'FAILED'}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
