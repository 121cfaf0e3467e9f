#include "gtw/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "gtw/gibbons_tsarev.hpp"
#include "gtw/hierarchy.hpp"
#include "gtw/hyperelliptic.hpp"

namespace gtw::cli {

namespace {

constexpr double kRauchTol = 1e-4;
constexpr double kSymmetryTol = 1e-8;
constexpr double kTransformTol = 1e-6;
constexpr double kCollideAgreementTol = 1e-5;
constexpr double kRatioLo = 3.5, kRatioHi = 4.5;

// Smallest puncture count the command can work with.
int default_points(const std::string& command, const std::string& family) {
  const int extra = family == "genus1" ? 1 : 0;
  if (command == "hydro") return 2 + extra;
  if (command == "collide") return 2;
  if (command == "reconstruct" || command == "report") return 1 + extra;
  return 1;
}

[[noreturn]] void schema(const std::string& msg) { throw SchemaError(msg); }

void only_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) schema(where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : obj.items())
    if (!allowed.count(k)) schema("unknown key '" + k + "' in " + where);
}

double positive_number(const Json& j, const std::string& name) {
  if (!j.is_number()) schema(name + " must be a number");
  const double x = j.get<double>();
  if (!std::isfinite(x) || !(x > 0.0)) schema(name + " must be positive");
  return x;
}

std::int64_t positive_int(const Json& j, const std::string& name) {
  if (!j.is_number_integer()) schema(name + " must be an integer");
  const auto x = j.get<std::int64_t>();
  if (x <= 0) schema(name + " must be positive");
  return x;
}

int positive_small(const Json& j, const std::string& name, int max = 1000000) {
  const auto x = positive_int(j, name);
  if (x > max) schema(name + " must be at most " + std::to_string(max));
  return static_cast<int>(x);
}

cplx complex_value(const Json& j, const std::string& name) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  schema(name + " must be a number or an [re, im] pair");
}

std::string family_label(const JobConfig& c) {
  return c.command == "rauch" ? std::string("genus2") : c.structure.family;
}

Json matrix_json(const CMatrix& m, const std::vector<std::string>& rows, const std::vector<std::string>& cols) {
  Json out;
  out["rows"] = m.rows();
  out["cols"] = m.cols();
  out["row_labels"] = rows;
  out["col_labels"] = cols;
  Json data = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index q = 0; q < m.cols(); ++q) row.push_back(complex_json(m(r, q)));
    data.push_back(row);
  }
  out["data"] = data;
  return out;
}

std::vector<std::string> numbered(const std::string& prefix, int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

VerifyOptions verify_options(const JobConfig& c) {
  VerifyOptions vo;
  vo.samples = c.samples;
  vo.seed = c.seed;
  vo.tol = c.tol;
  vo.nodes = c.nodes;
  vo.min_separation = c.min_separation;
  return vo;
}

VerificationReport custom_report(std::string identity, std::string structure, const JobConfig& c, double residual,
                                 double tol, bool pass) {
  VerificationReport r;
  r.identity = std::move(identity);
  r.structure = std::move(structure);
  r.samples = 1;
  r.max_residual = residual;
  r.mean_residual = residual;
  r.tol = tol;
  r.pass = pass;
  r.seed = c.seed;
  r.nodes = c.nodes;
  r.min_separation = c.min_separation;
  return r;
}

void append(std::vector<VerificationReport>& to, const std::vector<VerificationReport>& from) {
  to.insert(to.end(), from.begin(), from.end());
}

// ---------------------------------------------------------------------------
// Jobs

void job_verify(const JobConfig& c, const CatalogEntry& e, RunReport& out) {
  const VerifyOptions vo = verify_options(c);
  append(out.reports, verify_axioms(e.structure.base, vo));
  if (e.enhanced()) out.reports.push_back(verify_lambda(e.structure, vo));
}

void job_potentials(const JobConfig& c, const CatalogEntry& e, RunReport& out) {
  if (!e.enhanced()) schema("structure family " + e.family + " has no potentials");
  const VerifyOptions vo = verify_options(c);
  out.reports.push_back(verify_lambda(e.structure, vo));
  Json labels = Json::array();
  for (const auto& h : e.potentials) {
    if (!h.difference) continue;
    auto r = verify_potential(e.structure, h, vo);
    r.identity = "potential:" + h.label;
    out.reports.push_back(r);
    labels.push_back(h.label);
  }
  out.results["potentials"] = labels;
}

void job_collide(const JobConfig& c, const CatalogEntry& e, RunReport& out) {
  const VerifyOptions vo = verify_options(c);
  const auto& groups = c.collide.groups;
  Json g = Json::array();
  for (const auto& grp : groups) g.push_back({{"base", grp.base_index + 1}, {"depth", grp.depth}});
  out.results["groups"] = g;
  out.results["ladder"] = c.collide.ladder;
  const GTStructure limit = collide_points_limit(e.structure.base, groups, c.collide.ladder);
  const GTStructure closed = collide_points_closed(e.structure.base, groups, c.nodes);
  append(out.reports, verify_axioms(limit, vo));
  if (e.enhanced()) out.reports.push_back(verify_lambda(collide_points_limit(e.structure, groups, c.collide.ladder), vo));
  const double d = structure_distance(limit, closed, vo);
  out.reports.push_back(custom_report("collide_closed_vs_limit", limit.label, c, d, kCollideAgreementTol,
                                      d < kCollideAgreementTol));
}

void job_pushforward(const JobConfig& c, const CatalogEntry& e, RunReport& out) {
  const VerifyOptions vo = verify_options(c);
  const CoordinateChange mu = coordinate_change(c.mu);
  out.results["mu"] = c.mu;
  append(out.reports, verify_axioms(pushforward(e.structure.base, mu), vo));
  if (!e.enhanced()) return;
  const EnhancedGT pe = pushforward_lambda(e.structure, mu);
  out.reports.push_back(verify_lambda(pe, vo));
  for (const auto& h : e.potentials) {
    if (!h.difference) continue;
    auto r = verify_potential(pe, pushforward_potential(h, mu), vo);
    r.identity = "potential:" + h.label;
    out.reports.push_back(r);
  }
}

void job_gtsys(const JobConfig& c, const CatalogEntry& e, RunReport& out) {
  const GTStructure& s = e.structure.base;
  const GTSystem sys = build_system(s, 3, 0, c.nodes);
  auto compat = compatibility_suite(sys, c.samples, c.seed, c.tol);
  compat.min_separation = c.min_separation;
  out.reports.push_back(compat);

  Rng rng(c.seed);
  double sym = 0.0;
  const int count = std::min(c.samples, 20);
  for (int q = 0; q < count; ++q) sym = std::max(sym, qhat_symmetry_defect(sys, sample_state(sys, rng)));
  auto rs = custom_report("qhat_symmetry", s.label, c, sym, c.tol, sym < c.tol);
  rs.samples = count;
  out.reports.push_back(rs);

  const GTSystem red = build_system(s, c.reduction.M, 0, c.nodes);
  const AxisData data = sample_axis_data(red, c.seed, c.reduction.scale);
  const ConvergenceResult cv = reduction_convergence(red, data, c.reduction.steps, c.reduction.h);
  // Second order: halving h divides the residual by 4.
  const double ratio_gap = std::abs(cv.ratio - 4.0);
  auto rr = custom_report("reduction_convergence", s.label, c, ratio_gap, kRatioHi - 4.0,
                          cv.ratio >= kRatioLo && cv.ratio <= kRatioHi);
  rr.metrics = {{"residual_h", cv.residual_h},
                {"M", static_cast<double>(c.reduction.M)},
                {"steps", static_cast<double>(c.reduction.steps)},
                {"h", c.reduction.h},
                {"scale", c.reduction.scale},
                {"residual_half", cv.residual_half},
                {"ratio", cv.ratio},
                {"ratio_lo", kRatioLo},
                {"ratio_hi", kRatioHi}};
  out.reports.push_back(rr);
  out.results["reduction"] = {{"M", c.reduction.M},
                              {"steps", c.reduction.steps},
                              {"h", c.reduction.h},
                              {"residual_h", cv.residual_h},
                              {"residual_half", cv.residual_half},
                              {"ratio", cv.ratio}};
}

void job_hydro(const JobConfig& c, const CatalogEntry& e, RunReport& out) {
  const PotentialFamily fam = family_from(e);
  if (fam.h.size() < 3) schema("hydro needs a family with at least three potentials");
  const auto& hc = c.hydro;
  const int N = static_cast<int>(fam.h.size());
  if (hc.i >= N || hc.j >= N || hc.k >= N) schema("hydro indices exceed the potential count");
  Rng rng(c.seed);
  const std::vector<cplx> v = e.structure.base.sample_fields(rng);
  const int m = static_cast<int>(v.size());
  const DimensionResult d = dimension_D(fam, hc.i, hc.j, hc.k, v, hc.z_samples, c.seed, hc.svd_tol, c.nodes);
  auto rd = custom_report("dimension_D", fam.label, c, 0.0, hc.svd_tol, d.stable);
  rd.samples = hc.z_samples;
  rd.metrics = {{"D", static_cast<double>(d.D)},
                {"D_doubled", static_cast<double>(d.D_doubled)},
                {"m", static_cast<double>(m)},
                {"within_m_to_2m_minus_1", (d.D >= m && d.D <= 2 * m - 1) ? 1.0 : 0.0}};
  out.reports.push_back(rd);

  const HydroSystem hs = hydro_coefficients(fam, hc.i, hc.j, hc.k, v, hc.z_samples, c.seed, hc.svd_tol, c.nodes);
  auto rh = custom_report("hydro_recomposition", fam.label, c, hs.holdout_residual, c.tol,
                          hs.holdout_residual < c.tol && hs.stacked_rank == hs.D);
  rh.samples = hc.z_samples;
  rh.metrics = {{"expansion_residual", hs.expansion_residual},
                {"stacked_rank", static_cast<double>(hs.stacked_rank)}};
  out.reports.push_back(rh);

  Json fields = Json::array();
  for (cplx x : v) fields.push_back(complex_json(x));
  const auto rows = numbered("r", hs.D);
  const auto& coords = e.structure.base.coords;
  out.results["fields"] = fields;
  out.results["D"] = d.D;
  out.results["D_doubled"] = d.D_doubled;
  out.results["D_sweep"] = d.D_sweep;
  out.results["singular_values"] = d.singular_values;
  Json basis = Json::array();
  for (int b : hs.basis_rows) basis.push_back(b + 1);
  out.results["basis_rows"] = basis;
  out.results["a"] = matrix_json(hs.a, rows, coords);
  out.results["b"] = matrix_json(hs.b, rows, coords);
  out.results["c"] = matrix_json(hs.c, rows, coords);
}

void job_reconstruct(const JobConfig& c, const CatalogEntry& e, RunReport& out) {
  const PotentialFamily fam = family_from(e);
  if (fam.h.size() < 2) schema("reconstruct needs a family with at least two potentials");
  const VerifyOptions vo = verify_options(c);
  out.reports.push_back(reconstruct_f(fam, 0, 1, vo));
  out.reports.push_back(reconstruct_lambda(fam, 0, vo));
  out.reports.push_back(integrability_criterion(fam, build_system(e.structure.base, 2, 0, c.nodes), vo));
}

void job_rauch(const JobConfig& c, RunReport& out) {
  Rng rng(c.seed);
  const CurveModuli m = c.moduli ? *c.moduli : sample_moduli(rng);
  PeriodOptions po;
  po.panels = c.panels;
  out.results["moduli"] = {{"a", complex_json(m.a)}, {"b", complex_json(m.b)}, {"c", complex_json(m.c)}};
  const PeriodData pd = periods(m, po);
  const double sym = symmetry_defect(pd.B);
  const double im = min_imag_eigenvalue(pd.B);
  auto rs = custom_report("period_symmetry", "genus2", c, sym, kSymmetryTol, sym < kSymmetryTol && im > 0.0);
  rs.nodes = po.nodes;
  rs.metrics = {{"min_imag_eigenvalue", im}, {"condition", pd.condition}};
  out.reports.push_back(rs);
  out.results["B"] = matrix_json(pd.B, {"b1", "b2"}, {"omega1", "omega2"});
  Json branches = Json::array();
  for (int b = 0; b < 3; ++b) {
    RauchResult r = rauch_check(m, b, c.delta, c.tol, po);
    r.report.seed = c.seed;
    r.report.min_separation = c.min_separation;
    out.reports.push_back(r.report);
    branches.push_back({{"branch", std::string(1, "abc"[b])},
                        {"ratio", matrix_json(r.ratio, {"1", "2"}, {"1", "2"})},
                        {"deviation", r.deviation},
                        {"deviation_half", r.deviation_half},
                        {"truncation", r.truncation}});
  }
  out.results["rauch"] = branches;
}

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"verify", "collide", "pushforward", "potentials", "gtsys",
                                          "hydro",  "reconstruct", "rauch", "report"};
  return c;
}

Json complex_json(cplx z) { return Json::array({z.real(), z.imag()}); }

JobConfig parse_config(const Json& j, std::optional<std::uint64_t> seed_override) {
  only_keys(j, "config", {"command", "structure", "seed", "samples", "tol", "nodes", "panels", "delta",
                          "min_separation", "collide", "pushforward", "moduli", "reduction", "hydro", "output"});
  JobConfig c;
  if (!j.contains("command") || !j["command"].is_string()) schema("command is required and must be a string");
  c.command = j["command"].get<std::string>();
  const auto& cmds = commands();
  if (std::find(cmds.begin(), cmds.end(), c.command) == cmds.end()) schema("unknown command '" + c.command + "'");

  if (j.contains("seed")) {
    const auto& s = j["seed"];
    if (!s.is_number_unsigned() && !s.is_number_integer()) schema("seed must be an integer");
    if (s.is_number_unsigned())
      c.seed = s.get<std::uint64_t>();
    else if (s.get<std::int64_t>() > 0)
      c.seed = static_cast<std::uint64_t>(s.get<std::int64_t>());
    if (c.seed == 0) schema("seed must be positive");
  }
  if (seed_override) {
    if (*seed_override == 0) schema("seed must be positive");
    c.seed = *seed_override;
  }
  if (c.seed == 0) schema("seed is mandatory");

  if (j.contains("structure")) {
    const auto& s = j["structure"];
    only_keys(s, "structure", {"family", "n"});
    if (!s.contains("family") || !s["family"].is_string()) schema("structure.family must be a string");
    c.structure.family = s["family"].get<std::string>();
    const auto& ids = family_ids();
    if (std::find(ids.begin(), ids.end(), c.structure.family) == ids.end())
      schema("unknown structure family '" + c.structure.family + "'");
    if (s.contains("n")) c.structure.n = positive_small(s["n"], "structure.n", 16);
    else c.structure.n = default_points(c.command, c.structure.family);
    if (c.command == "collide" && c.structure.family == "genus2")
      schema("genus2 has no punctures to collide");
  } else if (c.command != "rauch") {
    schema("structure is required for command " + c.command);
  }

  if (c.command == "rauch") c.tol = kRauchTol;
  if (c.command == "collide" || c.command == "pushforward") c.tol = kTransformTol;
  if (j.contains("samples")) c.samples = positive_small(j["samples"], "samples");
  if (j.contains("tol")) c.tol = positive_number(j["tol"], "tol");
  if (j.contains("nodes")) c.nodes = positive_small(j["nodes"], "nodes", 4096);
  if (j.contains("panels")) c.panels = positive_small(j["panels"], "panels", 4096);
  if (j.contains("delta")) c.delta = positive_number(j["delta"], "delta");
  if (j.contains("min_separation")) c.min_separation = positive_number(j["min_separation"], "min_separation");
  if (c.nodes < 4) schema("nodes must be at least 4");

  c.collide.ladder = default_ladder();
  c.collide.groups = {CollisionGroup{c.structure.family == "genus1" ? 1 : 0, 1}};
  if (j.contains("collide")) {
    const auto& cj = j["collide"];
    only_keys(cj, "collide", {"groups", "ladder"});
    if (cj.contains("groups")) {
      if (!cj["groups"].is_array() || cj["groups"].empty()) schema("collide.groups must be a non-empty array");
      c.collide.groups.clear();
      for (const auto& g : cj["groups"]) {
        only_keys(g, "collide.groups[]", {"base", "depth"});
        if (!g.contains("base") || !g.contains("depth")) schema("collide.groups[] needs base and depth");
        c.collide.groups.push_back(
            {positive_small(g["base"], "collide.groups[].base", 64) - 1, positive_small(g["depth"], "collide.groups[].depth", 8)});
      }
    }
    if (cj.contains("ladder")) {
      if (!cj["ladder"].is_array() || cj["ladder"].size() < 2) schema("collide.ladder needs at least two steps");
      c.collide.ladder.clear();
      for (const auto& x : cj["ladder"]) c.collide.ladder.push_back(positive_number(x, "collide.ladder[]"));
      for (std::size_t q = 1; q < c.collide.ladder.size(); ++q)
        if (!(c.collide.ladder[q] < c.collide.ladder[q - 1])) schema("collide.ladder must be strictly decreasing");
    }
  }

  if (j.contains("pushforward")) {
    const auto& pj = j["pushforward"];
    only_keys(pj, "pushforward", {"mu"});
    if (pj.contains("mu")) {
      if (!pj["mu"].is_string()) schema("pushforward.mu must be a string");
      c.mu = pj["mu"].get<std::string>();
      const auto& ids = coordinate_change_ids();
      if (std::find(ids.begin(), ids.end(), c.mu) == ids.end()) schema("unknown pushforward.mu '" + c.mu + "'");
    }
  }

  if (j.contains("moduli")) {
    const auto& mj = j["moduli"];
    only_keys(mj, "moduli", {"a", "b", "c"});
    if (!mj.contains("a") || !mj.contains("b") || !mj.contains("c")) schema("moduli needs a, b and c");
    CurveModuli m{complex_value(mj["a"], "moduli.a"), complex_value(mj["b"], "moduli.b"),
                  complex_value(mj["c"], "moduli.c")};
    try {
      m.validate(4.0 * c.delta);
    } catch (const NumericError& err) {
      schema(std::string("moduli violate the curve invariant: ") + err.what());
    }
    c.moduli = m;
  }

  if (j.contains("reduction")) {
    const auto& rj = j["reduction"];
    only_keys(rj, "reduction", {"M", "steps", "h", "scale"});
    c.reduction.present = true;
    if (rj.contains("M")) c.reduction.M = positive_small(rj["M"], "reduction.M", 3);
    if (rj.contains("steps")) c.reduction.steps = positive_small(rj["steps"], "reduction.steps", 200);
    if (rj.contains("h")) c.reduction.h = positive_number(rj["h"], "reduction.h");
    if (rj.contains("scale")) c.reduction.scale = positive_number(rj["scale"], "reduction.scale");
    if (c.reduction.M < 2) schema("reduction.M must be 2 or 3");
  }

  if (j.contains("hydro")) {
    const auto& hj = j["hydro"];
    only_keys(hj, "hydro", {"i", "j", "k", "z_samples", "svd_tol"});
    if (hj.contains("i")) c.hydro.i = positive_small(hj["i"], "hydro.i", 64) - 1;
    if (hj.contains("j")) c.hydro.j = positive_small(hj["j"], "hydro.j", 64) - 1;
    if (hj.contains("k")) c.hydro.k = positive_small(hj["k"], "hydro.k", 64) - 1;
    if (hj.contains("z_samples")) c.hydro.z_samples = positive_small(hj["z_samples"], "hydro.z_samples", 100000);
    if (hj.contains("svd_tol")) c.hydro.svd_tol = positive_number(hj["svd_tol"], "hydro.svd_tol");
    if (!(c.hydro.svd_tol < 1.0)) schema("hydro.svd_tol must be below 1");
    const auto& h = c.hydro;
    if (h.i == h.j || h.j == h.k || h.i == h.k) schema("hydro.i, hydro.j, hydro.k must be pairwise distinct");
  }

  if (j.contains("output")) {
    if (!j["output"].is_string() || j["output"].get<std::string>().empty()) schema("output must be a non-empty string");
    c.output = j["output"].get<std::string>();
  }
  return c;
}

Json echo(const JobConfig& c) {
  Json j;
  j["command"] = c.command;
  j["structure"] = {{"family", family_label(c)}, {"n", c.structure.n}};
  j["seed"] = c.seed;
  j["samples"] = c.samples;
  j["tol"] = c.tol;
  j["nodes"] = c.nodes;
  j["panels"] = c.panels;
  j["delta"] = c.delta;
  j["min_separation"] = c.min_separation;
  Json groups = Json::array();
  for (const auto& g : c.collide.groups) groups.push_back({{"base", g.base_index + 1}, {"depth", g.depth}});
  j["collide"] = {{"groups", groups}, {"ladder", c.collide.ladder}};
  j["pushforward"] = {{"mu", c.mu}};
  if (c.moduli)
    j["moduli"] = {{"a", complex_json(c.moduli->a)}, {"b", complex_json(c.moduli->b)}, {"c", complex_json(c.moduli->c)}};
  else
    j["moduli"] = nullptr;
  j["reduction"] = {{"M", c.reduction.M}, {"steps", c.reduction.steps}, {"h", c.reduction.h}, {"scale", c.reduction.scale}};
  j["hydro"] = {{"i", c.hydro.i + 1},
                {"j", c.hydro.j + 1},
                {"k", c.hydro.k + 1},
                {"z_samples", c.hydro.z_samples},
                {"svd_tol", c.hydro.svd_tol}};
  j["output"] = c.output;
  return j;
}

RunReport run(const JobConfig& c) {
  RunReport out;
  out.config = echo(c);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (c.command == "rauch") {
      job_rauch(c, out);
    } else {
      const CatalogEntry e = make_structure(c.structure);
      if (c.command == "verify") job_verify(c, e, out);
      else if (c.command == "collide") job_collide(c, e, out);
      else if (c.command == "pushforward") job_pushforward(c, e, out);
      else if (c.command == "potentials") job_potentials(c, e, out);
      else if (c.command == "gtsys") job_gtsys(c, e, out);
      else if (c.command == "hydro") job_hydro(c, e, out);
      else if (c.command == "reconstruct") job_reconstruct(c, e, out);
      else if (c.command == "report") {
        append(out.reports, verify_axioms(e.structure.base, verify_options(c)));
        if (e.enhanced()) {
          job_potentials(c, e, out);
          if (family_from(e).h.size() >= 2) job_reconstruct(c, e, out);
        }
      }
    }
  } catch (const NumericError& err) {
    out.error = std::string(to_string(err.kind())) + ": " + err.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.pass = !out.error && !out.reports.empty();
  for (const auto& r : out.reports) out.pass = out.pass && r.pass;
  return out;
}

Json to_json(const VerificationReport& r) {
  Json j;
  j["identity"] = r.identity;
  j["structure"] = r.structure;
  j["samples"] = r.samples;
  j["max_residual"] = r.max_residual;
  j["mean_residual"] = r.mean_residual;
  j["tol"] = r.tol;
  j["pass"] = r.pass;
  j["seed"] = r.seed;
  j["nodes"] = r.nodes;
  j["min_separation"] = r.min_separation;
  Json m = Json::object();
  for (const auto& [k, v] : r.metrics) m[k] = v;
  j["metrics"] = m;
  return j;
}

Json to_json(const RunReport& r) {
  Json j;
  j["artifact"] = "gtw";
  j["version"] = kVersion;
  j["config"] = r.config;
  Json reps = Json::array();
  for (const auto& x : r.reports) reps.push_back(to_json(x));
  j["reports"] = reps;
  j["results"] = r.results;
  j["error"] = r.error ? Json(*r.error) : Json(nullptr);
  j["pass"] = r.pass;
  return j;
}

std::string summary(const RunReport& r) {
  std::ostringstream os;
  os << "gtw " << kVersion << "  command " << r.config["command"].get<std::string>() << "  structure "
     << r.config["structure"]["family"].get<std::string>() << "(" << r.config["structure"]["n"].get<int>()
     << ")  seed " << r.config["seed"].get<std::uint64_t>() << "\n";
  for (const auto& x : r.reports) {
    os << (x.pass ? "PASS  " : "FAIL  ") << std::left << std::setw(28) << x.identity << std::setw(16) << x.structure
       << " max " << std::scientific << std::setprecision(3) << x.max_residual << "  tol " << x.tol << "\n";
    os.unsetf(std::ios::floatfield);
    os << std::right;
  }
  if (r.error) os << "ERROR " << *r.error << "\n";
  os << "verdict " << (r.pass ? "pass" : "fail") << "\n";
  os << "elapsed " << std::fixed << std::setprecision(3) << r.seconds << " s\n";
  return os.str();
}

std::string summary_path(const std::string& path) {
  std::filesystem::path p(path);
  if (p.extension() == ".json") return p.replace_extension(".txt").string();
  return path + ".txt";
}

namespace {

void atomic_write(const std::string& path, const std::string& body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp + " for writing");
    f << body;
    f.flush();
    if (!f) throw IoError("write to " + tmp + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move report into place at " + path);
  }
}

}  // namespace

void emit_report(const RunReport& r, const std::string& path) {
  atomic_write(path, to_json(r).dump(2) + "\n");
  atomic_write(summary_path(path), summary(r));
}

int execute(const std::string& config_path, const std::optional<std::string>& out,
            std::optional<std::uint64_t> seed, std::ostream& err) {
  std::string text;
  {
    std::ifstream f(config_path, std::ios::binary);
    if (!f) {
      err << "error: cannot read config " << config_path << "\n";
      return kIoFailure;
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  JobConfig c;
  RunReport r;
  try {
    const Json j = Json::parse(text);
    c = parse_config(j, seed);
    if (out) c.output = *out;
    r = run(c);
  } catch (const Json::exception& e) {
    err << "schema violation: " << e.what() << "\n";
    return kSchemaViolation;
  } catch (const SchemaError& e) {
    err << "schema violation: " << e.what() << "\n";
    return kSchemaViolation;
  }
  try {
    emit_report(r, c.output);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  }
  if (r.error) err << "numeric failure: " << *r.error << "\n";
  return r.pass ? kPass : kNumericFailure;
}

}  // namespace gtw::cli
