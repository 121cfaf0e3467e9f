// Acceptance suite: one line per criterion, exit status 0 only if all pass.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gtw/catalog.hpp"
#include "gtw/cli.hpp"
#include "gtw/gibbons_tsarev.hpp"
#include "gtw/hierarchy.hpp"
#include "gtw/hyperelliptic.hpp"

using namespace gtw;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", x);
  return buf;
}

VerifyOptions opts(int samples, double tol, std::uint64_t seed) {
  VerifyOptions o;
  o.samples = samples;
  o.tol = tol;
  o.seed = seed;
  return o;
}

double worst(const std::vector<VerificationReport>& rs) {
  double w = 0.0;
  for (const auto& r : rs) w = std::max(w, r.max_residual);
  return w;
}

bool all_pass(const std::vector<VerificationReport>& rs) {
  for (const auto& r : rs)
    if (!r.pass) return false;
  return true;
}

// ---------------------------------------------------------------------------

Outcome axiom_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  double w = 0.0;
  for (const auto& e : {genus0(3), genus1(2), benney(3)}) {
    const auto rs = verify_axioms(e.structure.base, opts(100, 1e-8, 101));
    o.require(all_pass(rs) && worst(rs) < 1e-8, e.structure.base.label);
    w = std::max(w, worst(rs));
  }
  const auto g2 = verify_axioms(genus2(), opts(100, 1e-6, 101));
  o.require(all_pass(g2) && worst(g2) < 1e-6, "genus2");
  const double t = seconds_since(t0);
  o.require(t < 30.0, "runtime");
  o.note("max " + sci(w) + " (genus 0/1, benney), " + sci(worst(g2)) + " (genus 2), " + sci(t) + " s");
  return o;
}

Outcome enhanced_suite() {
  Outcome o;
  double w = 0.0;
  for (const auto& e : {genus0(3), genus1(2), benney(3)}) {
    const auto opt = opts(100, 1e-8, 202);
    const auto rl = verify_lambda(e.structure, opt);
    o.require(rl.pass && rl.max_residual < 1e-8, e.structure.base.label + " lambda");
    w = std::max(w, rl.max_residual);
    for (const auto& h : e.potentials) {
      const auto r = verify_potential(e.structure, h, opt);
      o.require(r.pass && r.max_residual < 1e-8, e.structure.base.label + " " + h.label);
      w = std::max(w, r.max_residual);
    }
  }
  // p - tau: f - lambda is exactly 2 pi i and the identity closes to rounding.
  const auto g1 = genus1(2);
  const auto lin = verify_potential(g1.structure, g1.potentials.front(), opts(100, 1e-8, 203));
  double gap = 0.0;
  Rng rng(204);
  for (int i = 0; i < 100; ++i) {
    const auto v = g1.structure.base.sample_fields(rng);
    const Point a = g1.structure.base.sample_point(rng, v), b = g1.structure.base.sample_point(rng, v);
    if (std::abs(a.z - b.z) < 0.1) continue;
    gap = std::max(gap, std::abs(g1.structure.lambda(a, b, v) - g1.structure.base.f(a, b, v) + kTwoPiI));
  }
  o.require(lin.max_residual < 1e-12, "p-tau residual");
  o.require(gap < 1e-12, "lambda - f = -2 pi i");
  o.note("max " + sci(w) + "; p-tau " + sci(lin.max_residual) + ", |lambda - f + 2 pi i| " + sci(gap));
  return o;
}

Outcome transform_suite() {
  Outcome o;
  double w = 0.0, agree = 0.0;
  auto check = [&](const std::vector<VerificationReport>& rs, const std::string& what) {
    o.require(all_pass(rs), what);
    w = std::max(w, worst(rs));
  };
  const auto opt = opts(60, 1e-6, 303);
  for (const auto& e : {genus0(1), genus1(1), benney(1)}) check(verify_axioms(add_points(e.structure.base, 2), opt), "add_points " + e.structure.base.label);
  for (const auto& id : coordinate_change_ids()) {
    const auto mu = coordinate_change(id);
    for (const auto& e : {genus0(2), genus1(1), benney(2)}) {
      check(verify_axioms(pushforward(e.structure.base, mu), opt), "pushforward " + id + " " + e.structure.base.label);
      const auto pe = pushforward_lambda(e.structure, mu);
      check({verify_lambda(pe, opt)}, "pushforward lambda " + id);
      for (const auto& h : e.potentials) check({verify_potential(pe, pushforward_potential(h, mu), opt)}, "pushforward " + h.label);
    }
  }
  struct Case {
    CatalogEntry e;
    std::vector<CollisionGroup> groups;
  };
  for (const auto& c : {Case{genus0(2), {{0, 1}}}, Case{genus0(3), {{0, 2}}}, Case{benney(3), {{0, 2}}},
                        Case{genus1(2), {{1, 1}}}}) {
    const auto lim = collide_points_limit(c.e.structure.base, c.groups, default_ladder());
    check(verify_axioms(lim, opt), "collide " + lim.label);
    check({verify_lambda(collide_points_limit(c.e.structure, c.groups, default_ladder()), opt)}, "collide lambda");
    const double d = structure_distance(lim, collide_points_closed(c.e.structure.base, c.groups), opts(30, 1e-5, 304));
    o.require(d < 1e-5, "closed vs limit " + lim.label);
    agree = std::max(agree, d);
  }
  o.note("max " + sci(w) + ", closed vs limit " + sci(agree));
  return o;
}

Outcome gt_system_suite() {
  Outcome o;
  double w = 0.0, weakest = 1e300;
  int detected = 0, trials = 0;
  for (const auto& id : family_ids()) {
    const auto s = id == "genus2" ? genus2() : make_structure({id, 2}).structure.base;
    const auto r = compatibility_suite(build_system(s, 3), 50, 404, 1e-9);
    o.require(r.pass && r.max_residual < 1e-9, id);
    w = std::max(w, r.max_residual);
    Rng rng(405);
    for (int t = 0; t < 50; ++t) {
      const cplx c = std::polar(1.0, 2.0 * kPi * rng.uniform());
      const auto bad = perturb_f(s, [c](const Point& a, const Point& b, FieldVec) { return 1e-2 * c * (a.z - b.z); });
      const GTSystem sys = build_system(bad, 3);
      const double res = compatibility_residual(sys, sample_state(sys, rng), 1e-9).max_residual;
      weakest = std::min(weakest, res);
      detected += res > 1e-4;
      ++trials;
    }
  }
  o.require(detected == trials, "fault detection");
  o.note("max " + sci(w) + " over 50 states x 4 families; faults " + std::to_string(detected) + "/" +
         std::to_string(trials) + ", weakest " + sci(weakest));
  return o;
}

Outcome reduction_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  std::string ratios;
  for (const auto& s : {benney(1).structure.base, genus0(2).structure.base}) {
    const GTSystem sys = build_system(s, 2);
    const auto cv = reduction_convergence(sys, sample_axis_data(sys, 505, 1e-2), 10, 0.05);
    o.require(cv.ratio >= 3.5 && cv.ratio <= 4.5, s.label);
    ratios += (ratios.empty() ? "" : ", ") + s.label + " " + std::to_string(cv.ratio).substr(0, 5);
  }
  const double t = seconds_since(t0);
  o.require(t < 10.0, "runtime");
  o.note("ratio " + ratios + ", " + sci(t) + " s");
  return o;
}

Outcome reconstruction_suite() {
  Outcome o;
  double w = 0.0;
  for (const auto& e : {genus0(3), benney(3), genus1(2)}) {
    const auto fam = family_from(e);
    const auto opt = opts(100, 1e-8, 606);
    const int N = static_cast<int>(fam.h.size());
    for (int i = 0; i < N; ++i) {
      const auto rl = reconstruct_lambda(fam, i, opt);
      o.require(rl.pass, fam.label + " lambda");
      w = std::max(w, rl.max_residual);
      for (int j = i + 1; j < N; ++j) {
        const auto rf = reconstruct_f(fam, i, j, opt);
        o.require(rf.pass, fam.label + " f");
        w = std::max(w, rf.max_residual);
      }
    }
  }
  o.note("max relative " + sci(w) + " over every (i, j)");
  return o;
}

Outcome hydro_suite() {
  Outcome o;
  const auto fam = family_from(genus0(2));
  const std::vector<cplx> v{{0.3, 1.2}, {-0.8, -0.6}};
  const auto d = dimension_D(fam, 0, 1, 2, v, 40, 707);
  o.require(d.stable, "stability");
  o.require(d.D >= 2 && d.D <= 3, "D in [m, 2m - 1]");
  const auto hs = hydro_coefficients(fam, 0, 1, 2, v, 40, 707);
  o.require(hs.holdout_residual < 1e-8, "held-out recomposition");
  o.note("m = 2, D = " + std::to_string(d.D) + " (doubled " + std::to_string(d.D_doubled) + "), held-out " +
         sci(hs.holdout_residual));
  return o;
}

Outcome genus2_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  double sym = 0.0, im = 1e300, dev = 0.0;
  Rng rng(808);
  for (int i = 0; i < 20; ++i) {
    const CurveModuli m = sample_moduli(rng);
    const PeriodData pd = periods(m);
    sym = std::max(sym, symmetry_defect(pd.B));
    im = std::min(im, min_imag_eigenvalue(pd.B));
    for (int b = 0; b < 3; ++b) {
      const auto r = rauch_check(m, b, 1e-4, 1e-4);
      o.require(r.report.pass, "rauch");
      dev = std::max({dev, r.deviation, r.deviation_half, r.truncation});
    }
  }
  o.require(sym < 1e-8, "symmetry");
  o.require(im > 0.0, "Im B positive definite");
  const double t = seconds_since(t0);
  o.require(t < 120.0, "runtime");
  o.note("20 moduli: symmetry " + sci(sym) + ", min eig Im B " + sci(im) + ", rauch " + sci(dev) + ", " + sci(t) +
         " s");
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism_suite(const std::string& cli) {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "gtw_acceptance";
  fs::create_directories(dir);
  const std::vector<std::string> jobs{
      R"({"command": "verify", "structure": {"family": "genus1", "n": 2}, "seed": 11})",
      R"({"command": "potentials", "structure": {"family": "genus0", "n": 3}, "seed": 12})",
      R"({"command": "collide", "structure": {"family": "genus0", "n": 3}, "seed": 13, "collide": {"groups": [{"base": 1, "depth": 2}]}})",
      R"({"command": "pushforward", "structure": {"family": "benney", "n": 2}, "seed": 14, "pushforward": {"mu": "sin"}})",
      R"({"command": "gtsys", "structure": {"family": "benney"}, "seed": 15})",
      R"({"command": "hydro", "structure": {"family": "genus0"}, "seed": 16})",
      R"({"command": "reconstruct", "structure": {"family": "genus1", "n": 2}, "seed": 17})",
      R"({"command": "rauch", "seed": 18})",
      R"({"command": "report", "structure": {"family": "benney", "n": 2}, "seed": 19})"};
  int same = 0;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const fs::path cfg = dir / ("job" + std::to_string(k) + ".json");
    std::ofstream(cfg) << jobs[k];
    const fs::path out = dir / ("job" + std::to_string(k) + "_report.json");
    std::string bytes[2];
    for (int run = 0; run < 2; ++run) {
      fs::remove(out);
      const std::string cmd = "\"" + cli + "\" --config \"" + cfg.string() + "\" --out \"" + out.string() + "\" 2>/dev/null";
      const int rc = std::system(cmd.c_str());
      o.require(rc == 0, "job " + std::to_string(k) + " exit");
      bytes[run] = slurp(out);
    }
    const bool ok = !bytes[0].empty() && bytes[0] == bytes[1];
    o.require(ok, "job " + std::to_string(k) + " bytes");
    same += ok;
  }
  o.note(std::to_string(same) + "/" + std::to_string(jobs.size()) + " commands byte-identical on rerun");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "gtw";
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"axiom suite", axiom_suite},
      {"enhanced suite", enhanced_suite},
      {"transform preservation", transform_suite},
      {"gibbons-tsarev compatibility", gt_system_suite},
      {"reduction integration", reduction_suite},
      {"reconstruction", reconstruction_suite},
      {"hydrodynamic extraction", hydro_suite},
      {"genus-2 geometry", genus2_suite},
      {"determinism", [&] { return determinism_suite(cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("criterion %zu %s  %-30s %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
