#include <doctest.h>

#include "gtw/catalog.hpp"
#include "gtw/gibbons_tsarev.hpp"

using namespace gtw;

TEST_CASE("benney qhat closed form") {
  const GTSystem sys = build_system(benney(1).structure.base, 2);
  const std::vector<cplx> u{{0.2, -0.1}};
  const Point a{{1.1, 0.4}}, b{{-0.7, 0.9}};
  const cplx expected = (a.z + b.z - 2.0 * u[0]) / ((a.z - b.z) * (a.z - b.z));
  CHECK(std::abs(sys.qhat(a, b, u, 0.1) - expected) < 1e-12);
  CHECK(std::abs(sys.qhat(b, a, u, 0.1) - expected) < 1e-12);
}

TEST_CASE("system construction") {
  CHECK_NOTHROW(build_system(benney(1).structure.base, 1));
  CHECK_THROWS_AS(build_system(benney(1).structure.base, 0), NumericError);
  GTStructure empty = benney(1).structure.base;
  empty.m = 0;
  CHECK_THROWS_AS(build_system(empty, 2), NumericError);
  GTStructure flat = benney(1).structure.base;
  flat.g = [](const Point&, FieldVec, std::span<cplx> g) { g[0] = 0.0; };
  CHECK_THROWS_AS(build_system(flat, 2), NumericError);
}

TEST_CASE("state validation") {
  const GTSystem sys = build_system(benney(1).structure.base, 2);
  ReductionState st{{Point{0.5}, Point{0.5}}, {0.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(validate_state(sys, st), NumericError);
  st.p[1].z = 1.5;
  CHECK_NOTHROW(validate_state(sys, st));
  st.w.pop_back();
  CHECK_THROWS_AS(validate_state(sys, st), NumericError);
}

TEST_CASE("compatibility holds for every builtin structure") {
  for (const auto& id : family_ids()) {
    const auto s = id == "genus2" ? genus2() : make_structure({id, 2}).structure.base;
    const GTSystem sys = build_system(s, 3);
    const auto r = compatibility_suite(sys, 10, 3, 1e-9);
    CAPTURE(id);
    CHECK(r.pass);
    CHECK(r.max_residual < 1e-9);
  }
}

TEST_CASE("compatibility suite is identical serial and parallel") {
  const GTSystem sys = build_system(genus0(2).structure.base, 3);
  const auto a = compatibility_suite(sys, 8, 4, 1e-9, Exec::serial);
  const auto b = compatibility_suite(sys, 8, 4, 1e-9, Exec::parallel);
  CHECK(a.max_residual == b.max_residual);
  CHECK(a.mean_residual == b.mean_residual);
}

TEST_CASE("a bent f breaks compatibility") {
  const auto s = genus0(2).structure.base;
  const auto bad = perturb_f(s, [](const Point& a, const Point& b, FieldVec) { return 1e-2 * (a.z - b.z); });
  const auto r = compatibility_suite(build_system(bad, 3), 10, 6, 1e-9);
  CHECK_FALSE(r.pass);
  CHECK(r.max_residual > 1e-4);
}

TEST_CASE("qhat is symmetric") {
  const GTSystem sys = build_system(genus1(1).structure.base, 2);
  Rng rng(8);
  for (int i = 0; i < 5; ++i) CHECK(qhat_symmetry_defect(sys, sample_state(sys, rng)) < 1e-9);
}

TEST_CASE("constant data gives a constant reduction") {
  const GTSystem sys = build_system(benney(1).structure.base, 2);
  AxisData d;
  d.origin = ReductionState{{Point{{0.5, 0.3}}, Point{{-0.8, 0.1}}}, {{0.1, 0.0}}, {0.0, 0.0}};
  d.dp = d.ddp = d.dw = {0.0, 0.0};
  const ReductionGrid g = integrate_reduction(sys, d, 4, 0.1);
  CHECK(g.residual == 0.0);
  const int far[2] = {4, 4};
  CHECK(g.at(far).p[0].z == d.origin.p[0].z);
  CHECK(g.at(far).v[0] == d.origin.v[0]);
  CHECK(g.nodes.size() == 25);
}

TEST_CASE("reduction integration converges at second order") {
  for (const auto& s : {benney(1).structure.base, genus0(2).structure.base}) {
    const GTSystem sys = build_system(s, 2);
    const ConvergenceResult cv = reduction_convergence(sys, sample_axis_data(sys, 7, 1e-2), 10, 0.05);
    CAPTURE(s.label);
    CHECK(cv.ratio >= 3.5);
    CHECK(cv.ratio <= 4.5);
  }
}

TEST_CASE("three-component reduction integrates") {
  const GTSystem sys = build_system(benney(1).structure.base, 3);
  const ReductionGrid g = integrate_reduction(sys, sample_axis_data(sys, 9, 1e-2), 4, 0.05);
  CHECK(g.nodes.size() == 125);
  CHECK(std::isfinite(g.residual));
}

TEST_CASE("runaway data raises blow_up") {
  const GTSystem sys = build_system(benney(1).structure.base, 2);
  AxisData d;
  d.origin = ReductionState{{Point{{0.5, 0.3}}, Point{{-0.8, 0.1}}}, {{0.1, 0.0}}, {1e300, 1e300}};
  d.dp = d.ddp = d.dw = {0.0, 0.0};
  try {
    integrate_reduction(sys, d, 10, 0.1);
    FAIL("expected blow_up");
  } catch (const NumericError& e) {
    CHECK(e.kind() == ErrorKind::blow_up);
  }
}
