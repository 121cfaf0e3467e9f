#include <doctest.h>

#include "gtw/hyperelliptic.hpp"

using namespace gtw;

namespace {
const CurveModuli kDefault{1.7, 2.5, 3.3};
}

TEST_CASE("period matrix is symmetric with positive imaginary part") {
  Rng rng(21);
  for (int i = 0; i < 20; ++i) {
    const CurveModuli m = sample_moduli(rng);
    const PeriodData pd = periods(m);
    CHECK(symmetry_defect(pd.B) < 1e-8);
    CHECK(min_imag_eigenvalue(pd.B) > 0.0);
    CHECK(pd.condition < 1e8);
  }
}

TEST_CASE("normalizer inverts the a-periods") {
  const PeriodData pd = periods(kDefault);
  CHECK((pd.a_periods * pd.normalizer - Mat2::Identity()).norm() < 1e-12);
}

TEST_CASE("periods converge under panel refinement") {
  PeriodOptions fine;
  fine.panels = 16;
  const PeriodData a = periods(kDefault);
  const PeriodData b = periods(kDefault, fine);
  CHECK((a.B - b.B).norm() < 1e-10);
}

TEST_CASE("chain integrals are finite and nonzero") {
  const auto I = chain_integrals(kDefault);
  for (const auto& link : I)
    for (cplx x : link) {
      CHECK(std::isfinite(std::abs(x)));
      CHECK(std::abs(x) > 1e-3);
    }
}

TEST_CASE("rauch variation") {
  for (int branch = 0; branch < 3; ++branch) {
    const RauchResult r = rauch_check(kDefault, branch, 1e-4, 1e-4);
    CAPTURE(branch);
    CHECK(r.report.pass);
    CHECK(r.deviation < 1e-4);
    CHECK(r.truncation < 1e-4);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(std::abs(r.ratio(i, j) - cplx{0.0, kPi}) < 1e-3);
  }
}

TEST_CASE("local differentials are finite") {
  const PeriodData pd = periods(kDefault);
  for (int b = 0; b < 3; ++b) {
    const auto w = local_differentials(kDefault, pd, b);
    CHECK(std::abs(w[0]) + std::abs(w[1]) > 0.0);
  }
}

TEST_CASE("axioms on a fixed curve, both sheets") {
  VerifyOptions o;
  o.samples = 40;
  o.tol = 1e-6;
  for (const auto& r : gt_axioms_on_curve(kDefault, o)) CHECK(r.pass);
}

TEST_CASE("degenerate moduli are refused") {
  CHECK_THROWS_AS(periods(CurveModuli{1.7, 1.7, 3.3}), NumericError);
  CHECK_THROWS_AS(genus2_from(CurveModuli{0.0, 2.5, 3.3}), NumericError);
}
