#include <doctest.h>

#include "gtw/catalog.hpp"

using namespace gtw;

namespace {

cplx f_at(const GTStructure& s, cplx a, cplx b, const std::vector<cplx>& v) {
  return s.f(Point{a}, Point{b}, v);
}

}  // namespace

TEST_CASE("family ids and factory") {
  const auto& ids = family_ids();
  CHECK(ids.size() == 4);
  for (const auto& id : ids) CHECK(make_structure({id, 2}).structure.base.m > 0);
  CHECK_THROWS_AS(make_structure({"genus7", 1}), NumericError);
  CHECK_THROWS_AS(genus0(0), NumericError);
  CHECK(genus1(2).structure.base.m == 3);
  CHECK(genus2().m == 3);
}

TEST_CASE("genus-0 closed forms") {
  const auto e = genus0(1);
  const std::vector<cplx> u{5.0};
  CHECK(std::abs(f_at(e.structure.base, 2.0, 3.0, u) - (-3.0)) < 1e-15);
  CHECK(std::abs(e.structure.base.g_at(Point{2.0}, u)[0] - (-10.0 / 3.0)) < 1e-15);
  CHECK(std::abs(e.structure.lambda(Point{2.0}, Point{3.0}, u) - (-1.0)) < 1e-15);
}

TEST_CASE("benney closed forms") {
  const auto e = benney(1);
  const std::vector<cplx> u{5.0};
  CHECK(std::abs(e.structure.base.g_at(Point{2.0}, u)[0] - (-1.0 / 3.0)) < 1e-15);
  CHECK(std::abs(f_at(e.structure.base, 2.0, 3.0, u) - (-1.0)) < 1e-15);
}

TEST_CASE("genus-1 lambda differs from f by 2 pi i") {
  const auto e = genus1(1);
  const std::vector<cplx> v{{0.1, 1.1}, {0.4, 0.3}};
  const Point a{{0.2, 0.1}}, b{{-0.3, 0.45}};
  CHECK(std::abs(e.structure.base.f(a, b, v) - e.structure.lambda(a, b, v) - kTwoPiI) < 1e-13);
}

TEST_CASE("samplers are deterministic") {
  for (const auto& id : family_ids()) {
    const auto s = make_structure({id, 2}).structure.base;
    Rng a(17), b(17);
    CHECK(s.sample_fields(a) == s.sample_fields(b));
  }
}

TEST_CASE("genus-2 vector field has residue 1/2 at each modulus") {
  const auto s = genus2();
  const std::vector<cplx> v{{1.7, 0.1}, {2.5, -0.1}, {3.3, 0.05}};
  for (int k = 0; k < 3; ++k) {
    const auto gk = [&](cplx z) { return s.g_at(Point{z}, v)[static_cast<std::size_t>(k)]; };
    CHECK(std::abs(laurent_coeff(gk, v[static_cast<std::size_t>(k)], -1, 0.1, 64) - 0.5) < 1e-12);
  }
}

TEST_CASE("genus-2 f has no pole between opposite sheets") {
  const auto s = genus2();
  const std::vector<cplx> v{{1.7, 0.1}, {2.5, -0.1}, {3.3, 0.05}};
  const cplx p{0.6, 0.9};
  for (double d : {1e-3, 1e-5, 1e-7}) {
    const cplx same = s.f(Point{p, 1}, Point{p + d, 1}, v);
    const cplx other = s.f(Point{p, 1}, Point{p + d, -1}, v);
    CHECK(std::abs(same * d) == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(std::abs(other) < 10.0);
  }
}

TEST_CASE("curve square root and its partials") {
  const CurveModuli m{{1.7, 0.1}, {2.5, -0.1}, {3.3, 0.05}};
  const cplx p{0.4, 0.7};
  const cplx q = curve_q(p, 1, m);
  const cplx quintic = p * (p - 1.0) * (p - m.a) * (p - m.b) * (p - m.c);
  CHECK(std::abs(q * q - quintic) < 1e-13);
  CHECK(curve_q(p, -1, m) == -q);
  const auto qp = [&](cplx z) { return curve_q(z, 1, m); };
  CHECK(std::abs(curve_q_dp(p, 1, m) - cauchy_derivative(qp, p, 1, 0.05, 32)) < 1e-11);
  for (int k = 0; k < 3; ++k) {
    const auto qm = [&](cplx t) {
      CurveModuli n = m;
      (k == 0 ? n.a : k == 1 ? n.b : n.c) = t;
      return curve_q(p, 1, n);
    };
    const cplx at = k == 0 ? m.a : k == 1 ? m.b : m.c;
    CHECK(std::abs(curve_q_dmod(p, 1, m, k) - cauchy_derivative(qm, at, 1, 0.05, 32)) < 1e-11);
  }
}

TEST_CASE("moduli validation") {
  CHECK_THROWS_AS((CurveModuli{2.0, 2.0, 3.0}).validate(), NumericError);
  CHECK_THROWS_AS((CurveModuli{1.0, 2.0, 3.0}).validate(), NumericError);
  CHECK_NOTHROW((CurveModuli{1.7, 2.5, 3.3}).validate());
  Rng rng(4);
  for (int i = 0; i < 20; ++i) CHECK(sample_moduli(rng).separation() >= 0.3);
  CHECK(curve_clearance(cplx{0.5, 0.0}, CurveModuli{1.7, 2.5, 3.3}) == 0.0);
}

TEST_CASE("coordinate changes") {
  const auto ids = coordinate_change_ids();
  CHECK(ids.size() == 2);
  const std::vector<cplx> v{0.2};
  const auto quad = coordinate_change("quad");
  CHECK(std::abs(quad.mu(1.0, v) - (1.0 + 0.1 + 0.01)) < 1e-15);
  CHECK(std::abs(mu_prime(quad, 1.0, v) - 1.2) < 1e-12);
}
