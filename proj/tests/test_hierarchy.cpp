#include <doctest.h>

#include "gtw/catalog.hpp"
#include "gtw/hierarchy.hpp"

using namespace gtw;

namespace {

VerifyOptions opts(int samples = 40) {
  VerifyOptions o;
  o.samples = samples;
  o.seed = 12;
  return o;
}

// Three potentials linear in z: every tensor column is the same vector up to scale.
PotentialFamily linear_family() {
  PotentialFamily fam = family_from(benney(2));
  fam.h.clear();
  for (int k = 0; k < 3; ++k) {
    Potential h;
    h.label = "a" + std::to_string(k);
    h.value = [k](const Point& p, FieldVec v) { return (1.0 + double(k) * v[0] + double(k * k) * v[1]) * p.z; };
    fam.h.push_back(h);
  }
  return fam;
}

}  // namespace

TEST_CASE("families keep only claimed potentials") {
  const auto fam = family_from(genus0(2));
  CHECK(fam.h.size() == 3);
  for (const auto& h : fam.h) CHECK(h.difference);
}

TEST_CASE("z samples are deterministic and clear of poles") {
  const auto fam = family_from(genus0(2));
  const std::vector<cplx> v{{0.3, 1.2}, {-0.8, -0.6}};
  const auto a = sample_z(fam, v, 20, 3);
  const auto b = sample_z(fam, v, 20, 3);
  REQUIRE(a.size() == 20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].z == b[i].z);
    CHECK(fam.clearance(a[i], v) >= 0.1);
  }
}

TEST_CASE("compatibility tensor antisymmetry") {
  const auto fam = family_from(genus0(2));
  const std::vector<cplx> v{{0.3, 1.2}, {-0.8, -0.6}};
  const auto zs = sample_z(fam, v, 8, 5);
  const CMatrix t = compatibility_tensor(fam, 0, 1, 2, v, zs);
  const CMatrix s = compatibility_tensor(fam, 1, 0, 2, v, zs);
  const int m = 2;
  CHECK((t.topRows(m) + s.topRows(m)).norm() < 1e-12 * (1.0 + t.norm()));
  CHECK_THROWS_AS(compatibility_tensor(fam, 0, 0, 2, v, zs), NumericError);
}

TEST_CASE("potentials linear in z give D = 1") {
  const auto fam = linear_family();
  const std::vector<cplx> v{{0.3, 0.2}, {-0.4, 0.1}};
  const auto d = dimension_D(fam, 0, 1, 2, v, 20, 4);
  CHECK(d.D == 1);
  CHECK(d.stable);
}

TEST_CASE("genus-0 dimension lies in [m, 2m - 1] and is stable") {
  const auto fam = family_from(genus0(2));
  const std::vector<cplx> v{{0.3, 1.2}, {-0.8, -0.6}};
  const auto d = dimension_D(fam, 0, 1, 2, v, 40, 9);
  CHECK(d.stable);
  CHECK(d.D >= 2);
  CHECK(d.D <= 3);
  CHECK(d.D == d.D_doubled);
  CHECK_THROWS_AS(dimension_D(fam, 0, 1, 2, v, 5, 9), NumericError);
}

TEST_CASE("hydrodynamic coefficients recompose on held-out points") {
  const auto fam = family_from(genus0(2));
  const std::vector<cplx> v{{0.3, 1.2}, {-0.8, -0.6}};
  const HydroSystem hs = hydro_coefficients(fam, 0, 1, 2, v, 40, 9);
  CHECK(hs.a.rows() == hs.D);
  CHECK(hs.a.cols() == 2);
  CHECK(hs.expansion_residual < 1e-8);
  CHECK(hs.holdout_residual < 1e-8);
  CHECK(hs.stacked_rank == hs.D);
}

TEST_CASE("reconstruction of f and lambda") {
  for (const auto& e : {genus0(2), benney(2), genus1(2)}) {
    const auto fam = family_from(e);
    CAPTURE(fam.label);
    CHECK(reconstruct_f(fam, 0, 1, opts()).pass);
    CHECK(reconstruct_lambda(fam, 0, opts()).pass);
  }
}

TEST_CASE("integrability criterion") {
  const auto e = genus0(2);
  const auto fam = family_from(e);
  CHECK(integrability_criterion(fam, build_system(e.structure.base, 2), opts(20)).pass);
}

TEST_CASE("a wrong potential is caught") {
  const auto e = genus0(2);
  auto fam = family_from(e);
  Potential sq;
  sq.label = "p^2";
  sq.value = [](const Point& p, FieldVec) { return p.z * p.z; };
  fam.h.push_back(sq);
  CHECK_FALSE(reconstruct_f(fam, 0, 1, opts()).pass);
  CHECK_FALSE(integrability_criterion(fam, build_system(e.structure.base, 2), opts(20)).pass);
}
