#include <doctest.h>

#include "gtw/catalog.hpp"
#include "gtw/gt_core.hpp"

using namespace gtw;

namespace {

VerifyOptions opts(int samples = 40, double tol = 1e-8) {
  VerifyOptions o;
  o.samples = samples;
  o.tol = tol;
  o.seed = 5;
  return o;
}

bool all_pass(const std::vector<VerificationReport>& rs) {
  for (const auto& r : rs)
    if (!r.pass) return false;
  return !rs.empty();
}

}  // namespace

TEST_CASE("builtin axioms hold") {
  for (const auto& e : {genus0(3), genus1(2), benney(3)}) {
    CAPTURE(e.structure.base.label);
    CHECK(all_pass(verify_axioms(e.structure.base, opts())));
    CHECK(verify_lambda(e.structure, opts()).pass);
  }
  CHECK(all_pass(verify_axioms(genus2(), opts(40, 1e-6))));
}

TEST_CASE("serial and parallel runs are bit-identical") {
  const auto e = genus0(3);
  auto ser = opts();
  ser.exec = Exec::serial;
  auto par = opts();
  par.exec = Exec::parallel;
  const auto a = verify_axioms(e.structure.base, ser);
  const auto b = verify_axioms(e.structure.base, par);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].max_residual == b[i].max_residual);
    CHECK(a[i].mean_residual == b[i].mean_residual);
  }
  const auto& h = e.potentials.back();
  CHECK(verify_potential(e.structure, h, ser).max_residual == verify_potential(e.structure, h, par).max_residual);
}

TEST_CASE("pole check reports the residue") {
  const auto r = verify_pole(benney(1).structure.base, opts());
  CHECK(r.pass);
  bool found = false;
  for (const auto& [k, v] : r.metrics) found = found || k.find("residue") != std::string::npos;
  CHECK(found);
}

TEST_CASE("faults are detected") {
  const auto s = genus0(2).structure.base;
  CHECK_FALSE(verify_pole(scale_f(s, 2.0), opts()).pass);
  const auto bent = perturb_f(s, [](const Point& a, const Point& b, FieldVec) { return 1e-2 * (a.z - b.z); });
  CHECK_FALSE(verify_bracket(bent, opts()).pass);
}

TEST_CASE("every claimed potential solves the potential equation") {
  for (const auto& e : {genus0(3), genus1(2), benney(3)}) {
    for (const auto& h : e.potentials) {
      CAPTURE(e.structure.base.label);
      CAPTURE(h.label);
      CHECK(verify_potential(e.structure, h, opts()).pass);
    }
  }
}

TEST_CASE("raw building blocks are not potentials") {
  const auto e = genus0(2);
  REQUIRE(!e.building_blocks.empty());
  CHECK_FALSE(e.building_blocks.front().difference);
}

TEST_CASE("genus-1 linear potential is exact") {
  const auto e = genus1(1);
  const auto& lin = e.potentials.front();
  CHECK(lin.label == "p-tau");
  CHECK(verify_potential(e.structure, lin, opts(100)).max_residual < 1e-13);
}

TEST_CASE("adding points preserves the axioms") {
  for (const auto& e : {genus0(1), genus1(1), benney(1)}) {
    const auto s = add_points(e.structure.base, 2);
    CHECK(s.m == e.structure.base.m + 2);
    CHECK(all_pass(verify_axioms(s, opts(30, 1e-6))));
  }
}

TEST_CASE("pushforward along the sample coordinate changes") {
  for (const auto& id : coordinate_change_ids()) {
    const auto mu = coordinate_change(id);
    const auto e = genus0(2);
    CAPTURE(id);
    CHECK(all_pass(verify_axioms(pushforward(e.structure.base, mu), opts(30, 1e-6))));
    const auto pe = pushforward_lambda(e.structure, mu);
    CHECK(verify_lambda(pe, opts(30, 1e-6)).pass);
    for (const auto& h : e.potentials) CHECK(verify_potential(pe, pushforward_potential(h, mu), opts(30, 1e-6)).pass);
  }
  CHECK_THROWS_AS(coordinate_change("nope"), NumericError);
}

TEST_CASE("faa di bruno weights") {
  const auto t = faa_di_bruno_terms(3);
  double total = 0.0;
  for (const auto& [mult, w] : t) total += w;
  CHECK(t.size() == 3);
  CHECK(total == doctest::Approx(5.0));  // the Bell number counts set partitions
  CHECK(faa_di_bruno_terms(4).size() == 5);
}

TEST_CASE("collision: closed form and limit agree") {
  const auto ladder = default_ladder();
  REQUIRE(ladder.size() == 6);
  CHECK(ladder.front() == doctest::Approx(0.05));
  const auto s = genus0(3).structure.base;
  for (int depth : {1, 2}) {
    const std::vector<CollisionGroup> groups{{0, depth}};
    const auto lim = collide_points_limit(s, groups, ladder);
    const auto cls = collide_points_closed(s, groups);
    CHECK(all_pass(verify_axioms(lim, opts(30, 1e-6))));
    CHECK(structure_distance(lim, cls, opts(20)) < 1e-5);
  }
}

TEST_CASE("collision arguments are validated") {
  const auto s = genus0(2).structure.base;
  CHECK_THROWS_AS(collide_points_limit(s, {{1, 1}}, default_ladder()), NumericError);
  CHECK_THROWS_AS(collide_points_limit(s, {{0, 1}}, {0.01, 0.02}), NumericError);
  CHECK_THROWS_AS(collide_points_closed(s, {{0, 2}}), NumericError);
}

TEST_CASE("collision substitution at eps = 0 repeats the base point") {
  const std::vector<cplx> u{{0.3, 0.1}, {0.2, 0.0}, {2.0, 1.0}};
  const auto v = collision_substitute(u, {{0, 1}}, 0.0);
  CHECK(v[0] == u[0]);
  CHECK(v[1] == u[0]);
  CHECK(v[2] == u[2]);
  const auto w = collision_substitute(u, {{0, 1}}, 0.1);
  CHECK(std::abs(w[1] - (u[0] + 0.1 * u[1])) < 1e-15);
}

TEST_CASE("collided potentials") {
  const std::vector<CollisionGroup> groups{{1, 1}};
  const auto e = genus1(2);
  const auto col = collide_points_limit(e.structure, groups, default_ladder());
  for (int level : {1}) CHECK(verify_potential(col, genus1_collided_potential(groups, 0, level), opts(30, 1e-6)).pass);
  const auto g0 = genus0(3);
  const std::vector<CollisionGroup> g0groups{{0, 2}};
  const auto c0 = collide_points_limit(g0.structure, g0groups, default_ladder());
  for (int level : {1, 2}) CHECK(verify_potential(c0, genus0_collided_potential(g0groups, 0, level), opts(30, 1e-6)).pass);
}

TEST_CASE("contour potentials") {
  const auto g0 = genus0(2);
  const auto h = potential_from_contour(g0.structure, [](FieldVec v) { return PathSpec::circle(v[0], 0.1, 8, 16); });
  CHECK(verify_potential(g0.structure, h, opts(30, 1e-8)).pass);
  // a circle enclosing every pole picks up 2 pi i
  const auto big = potential_from_contour(g0.structure, [](FieldVec) { return PathSpec::circle(0.0, 5.0, 16, 16); });
  const std::vector<cplx> v{{1.5, 1.0}, {-1.0, 0.5}};
  CHECK(std::abs(big.value(Point{{0.3, 0.2}}, v) - kTwoPiI) < 1e-10);
  CHECK_THROWS_AS(potential_from_contour(g0.structure,
                                         [](FieldVec) { return PathSpec::polyline({cplx{2.5, 2.5}, cplx{3.0, 3.0}}); }),
                  NumericError);
}

TEST_CASE("algebroid table matches direct brackets") {
  const auto e = genus0(3);
  Rng rng(3);
  const auto v = e.structure.base.sample_fields(rng);
  Point z = e.structure.base.sample_point(rng, v);
  while (e.structure.base.clearance(std::span<const Point>(&z, 1), v) < 0.3) z = e.structure.base.sample_point(rng, v);
  const auto t = algebroid_constants(e.structure.base, z, v, 3);
  CHECK(t.table_defect < 1e-10);
  CHECK(t.max_bracket_index() == 4);
  const auto table = algebroid_bracket_table(t.f_coeffs, 3);
  CHECK(table.size() == t.bracket.size());
}

TEST_CASE("structure distance") {
  const auto s = benney(2).structure.base;
  CHECK(structure_distance(s, s, opts(10)) == 0.0);
  CHECK(structure_distance(s, scale_f(s, 1.5), opts(10)) > 1e-3);
}
