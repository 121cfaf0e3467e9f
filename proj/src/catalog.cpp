#include "gtw/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gtw {

namespace {

using Vec = std::vector<cplx>;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFieldGap = 0.3;

const Box kPlane{-2.0, 2.0, -2.0, 2.0};

std::vector<std::string> names(const std::string& stem, int n, int first = 1) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(stem + std::to_string(first + i));
  return out;
}

// ---------------------------------------------------------------------------
// genus 0

cplx f0(cplx p1, cplx p2) { return p2 * (p2 - 1.0) / ((p1 - p2) * p1 * (p1 - 1.0)); }

/// log(p - e) with analytic jets; e is a field (index k) or a fixed point (k < 0).
Potential log_block(const std::string& label, int k, cplx fixed) {
  Potential h;
  h.label = label;
  h.difference = false;
  auto centre = [k, fixed](FieldVec v) { return k >= 0 ? v[static_cast<std::size_t>(k)] : fixed; };
  h.value = [centre](const Point& p, FieldVec v) { return std::log(p.z - centre(v)); };
  h.dp = [centre](const Point& p, FieldVec v) { return 1.0 / (p.z - centre(v)); };
  h.dv = [centre, k](const Point& p, FieldVec v, int j) -> cplx {
    return j == k ? -1.0 / (p.z - centre(v)) : cplx{0.0, 0.0};
  };
  return h;
}

Potential difference(const Potential& a, const Potential& b) {
  Potential h;
  h.label = a.label + "-" + b.label;
  h.difference = true;
  h.value = [a, b](const Point& p, FieldVec v) { return a.value(p, v) - b.value(p, v); };
  h.dp = [a, b](const Point& p, FieldVec v) { return a.dp(p, v) - b.dp(p, v); };
  h.dv = [a, b](const Point& p, FieldVec v, int k) { return a.dv(p, v, k) - b.dv(p, v, k); };
  return h;
}

Vec sample_punctures(Rng& rng, int n, const std::vector<cplx>& avoid) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    Vec u;
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      const cplx z = kPlane.draw(rng);
      for (cplx a : avoid) ok = ok && std::abs(z - a) >= kFieldGap;
      for (cplx w : u) ok = ok && std::abs(z - w) >= kFieldGap;
      u.push_back(z);
    }
    if (ok) return u;
  }
  throw NumericError(ErrorKind::exhaustion, "no admissible puncture configuration");
}

double plane_clearance(std::span<const Point> pts, FieldVec u, std::initializer_list<cplx> fixed) {
  double d = kInf;
  for (const auto& p : pts) {
    for (cplx a : fixed) d = std::min(d, std::abs(p.z - a));
    for (cplx w : u) d = std::min(d, std::abs(p.z - w));
  }
  // Field derivatives move the punctures too.
  for (std::size_t i = 0; i < u.size(); ++i) {
    for (cplx a : fixed) d = std::min(d, std::abs(u[i] - a));
    for (std::size_t j = i + 1; j < u.size(); ++j) d = std::min(d, std::abs(u[i] - u[j]));
  }
  return d;
}

// ---------------------------------------------------------------------------
// genus 1

double torus_clearance(std::span<const Point> pts, FieldVec v) {
  const cplx tau = v[0];
  if (!(tau.imag() > 0.0)) return 0.0;
  double d = 0.5 * tau.imag();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    d = std::min(d, lattice_distance(pts[i].z, tau));
    for (std::size_t j = 1; j < v.size(); ++j) d = std::min(d, lattice_distance(pts[i].z - v[j], tau));
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      d = std::min(d, lattice_distance(pts[i].z - pts[j].z, tau));
  }
  for (std::size_t i = 1; i < v.size(); ++i) {
    d = std::min(d, lattice_distance(v[i], tau));
    for (std::size_t j = i + 1; j < v.size(); ++j) d = std::min(d, lattice_distance(v[i] - v[j], tau));
  }
  return d;
}

cplx cell_point(Rng& rng, cplx tau) {
  const double x = rng.uniform(-0.5, 0.5), y = rng.uniform(-0.5, 0.5);
  return x * tau + y;
}

/// lnθ(p - u) - lnθ(u) with jets; value uses principal logs and only feeds
/// reporting, never a derivative.
Potential theta_block(int j) {
  Potential h;
  h.label = "h" + std::to_string(j);
  h.difference = false;
  const auto k = static_cast<std::size_t>(j);
  h.value = [k](const Point& p, FieldVec v) {
    return std::log(theta(p.z - v[k], v[0])) - std::log(theta(v[k], v[0]));
  };
  h.dp = [k](const Point& p, FieldVec v) { return rho(p.z - v[k], v[0]); };
  h.dv = [k](const Point& p, FieldVec v, int i) -> cplx {
    const cplx tau = v[0];
    if (i == 0) {
      const ThetaJet a = theta_jet(p.z - v[k], tau), b = theta_jet(v[k], tau);
      return a.dtau / a.value - b.dtau / b.value;
    }
    if (static_cast<std::size_t>(i) == k) return -rho(p.z - v[k], tau) - rho(v[k], tau);
    return {0.0, 0.0};
  };
  return h;
}

// ---------------------------------------------------------------------------
// genus 2

/// (p - e1) sqrt((p - e2)/(p - e1)): a square root of (p - e1)(p - e2) with
/// its cut on the segment [e1, e2].
cplx sqrt2(cplx p, cplx e1, cplx e2) { return (p - e1) * std::sqrt((p - e2) / (p - e1)); }

CurveModuli moduli_of(FieldVec v) { return {v[0], v[1], v[2]}; }

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string>& family_ids() {
  static const std::vector<std::string> ids{"genus0", "genus1", "genus2", "benney"};
  return ids;
}

const std::vector<std::string>& coordinate_change_ids() {
  static const std::vector<std::string> ids{"quad", "sin"};
  return ids;
}

CoordinateChange coordinate_change(const std::string& id) {
  if (id == "quad") return {"quad", [](cplx p, FieldVec v) { return p + 0.1 * p * p + 0.05 * v[0]; }};
  if (id == "sin") return {"sin", [](cplx p, FieldVec v) { return p + 0.1 * std::sin(p) + 0.05 * v[0] * p; }};
  throw NumericError(ErrorKind::invalid_argument, "unknown coordinate change '" + id + "'");
}

CatalogEntry make_structure(const StructureSpec& spec) {
  if (spec.family == "genus0") return genus0(spec.n);
  if (spec.family == "genus1") return genus1(spec.n);
  if (spec.family == "benney") return benney(spec.n);
  if (spec.family == "genus2") {
    CatalogEntry e;
    e.family = "genus2";
    e.structure.base = genus2();
    return e;
  }
  throw NumericError(ErrorKind::invalid_argument, "unknown structure family '" + spec.family + "'");
}

CatalogEntry genus0(int n) {
  if (n < 1) throw NumericError(ErrorKind::invalid_argument, "genus0 needs n >= 1");
  CatalogEntry e;
  e.family = "genus0";
  GTStructure& s = e.structure.base;
  s.label = "genus0(" + std::to_string(n) + ")";
  s.m = n;
  s.coords = names("u", n);
  s.g = [](const Point& p, FieldVec u, std::span<cplx> g) {
    for (std::size_t i = 0; i < u.size(); ++i) g[i] = f0(p.z, u[i]);
  };
  s.f = [](const Point& a, const Point& b, FieldVec) { return f0(a.z, b.z); };
  s.clearance = [](std::span<const Point> pts, FieldVec u) {
    return plane_clearance(pts, u, {0.0, 1.0});
  };
  s.sample_fields = [n](Rng& rng) { return sample_punctures(rng, n, {0.0, 1.0}); };
  s.sample_point = [](Rng& rng, FieldVec) { return Point{kPlane.draw(rng), 1}; };
  e.structure.lambda = [](const Point& a, const Point& b, FieldVec) { return 1.0 / (a.z - b.z); };

  for (int j = 0; j < n; ++j)
    e.building_blocks.push_back(log_block("h" + std::to_string(j + 1), j, 0.0));
  e.building_blocks.push_back(log_block("h" + std::to_string(n + 1), -1, 0.0));
  e.building_blocks.push_back(log_block("h" + std::to_string(n + 2), -1, 1.0));
  for (std::size_t j = 1; j < e.building_blocks.size(); ++j)
    e.potentials.push_back(difference(e.building_blocks[j], e.building_blocks[0]));
  return e;
}

CatalogEntry genus1(int n) {
  if (n < 1) throw NumericError(ErrorKind::invalid_argument, "genus1 needs n >= 1");
  CatalogEntry e;
  e.family = "genus1";
  GTStructure& s = e.structure.base;
  s.label = "genus1(" + std::to_string(n) + ")";
  s.m = n + 1;
  s.coords = names("u", n);
  s.coords.insert(s.coords.begin(), "tau");
  s.g = [](const Point& p, FieldVec v, std::span<cplx> g) {
    const cplx tau = v[0];
    const cplx rp = rho(p.z, tau);
    g[0] = kTwoPiI;
    for (std::size_t j = 1; j < v.size(); ++j) g[j] = rho(p.z - v[j], tau) - rp;
  };
  s.f = [](const Point& a, const Point& b, FieldVec v) {
    return rho(a.z - b.z, v[0]) - rho(a.z, v[0]);
  };
  s.clearance = torus_clearance;
  s.sample_fields = [n](Rng& rng) {
    for (int attempt = 0; attempt < 100000; ++attempt) {
      const cplx tau{rng.uniform(-0.5, 0.5), rng.uniform(0.5, 3.0)};
      Vec v{tau};
      bool ok = true;
      for (int j = 0; j < n; ++j) {
        const cplx u = cell_point(rng, tau);
        ok = ok && lattice_distance(u, tau) >= kFieldGap;
        for (std::size_t i = 1; i < v.size(); ++i) ok = ok && lattice_distance(u - v[i], tau) >= kFieldGap;
        v.push_back(u);
      }
      if (ok) return v;
    }
    throw NumericError(ErrorKind::exhaustion, "no admissible genus-1 configuration");
  };
  s.sample_point = [](Rng& rng, FieldVec v) { return Point{cell_point(rng, v[0]), 1}; };
  e.structure.lambda = [](const Point& a, const Point& b, FieldVec v) {
    return rho(a.z - b.z, v[0]) - rho(a.z, v[0]) - kTwoPiI;
  };

  Potential lin;
  lin.label = "p-tau";
  lin.value = [](const Point& p, FieldVec v) { return p.z - v[0]; };
  lin.dp = [](const Point&, FieldVec) { return cplx{1.0, 0.0}; };
  lin.dv = [](const Point&, FieldVec, int k) { return k == 0 ? cplx{-1.0, 0.0} : cplx{0.0, 0.0}; };
  e.potentials.push_back(lin);
  for (int j = 1; j <= n; ++j) e.building_blocks.push_back(theta_block(j));
  for (std::size_t j = 1; j < e.building_blocks.size(); ++j)
    e.potentials.push_back(difference(e.building_blocks[j], e.building_blocks[0]));
  return e;
}

CatalogEntry benney(int n) {
  if (n < 1) throw NumericError(ErrorKind::invalid_argument, "benney needs n >= 1");
  CatalogEntry e;
  e.family = "benney";
  GTStructure& s = e.structure.base;
  s.label = "benney(" + std::to_string(n) + ")";
  s.m = n;
  s.coords = names("u", n);
  s.g = [](const Point& p, FieldVec u, std::span<cplx> g) {
    for (std::size_t i = 0; i < u.size(); ++i) g[i] = 1.0 / (p.z - u[i]);
  };
  s.f = [](const Point& a, const Point& b, FieldVec) { return 1.0 / (a.z - b.z); };
  s.clearance = [](std::span<const Point> pts, FieldVec u) { return plane_clearance(pts, u, {}); };
  s.sample_fields = [n](Rng& rng) { return sample_punctures(rng, n, {}); };
  s.sample_point = [](Rng& rng, FieldVec) { return Point{kPlane.draw(rng), 1}; };
  e.structure.lambda = s.f;

  Potential lin;
  lin.label = "p";
  lin.value = [](const Point& p, FieldVec) { return p.z; };
  lin.dp = [](const Point&, FieldVec) { return cplx{1.0, 0.0}; };
  lin.dv = [](const Point&, FieldVec, int) { return cplx{0.0, 0.0}; };
  e.potentials.push_back(lin);
  for (int j = 0; j < n; ++j) {
    Potential h = log_block("h" + std::to_string(j + 1), j, 0.0);
    h.difference = true;
    e.potentials.push_back(h);
  }
  return e;
}

// ---------------------------------------------------------------------------

void CurveModuli::validate(double min_gap) const {
  const double sep = separation();
  if (!std::isfinite(sep) || !(sep > min_gap))
    throw NumericError(ErrorKind::invalid_modulus,
                       "branch points {0, 1, a, b, c} must be pairwise distinct (separation " +
                           std::to_string(sep) + ")");
}

double CurveModuli::separation() const {
  const cplx e[5] = {0.0, 1.0, a, b, c};
  double d = kInf;
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j) d = std::min(d, std::abs(e[i] - e[j]));
  return d;
}

cplx curve_q(cplx p, int sheet, const CurveModuli& m) {
  const cplx q = sqrt2(p, 0.0, 1.0) * sqrt2(p, m.a, m.b) * cplx{0.0, 1.0} * std::sqrt(m.c - p);
  return sheet >= 0 ? q : -q;
}

cplx curve_q_dp(cplx p, int sheet, const CurveModuli& m) {
  const cplx e[5] = {0.0, 1.0, m.a, m.b, m.c};
  cplx d{0.0, 0.0};
  for (int i = 0; i < 5; ++i) {
    cplx prod{1.0, 0.0};
    for (int j = 0; j < 5; ++j)
      if (j != i) prod *= p - e[j];
    d += prod;
  }
  return d / (2.0 * curve_q(p, sheet, m));
}

cplx curve_q_dmod(cplx p, int sheet, const CurveModuli& m, int k) {
  const cplx e[3] = {m.a, m.b, m.c};
  cplx prod = p * (p - 1.0);
  for (int j = 0; j < 3; ++j)
    if (j != k) prod *= p - e[j];
  return -prod / (2.0 * curve_q(p, sheet, m));
}

double curve_clearance(cplx p, const CurveModuli& m) {
  double d = std::min(distance_to_segment(p, 0.0, 1.0), distance_to_segment(p, m.a, m.b));
  // the ray from c to the right
  d = std::min(d, p.real() >= m.c.real() ? std::abs(p.imag() - m.c.imag()) : std::abs(p - m.c));
  return d;
}

CurveModuli sample_moduli(Rng& rng) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    auto jitter = [&] { return cplx{rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25)}; };
    CurveModuli m{1.7 + jitter(), 2.5 + jitter(), 3.3 + jitter()};
    if (m.separation() >= kFieldGap) return m;
  }
  throw NumericError(ErrorKind::exhaustion, "no admissible moduli");
}

namespace {

GTStructure genus2_impl(bool fixed_sampler, CurveModuli fixed) {
  GTStructure s;
  s.label = "genus2";
  s.m = 3;
  s.coords = {"a", "b", "c"};
  s.g = [](const Point& p, FieldVec v, std::span<cplx> g) {
    const cplx base = 2.0 * p.z * (p.z - 1.0);
    for (std::size_t k = 0; k < 3; ++k) g[k] = v[k] * (v[k] - 1.0) / (base * (p.z - v[k]));
  };
  s.f = [](const Point& P1, const Point& P2, FieldVec v) {
    const CurveModuli m = moduli_of(v);
    const cplx p1 = P1.z, p2 = P2.z;
    const cplx cubic = (p1 - m.a) * (p1 - m.b) * (p1 - m.c);
    const cplx num = cubic * p2 * (p2 - 1.0) + curve_q(p1, P1.sheet, m) * curve_q(p2, P2.sheet, m);
    return num / (2.0 * (p1 - p2) * p1 * (p1 - 1.0) * cubic);
  };
  s.clearance = [](std::span<const Point> pts, FieldVec v) {
    const CurveModuli m = moduli_of(v);
    double d = m.separation();
    for (const auto& p : pts) d = std::min(d, curve_clearance(p.z, m));
    return d;
  };
  if (fixed_sampler) {
    s.sample_fields = [fixed](Rng&) { return Vec{fixed.a, fixed.b, fixed.c}; };
  } else {
    s.sample_fields = [](Rng& rng) {
      const CurveModuli m = sample_moduli(rng);
      return Vec{m.a, m.b, m.c};
    };
  }
  s.sample_point = [](Rng& rng, FieldVec) {
    const cplx z{rng.uniform(-1.0, 4.5), rng.uniform(-1.5, 1.5)};
    return Point{z, rng.uniform() < 0.5 ? 1 : -1};
  };
  return s;
}

}  // namespace

GTStructure genus2() { return genus2_impl(false, {}); }

GTStructure genus2_from(const CurveModuli& fixed) {
  fixed.validate();
  GTStructure s = genus2_impl(true, fixed);
  s.label = "genus2(fixed)";
  return s;
}

Potential genus1_collided_potential(const std::vector<CollisionGroup>& groups, int group, int level) {
  auto dH = [](const Point& p, cplx w, FieldVec v) { return -rho(p.z - w, v[0]) - rho(w, v[0]); };
  auto clear = [](const Point& p, cplx w, FieldVec v) {
    return std::min(lattice_distance(p.z - w, v[0]), lattice_distance(w, v[0]));
  };
  return collided_potential("collided" + std::to_string(group + 1) + "_" + std::to_string(level), dH,
                            clear, groups, group, level);
}

Potential genus0_collided_potential(const std::vector<CollisionGroup>& groups, int group, int level) {
  auto dH = [](const Point& p, cplx w, FieldVec) { return -1.0 / (p.z - w); };
  auto clear = [](const Point& p, cplx w, FieldVec) { return std::abs(p.z - w); };
  return collided_potential("collided" + std::to_string(group + 1) + "_" + std::to_string(level), dH,
                            clear, groups, group, level);
}

}  // namespace gtw
