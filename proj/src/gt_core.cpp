#include "gtw/gt_core.hpp"

#include "fan_out.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <numeric>

namespace gtw {

using detail::fan_out;
using Vec = std::vector<cplx>;

std::vector<cplx> GTStructure::g_at(const Point& p, FieldVec v) const {
  Vec out(static_cast<std::size_t>(m));
  if (m > 0) g(p, v, out);
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double scaled(cplx lhs, cplx rhs, std::initializer_list<cplx> terms) {
  double big = 1.0;
  for (cplx t : terms) big = std::max(big, std::abs(t));
  return std::abs(lhs - rhs) / big;
}

/// Derivative of a vector-valued holomorphic function by the trapezoid rule.
template <class Fn>
Vec cauchy_vec(Fn&& fn, cplx center, int order, double radius, int nodes, std::size_t dim) {
  Vec acc(dim, cplx{0.0, 0.0});
  for (int j = 0; j < nodes; ++j) {
    const double theta = 2.0 * kPi * j / nodes;
    const Vec val = fn(center + std::polar(radius, theta));
    const cplx w = std::polar(1.0, -order * theta);
    for (std::size_t i = 0; i < dim; ++i) acc[i] += val[i] * w;
  }
  double fact = 1.0;
  for (int i = 2; i <= order; ++i) fact *= i;
  const double norm = fact / (nodes * std::pow(radius, order));
  for (auto& a : acc) a *= norm;
  return acc;
}

Vec with_field(FieldVec v, int k, cplx w) {
  Vec out(v.begin(), v.end());
  out[static_cast<std::size_t>(k)] = w;
  return out;
}

VerificationReport make_report(std::string identity, const std::string& structure,
                               const VerifyOptions& opt, const std::vector<double>& res) {
  VerificationReport r;
  r.identity = std::move(identity);
  r.structure = structure;
  r.samples = static_cast<int>(res.size());
  r.tol = opt.tol;
  r.seed = opt.seed;
  r.nodes = opt.nodes;
  r.min_separation = opt.min_separation;
  double sum = 0.0;
  bool finite = true;
  for (double x : res) {
    if (!std::isfinite(x)) finite = false;
    r.max_residual = std::max(r.max_residual, x);
    sum += x;
  }
  if (!finite) r.max_residual = kInf;
  r.mean_residual = res.empty() ? 0.0 : sum / static_cast<double>(res.size());
  r.pass = finite && r.max_residual < opt.tol;
  return r;
}

cplx d_slot1(const TwoPointFn& f, const Point& a, const Point& b, FieldVec v, const DiffContext& dc) {
  return dc.dz([&](cplx z) { return f(Point{z, a.sheet}, b, v); }, a.z);
}

cplx d_slot2(const TwoPointFn& f, const Point& a, const Point& b, FieldVec v, const DiffContext& dc) {
  return dc.dz([&](cplx z) { return f(a, Point{z, b.sheet}, v); }, b.z);
}

/// J[j][i] = d g_i(p) / d v_j.
std::vector<Vec> g_jacobian(const GTStructure& s, const Point& p, FieldVec v, const DiffContext& dc) {
  std::vector<Vec> jac;
  jac.reserve(static_cast<std::size_t>(s.m));
  for (int j = 0; j < s.m; ++j) {
    jac.push_back(cauchy_vec(
        [&](cplx w) {
          const Vec vv = with_field(v, j, w);
          return s.g_at(p, vv);
        },
        v[static_cast<std::size_t>(j)], 1, dc.radius, dc.nodes, static_cast<std::size_t>(s.m)));
  }
  return jac;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<StructureSample> draw_samples(const GTStructure& s, int npoints, int count,
                                          const VerifyOptions& opt,
                                          const std::function<double(const StructureSample&)>&
                                              extra_clearance) {
  if (count < 0 || npoints < 0) throw NumericError(ErrorKind::invalid_argument, "negative sample count");
  if (!(opt.radius_fraction > 0.0 && opt.radius_fraction < 1.0))
    throw NumericError(ErrorKind::invalid_argument, "radius_fraction must lie in (0, 1)");
  Rng rng(opt.seed);
  std::vector<StructureSample> out;
  out.reserve(static_cast<std::size_t>(count));
  int draws = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++draws > opt.max_draws)
      throw NumericError(ErrorKind::exhaustion, "sampling for " + s.label + " exhausted after " +
                                                    std::to_string(opt.max_draws) + " draws");
    StructureSample smp;
    smp.fields = s.sample_fields(rng);
    for (int i = 0; i < npoints; ++i) smp.points.push_back(s.sample_point(rng, smp.fields));
    double d = kInf;
    for (std::size_t i = 0; i < smp.points.size(); ++i)
      for (std::size_t j = i + 1; j < smp.points.size(); ++j)
        d = std::min(d, std::abs(smp.points[i].z - smp.points[j].z));
    d = std::min(d, s.clearance(smp.points, smp.fields));
    if (extra_clearance) d = std::min(d, extra_clearance(smp));
    if (!(d >= opt.min_separation)) continue;
    smp.radius = opt.radius_fraction * std::min(d, 1.0);
    out.push_back(std::move(smp));
  }
  return out;
}

cplx potential_dp(const Potential& h, const Point& p, FieldVec v, const DiffContext& dc) {
  if (h.dp) return h.dp(p, v);
  return dc.dz([&](cplx z) { return h.value(Point{z, p.sheet}, v); }, p.z);
}

cplx potential_dv(const Potential& h, const Point& p, FieldVec v, int k, const DiffContext& dc) {
  if (h.dv) return h.dv(p, v, k);
  return field_partial([&](FieldVec vv) { return h.value(p, vv); }, v, k, dc);
}

cplx field_partial(const std::function<cplx(FieldVec)>& fn, FieldVec v, int k,
                   const DiffContext& dc) {
  return dc.dz(
      [&](cplx w) {
        const Vec vv = with_field(v, k, w);
        return fn(vv);
      },
      v[static_cast<std::size_t>(k)]);
}

cplx apply_g(const GTStructure& s, const Point& p, FieldVec v,
             const std::function<cplx(FieldVec)>& x, const DiffContext& dc) {
  const Vec gp = s.g_at(p, v);
  cplx acc{0.0, 0.0};
  for (int j = 0; j < s.m; ++j) acc += gp[static_cast<std::size_t>(j)] * field_partial(x, v, j, dc);
  return acc;
}

// ---------------------------------------------------------------------------
// Verification

VerificationReport verify_pole(const GTStructure& s, const VerifyOptions& opt) {
  const auto samples = draw_samples(s, 1, opt.samples, opt);
  std::vector<double> residue(samples.size());
  auto res = fan_out(opt.samples, opt.exec, [&](int i) {
    const auto& smp = samples[static_cast<std::size_t>(i)];
    const Point p2 = smp.points[0];
    auto fn = [&](cplx z) { return s.f(Point{z, p2.sheet}, p2, smp.fields); };
    const cplx c1 = laurent_coeff(fn, p2.z, -1, smp.radius, opt.nodes);
    const cplx c2 = laurent_coeff(fn, p2.z, -2, smp.radius, opt.nodes);
    const cplx c3 = laurent_coeff(fn, p2.z, -3, smp.radius, opt.nodes);
    residue[static_cast<std::size_t>(i)] = std::real(c1);
    return std::max({std::abs(c1 - 1.0), std::abs(c2), std::abs(c3)});
  });
  auto r = make_report("pole", s.label, opt, res);
  double mean = 0.0;
  for (double x : residue) mean += x;
  r.metrics.emplace_back("mean_residue", residue.empty() ? 0.0 : mean / residue.size());
  return r;
}

VerificationReport verify_bracket(const GTStructure& s, const VerifyOptions& opt) {
  const auto samples = draw_samples(s, 2, opt.samples, opt);
  auto res = fan_out(opt.samples, opt.exec, [&](int idx) {
    const auto& smp = samples[static_cast<std::size_t>(idx)];
    const DiffContext dc{smp.radius, opt.nodes};
    const Point p1 = smp.points[0], p2 = smp.points[1];
    const FieldVec v = smp.fields;
    const auto m = static_cast<std::size_t>(s.m);
    if (m == 0) return 0.0;
    const Vec g1 = s.g_at(p1, v), g2 = s.g_at(p2, v);
    const auto j1 = g_jacobian(s, p1, v, dc), j2 = g_jacobian(s, p2, v, dc);
    auto gp = [&](const Point& p) {
      return cauchy_vec([&](cplx z) { return s.g_at(Point{z, p.sheet}, v); }, p.z, 1, dc.radius,
                        dc.nodes, m);
    };
    const Vec dg1 = gp(p1), dg2 = gp(p2);
    const cplx f12 = s.f(p1, p2, v), f21 = s.f(p2, p1, v);
    const cplx f12_2 = d_slot2(s.f, p1, p2, v, dc), f21_2 = d_slot2(s.f, p2, p1, v, dc);
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      cplx lhs{0.0, 0.0};
      double big = 1.0;
      for (std::size_t j = 0; j < m; ++j) {
        const cplx a = g1[j] * j2[j][i], b = g2[j] * j1[j][i];
        lhs += a - b;
        big = std::max({big, std::abs(a), std::abs(b)});
      }
      const cplx t1 = f21 * dg1[i], t2 = f12 * dg2[i], t3 = 2.0 * f21_2 * g1[i],
                 t4 = 2.0 * f12_2 * g2[i];
      const cplx rhs = t1 - t2 + t3 - t4;
      big = std::max({big, std::abs(t1), std::abs(t2), std::abs(t3), std::abs(t4)});
      worst = std::max(worst, std::abs(lhs - rhs) / big);
    }
    return worst;
  });
  return make_report("bracket", s.label, opt, res);
}

VerificationReport verify_cocycle(const GTStructure& s, const VerifyOptions& opt) {
  const auto samples = draw_samples(s, 3, opt.samples, opt);
  auto res = fan_out(opt.samples, opt.exec, [&](int idx) {
    const auto& smp = samples[static_cast<std::size_t>(idx)];
    const DiffContext dc{smp.radius, opt.nodes};
    const Point p1 = smp.points[0], p2 = smp.points[1], p3 = smp.points[2];
    const FieldVec v = smp.fields;
    const cplx a = apply_g(s, p2, v, [&](FieldVec vv) { return s.f(p1, p3, vv); }, dc);
    const cplx b = apply_g(s, p1, v, [&](FieldVec vv) { return s.f(p2, p3, vv); }, dc);
    const cplx f12 = s.f(p1, p2, v), f21 = s.f(p2, p1, v), f13 = s.f(p1, p3, v),
               f23 = s.f(p2, p3, v);
    const cplx t1 = f12 * d_slot1(s.f, p2, p3, v, dc);
    const cplx t2 = f21 * d_slot1(s.f, p1, p3, v, dc);
    const cplx t3 = f13 * d_slot2(s.f, p2, p3, v, dc);
    const cplx t4 = f23 * d_slot2(s.f, p1, p3, v, dc);
    const cplx t5 = 2.0 * f23 * d_slot2(s.f, p1, p2, v, dc);
    const cplx t6 = 2.0 * f13 * d_slot2(s.f, p2, p1, v, dc);
    return scaled(a - b, t1 - t2 + t3 - t4 + t5 - t6, {a, b, t1, t2, t3, t4, t5, t6});
  });
  return make_report("cocycle", s.label, opt, res);
}

VerificationReport verify_lambda(const EnhancedGT& e, const VerifyOptions& opt) {
  const GTStructure& s = e.base;
  const auto samples = draw_samples(s, 3, opt.samples, opt);
  auto res = fan_out(opt.samples, opt.exec, [&](int idx) {
    const auto& smp = samples[static_cast<std::size_t>(idx)];
    const DiffContext dc{smp.radius, opt.nodes};
    const Point p1 = smp.points[0], p2 = smp.points[1], p3 = smp.points[2];
    const FieldVec v = smp.fields;
    const cplx lhs = apply_g(s, p1, v, [&](FieldVec vv) { return e.lambda(p2, p3, vv); }, dc);
    const cplx t1 = e.lambda(p1, p3, v) * d_slot2(e.lambda, p2, p1, v, dc);
    const cplx t2 = e.lambda(p2, p3, v) * d_slot2(s.f, p1, p2, v, dc);
    const cplx t3 = s.f(p1, p2, v) * d_slot1(e.lambda, p2, p3, v, dc);
    const cplx t4 = s.f(p1, p3, v) * d_slot2(e.lambda, p2, p3, v, dc);
    double r = scaled(lhs, t1 - t2 - t3 - t4, {lhs, t1, t2, t3, t4});
    auto fn = [&](cplx z) { return e.lambda(Point{z, p2.sheet}, p2, v); };
    const cplx c1 = laurent_coeff(fn, p2.z, -1, smp.radius, opt.nodes);
    const cplx c2 = laurent_coeff(fn, p2.z, -2, smp.radius, opt.nodes);
    return std::max({r, std::abs(c1 - 1.0), std::abs(c2)});
  });
  return make_report("lambda", s.label, opt, res);
}

VerificationReport verify_potential(const EnhancedGT& e, const Potential& h,
                                    const VerifyOptions& opt) {
  const GTStructure& s = e.base;
  std::function<double(const StructureSample&)> extra;
  if (h.clearance) {
    extra = [&](const StructureSample& smp) {
      double d = kInf;
      for (const auto& p : smp.points) d = std::min(d, h.clearance(p, smp.fields));
      return d;
    };
  }
  const auto samples = draw_samples(s, 2, opt.samples, opt, extra);
  auto res = fan_out(opt.samples, opt.exec, [&](int idx) {
    const auto& smp = samples[static_cast<std::size_t>(idx)];
    const DiffContext dc{smp.radius, opt.nodes};
    const Point p1 = smp.points[0], p2 = smp.points[1];
    const FieldVec v = smp.fields;
    const Vec g1 = s.g_at(p1, v);
    cplx lhs{0.0, 0.0};
    double big = 1.0;
    for (int j = 0; j < s.m; ++j) {
      const cplx t = g1[static_cast<std::size_t>(j)] * potential_dv(h, p2, v, j, dc);
      lhs += t;
      big = std::max(big, std::abs(t));
    }
    const cplx t1 = e.lambda(p1, p2, v) * potential_dp(h, p1, v, dc);
    const cplx t2 = s.f(p1, p2, v) * potential_dp(h, p2, v, dc);
    big = std::max({big, std::abs(t1), std::abs(t2)});
    return std::abs(lhs - (t1 - t2)) / big;
  });
  auto r = make_report("potential", s.label, opt, res);
  r.identity = "potential:" + h.label;
  return r;
}

std::vector<VerificationReport> verify_axioms(const GTStructure& s, const VerifyOptions& opt) {
  return {verify_pole(s, opt), verify_bracket(s, opt), verify_cocycle(s, opt)};
}

// ---------------------------------------------------------------------------
// Adding points

GTStructure add_points(const GTStructure& s, int n) {
  if (n < 1) throw NumericError(ErrorKind::invalid_argument, "add_points needs n >= 1");
  GTStructure out;
  const int m0 = s.m;
  out.label = s.label + "+" + std::to_string(n);
  out.m = m0 + n;
  out.coords = s.coords;
  for (int j = 0; j < n; ++j) out.coords.push_back("w" + std::to_string(m0 + j + 1));
  auto base = std::make_shared<const GTStructure>(s);
  out.g = [base, m0, n](const Point& p, FieldVec v, std::span<cplx> g) {
    const FieldVec vb = v.subspan(0, static_cast<std::size_t>(m0));
    if (m0 > 0) base->g(p, vb, g.subspan(0, static_cast<std::size_t>(m0)));
    for (int j = 0; j < n; ++j)
      g[static_cast<std::size_t>(m0 + j)] =
          base->f(p, Point{v[static_cast<std::size_t>(m0 + j)], 1}, vb);
  };
  out.f = [base, m0](const Point& a, const Point& b, FieldVec v) {
    return base->f(a, b, v.subspan(0, static_cast<std::size_t>(m0)));
  };
  out.clearance = [base, m0, n](std::span<const Point> pts, FieldVec v) {
    std::vector<Point> all(pts.begin(), pts.end());
    for (int j = 0; j < n; ++j) all.push_back(Point{v[static_cast<std::size_t>(m0 + j)], 1});
    double d = base->clearance(all, v.subspan(0, static_cast<std::size_t>(m0)));
    for (const auto& p : pts)
      for (int j = 0; j < n; ++j) d = std::min(d, std::abs(p.z - v[static_cast<std::size_t>(m0 + j)]));
    return d;
  };
  out.sample_fields = [base, n](Rng& rng) {
    constexpr double kSep = 0.3;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      Vec v = base->sample_fields(rng);
      std::vector<Point> extra;
      for (int j = 0; j < n; ++j) extra.push_back(base->sample_point(rng, v));
      double d = base->clearance(extra, v);
      for (std::size_t i = 0; i < extra.size(); ++i)
        for (std::size_t j = i + 1; j < extra.size(); ++j)
          d = std::min(d, std::abs(extra[i].z - extra[j].z));
      if (d < kSep) continue;
      for (const auto& p : extra) v.push_back(p.z);
      return v;
    }
    throw NumericError(ErrorKind::exhaustion, "no admissible puncture positions");
  };
  out.sample_point = [base, m0](Rng& rng, FieldVec v) {
    return base->sample_point(rng, v.subspan(0, static_cast<std::size_t>(m0)));
  };
  return out;
}

// ---------------------------------------------------------------------------
// Colliding points

namespace {

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

void check_groups(const GTStructure& s, const std::vector<CollisionGroup>& groups) {
  std::vector<bool> used(static_cast<std::size_t>(s.m), false);
  for (const auto& g : groups) {
    if (g.depth < 0 || g.base_index < 0 || g.base_index + g.depth >= s.m)
      throw NumericError(ErrorKind::invalid_argument, "collision group outside the fiber coordinates");
    for (int k = g.base_index; k <= g.base_index + g.depth; ++k) {
      if (used[static_cast<std::size_t>(k)])
        throw NumericError(ErrorKind::invalid_argument, "collision groups overlap");
      used[static_cast<std::size_t>(k)] = true;
    }
  }
}

/// Neville extrapolation to x = 0; also returns the gap between the last two
/// diagonal entries.
std::pair<cplx, double> neville_zero(const std::vector<double>& x, std::vector<cplx> y) {
  const std::size_t n = y.size();
  cplx prev = y[n - 1];
  for (std::size_t k = 1; k < n; ++k) {
    for (std::size_t i = 0; i + k < n; ++i) {
      // P_{i..i+k}(0) from P_{i..i+k-1} and P_{i+1..i+k}
      y[i] = (x[i + k] * y[i] - x[i] * y[i + 1]) / (x[i + k] - x[i]);
    }
    if (k == n - 2) prev = y[0];
  }
  return {y[0], std::abs(y[0] - prev)};
}

std::vector<std::string> collided_coords(const GTStructure& s,
                                         const std::vector<CollisionGroup>& groups) {
  auto c = s.coords;
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    for (int l = 0; l <= groups[gi].depth; ++l)
      c[static_cast<std::size_t>(groups[gi].base_index + l)] =
          "u" + std::to_string(gi + 1) + "_" + std::to_string(l);
  return c;
}

// Base fields with each collided group reduced to its single puncture u_{j,0}.
Vec collapsed_fields(FieldVec u, const std::vector<CollisionGroup>& groups) {
  std::vector<bool> drop(u.size(), false);
  for (const auto& g : groups)
    for (int l = 1; l <= g.depth; ++l) drop[static_cast<std::size_t>(g.base_index + l)] = true;
  Vec v;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (!drop[i]) v.push_back(u[i]);
  return v;
}

FieldSamplerFn collided_sampler(std::shared_ptr<const GTStructure> base,
                                std::vector<CollisionGroup> groups) {
  return [base, groups](Rng& rng) {
    Vec v = base->sample_fields(rng);
    for (const auto& g : groups)
      for (int l = 1; l <= g.depth; ++l)
        v[static_cast<std::size_t>(g.base_index + l)] = Box{-0.3, 0.3, -0.3, 0.3}.draw(rng);
    return v;
  };
}

}  // namespace

std::vector<cplx> collision_substitute(FieldVec u, const std::vector<CollisionGroup>& groups,
                                       double eps) {
  Vec v(u.begin(), u.end());
  for (const auto& g : groups) {
    for (int s = 0; s <= g.depth; ++s) {
      cplx acc{0.0, 0.0};
      double ek = 1.0;
      for (int k = 0; k <= s; ++k) {
        acc += binom(s, k) * ek * u[static_cast<std::size_t>(g.base_index + k)];
        ek *= eps;
      }
      v[static_cast<std::size_t>(g.base_index + s)] = acc;
    }
  }
  return v;
}

std::vector<double> default_ladder() {
  std::vector<double> l;
  for (int k = 0; k <= 5; ++k) l.push_back(0.05 * std::ldexp(1.0, -k));
  return l;
}

std::vector<std::pair<std::vector<int>, double>> faa_di_bruno_terms(int l) {
  std::vector<std::pair<std::vector<int>, double>> out;
  if (l < 1) return out;
  std::vector<int> mult(static_cast<std::size_t>(l + 1), 0);
  auto fact = [](int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
  };
  // Enumerate multiplicities from the largest part down.
  std::function<void(int, int)> rec = [&](int part, int rest) {
    if (rest == 0) {
      double w = fact(l);
      for (int k = 1; k <= l; ++k)
        w /= fact(mult[static_cast<std::size_t>(k)]) *
             std::pow(fact(k), mult[static_cast<std::size_t>(k)]);
      out.emplace_back(mult, w);
      return;
    }
    if (part == 0) return;
    for (int c = rest / part; c >= 0; --c) {
      mult[static_cast<std::size_t>(part)] = c;
      rec(part - 1, rest - c * part);
    }
    mult[static_cast<std::size_t>(part)] = 0;
  };
  rec(l, l);
  return out;
}

GTStructure collide_points_limit(const GTStructure& s, const std::vector<CollisionGroup>& groups,
                                 const std::vector<double>& ladder, double tol) {
  check_groups(s, groups);
  if (ladder.size() < 2) throw NumericError(ErrorKind::invalid_argument, "ladder needs >= 2 steps");
  for (std::size_t i = 0; i < ladder.size(); ++i)
    if (!(ladder[i] > 0.0) || (i > 0 && !(ladder[i] < ladder[i - 1])))
      throw NumericError(ErrorKind::invalid_argument, "ladder must be positive and strictly decreasing");
  auto base = std::make_shared<const GTStructure>(s);
  GTStructure out;
  out.label = s.label + "/collided";
  out.m = s.m;
  out.coords = collided_coords(s, groups);
  out.g = [base, groups, ladder, tol](const Point& p, FieldVec u, std::span<cplx> g) {
    const auto m = static_cast<std::size_t>(base->m);
    std::vector<Vec> at_eps;  // at_eps[step][component]
    for (double eps : ladder) {
      const Vec v = collision_substitute(u, groups, eps);
      Vec gb = base->g_at(p, v);
      Vec gu = gb;
      for (const auto& grp : groups) {
        for (int l = 1; l <= grp.depth; ++l) {
          cplx acc{0.0, 0.0};
          for (int s2 = 0; s2 <= l; ++s2)
            acc += ((l - s2) % 2 ? -1.0 : 1.0) * binom(l, s2) *
                   gb[static_cast<std::size_t>(grp.base_index + s2)];
          gu[static_cast<std::size_t>(grp.base_index + l)] = acc / std::pow(eps, l);
        }
      }
      at_eps.push_back(std::move(gu));
    }
    for (std::size_t i = 0; i < m; ++i) {
      Vec y;
      for (const auto& row : at_eps) y.push_back(row[i]);
      auto [val, gap] = neville_zero(ladder, y);
      if (gap > tol * std::max(1.0, std::abs(val)))
        throw NumericError(ErrorKind::non_convergence,
                           "collision extrapolation gap " + std::to_string(gap));
      g[i] = val;
    }
  };
  out.f = [base, groups](const Point& a, const Point& b, FieldVec u) {
    const Vec v = collision_substitute(u, groups, 0.0);
    return base->f(a, b, v);
  };
  out.clearance = [base, groups](std::span<const Point> pts, FieldVec u) {
    return base->clearance(pts, collapsed_fields(u, groups));
  };
  out.sample_fields = collided_sampler(base, groups);
  out.sample_point = [base, groups](Rng& rng, FieldVec u) {
    const Vec v = collision_substitute(u, groups, 0.0);
    return base->sample_point(rng, v);
  };
  return out;
}

EnhancedGT collide_points_limit(const EnhancedGT& e, const std::vector<CollisionGroup>& groups,
                                const std::vector<double>& ladder, double tol) {
  EnhancedGT out;
  out.base = collide_points_limit(e.base, groups, ladder, tol);
  auto lam = e.lambda;
  out.lambda = [lam, groups](const Point& a, const Point& b, FieldVec u) {
    const Vec v = collision_substitute(u, groups, 0.0);
    return lam(a, b, v);
  };
  return out;
}

GTStructure collide_points_closed(const GTStructure& s, const std::vector<CollisionGroup>& groups,
                                  int nodes) {
  check_groups(s, groups);
  auto base = std::make_shared<const GTStructure>(s);
  GTStructure out;
  out.label = s.label + "/collided-closed";
  out.m = s.m;
  out.coords = collided_coords(s, groups);
  out.clearance = [base, groups](std::span<const Point> pts, FieldVec u) {
    return base->clearance(pts, collapsed_fields(u, groups));
  };
  auto clear = out.clearance;
  out.g = [base, groups, nodes, clear](const Point& p, FieldVec u, std::span<cplx> g) {
    const Vec v = collision_substitute(u, groups, 0.0);
    const Vec gb = base->g_at(p, v);
    std::copy(gb.begin(), gb.end(), g.begin());
    const Point pts[1] = {p};
    const double radius = 0.25 * std::min(1.0, clear(pts, u));
    for (const auto& grp : groups) {
      if (grp.depth == 0) continue;
      const cplx u0 = u[static_cast<std::size_t>(grp.base_index)];
      // (d/dw)^r f(p, w) at w = u0, r = 1..depth
      Vec df(static_cast<std::size_t>(grp.depth + 1));
      for (int r = 1; r <= grp.depth; ++r)
        df[static_cast<std::size_t>(r)] = cauchy_derivative(
            [&](cplx w) { return base->f(p, Point{w, 1}, v); }, u0, r, radius, nodes);
      for (int l = 1; l <= grp.depth; ++l) {
        cplx acc{0.0, 0.0};
        for (const auto& [mult, w] : faa_di_bruno_terms(l)) {
          int order = 0;
          cplx prod{1.0, 0.0};
          for (int k = 1; k <= l; ++k) {
            const int ik = mult[static_cast<std::size_t>(k)];
            order += ik;
            for (int t = 0; t < ik; ++t) prod *= u[static_cast<std::size_t>(grp.base_index + k)];
          }
          acc += w * df[static_cast<std::size_t>(order)] * prod;
        }
        g[static_cast<std::size_t>(grp.base_index + l)] = acc;
      }
    }
  };
  out.f = [base, groups](const Point& a, const Point& b, FieldVec u) {
    const Vec v = collision_substitute(u, groups, 0.0);
    return base->f(a, b, v);
  };
  out.sample_fields = collided_sampler(base, groups);
  out.sample_point = [base, groups](Rng& rng, FieldVec u) {
    const Vec v = collision_substitute(u, groups, 0.0);
    return base->sample_point(rng, v);
  };
  return out;
}

Potential collided_potential(std::string label,
                             std::function<cplx(const Point&, cplx, FieldVec)> dH,
                             std::function<double(const Point&, cplx, FieldVec)> w_clearance,
                             const std::vector<CollisionGroup>& groups, int group, int level,
                             int nodes) {
  if (group < 0 || group >= static_cast<int>(groups.size()))
    throw NumericError(ErrorKind::invalid_argument, "no such collision group");
  const CollisionGroup grp = groups[static_cast<std::size_t>(group)];
  if (level < 1 || level > grp.depth)
    throw NumericError(ErrorKind::invalid_argument, "collided potential level out of range");
  const auto terms = faa_di_bruno_terms(level);
  Potential h;
  h.label = std::move(label);
  h.value = [=](const Point& p, FieldVec u) {
    const Vec v = collision_substitute(u, groups, 0.0);
    const cplx u0 = u[static_cast<std::size_t>(grp.base_index)];
    const double radius = 0.25 * std::min(1.0, w_clearance(p, u0, v));
    Vec d(static_cast<std::size_t>(level + 1));
    for (int r = 1; r <= level; ++r)
      d[static_cast<std::size_t>(r)] =
          cauchy_derivative([&](cplx w) { return dH(p, w, v); }, u0, r - 1, radius, nodes);
    cplx acc{0.0, 0.0};
    for (const auto& [mult, w] : terms) {
      int order = 0;
      cplx prod{1.0, 0.0};
      for (int k = 1; k <= level; ++k) {
        const int ik = mult[static_cast<std::size_t>(k)];
        order += ik;
        for (int t = 0; t < ik; ++t) prod *= u[static_cast<std::size_t>(grp.base_index + k)];
      }
      acc += w * d[static_cast<std::size_t>(order)] * prod;
    }
    return acc;
  };
  return h;
}

// ---------------------------------------------------------------------------
// Pushforward

cplx mu_prime(const CoordinateChange& c, cplx pt, FieldVec v) {
  return cauchy_derivative([&](cplx z) { return c.mu(z, v); }, pt, 1, c.radius, c.nodes);
}

namespace {

cplx mu_field_partial(const CoordinateChange& c, cplx pt, FieldVec v, int k) {
  return cauchy_derivative(
      [&](cplx w) {
        const Vec vv = with_field(v, k, w);
        return c.mu(pt, vv);
      },
      v[static_cast<std::size_t>(k)], 1, c.radius, c.nodes);
}

}  // namespace

GTStructure pushforward(const GTStructure& s, const CoordinateChange& c) {
  auto base = std::make_shared<const GTStructure>(s);
  auto ch = std::make_shared<const CoordinateChange>(c);
  GTStructure out;
  out.label = s.label + "/pushed(" + c.label + ")";
  out.m = s.m;
  out.coords = s.coords;
  out.g = [base, ch](const Point& pt, FieldVec v, std::span<cplx> g) {
    const cplx d = mu_prime(*ch, pt.z, v);
    base->g(Point{ch->mu(pt.z, v), pt.sheet}, v, g);
    for (auto& x : g) x *= d * d;
  };
  out.f = [base, ch](const Point& a, const Point& b, FieldVec v) {
    const Point ma{ch->mu(a.z, v), a.sheet}, mb{ch->mu(b.z, v), b.sheet};
    const cplx da = mu_prime(*ch, a.z, v), db = mu_prime(*ch, b.z, v);
    if (std::abs(db) == 0.0) throw NumericError(ErrorKind::domain_violation, "mu' vanishes");
    const Vec ga = base->g_at(ma, v);
    cplx move{0.0, 0.0};
    for (int j = 0; j < base->m; ++j)
      move += ga[static_cast<std::size_t>(j)] * mu_field_partial(*ch, b.z, v, j);
    return da * da / db * (base->f(ma, mb, v) - move);
  };
  out.clearance = [base, ch](std::span<const Point> pts, FieldVec v) {
    std::vector<Point> mapped;
    double speed = 0.0;
    for (const auto& p : pts) {
      mapped.push_back(Point{ch->mu(p.z, v), p.sheet});
      double sp = std::abs(mu_prime(*ch, p.z, v));
      for (int j = 0; j < base->m; ++j) sp += std::abs(mu_field_partial(*ch, p.z, v, j));
      speed = std::max(speed, sp);
    }
    // Half the image clearance pulled back through the local stretch factor.
    return 0.5 * base->clearance(mapped, v) / std::max(speed, 1e-12);
  };
  out.sample_fields = s.sample_fields;
  out.sample_point = s.sample_point;
  return out;
}

EnhancedGT pushforward_lambda(const EnhancedGT& e, const CoordinateChange& c) {
  EnhancedGT out;
  out.base = pushforward(e.base, c);
  auto lam = e.lambda;
  auto ch = std::make_shared<const CoordinateChange>(c);
  out.lambda = [lam, ch](const Point& a, const Point& b, FieldVec v) {
    return mu_prime(*ch, a.z, v) *
           lam(Point{ch->mu(a.z, v), a.sheet}, Point{ch->mu(b.z, v), b.sheet}, v);
  };
  return out;
}

Potential pushforward_potential(const Potential& h, const CoordinateChange& c) {
  auto hp = std::make_shared<const Potential>(h);
  auto ch = std::make_shared<const CoordinateChange>(c);
  Potential out;
  out.label = h.label + "/pushed";
  out.difference = h.difference;
  out.value = [hp, ch](const Point& p, FieldVec v) {
    return hp->value(Point{ch->mu(p.z, v), p.sheet}, v);
  };
  if (h.dp) {
    out.dp = [hp, ch](const Point& p, FieldVec v) {
      return hp->dp(Point{ch->mu(p.z, v), p.sheet}, v) * mu_prime(*ch, p.z, v);
    };
  }
  if (h.dp && h.dv) {
    out.dv = [hp, ch](const Point& p, FieldVec v, int k) {
      const Point mp{ch->mu(p.z, v), p.sheet};
      return hp->dv(mp, v, k) + hp->dp(mp, v) * mu_field_partial(*ch, p.z, v, k);
    };
  }
  if (h.clearance) {
    out.clearance = [hp, ch](const Point& p, FieldVec v) {
      return hp->clearance(Point{ch->mu(p.z, v), p.sheet}, v) /
             std::max(1.0, std::abs(mu_prime(*ch, p.z, v)));
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Contour potentials

Potential potential_from_contour(const EnhancedGT& e, std::function<PathSpec(FieldVec)> path,
                                 const ContourOptions& opt) {
  auto lam = e.lambda;
  Potential h;
  h.label = "contour";
  h.value = [lam, path](const Point& p, FieldVec v) {
    const PathSpec g = path(v);
    return path_integrate([&](cplx t) { return lam(Point{t, 1}, p, v); }, g);
  };
  if (opt.clearance) {
    h.clearance = opt.clearance;
  } else {
    h.clearance = [path](const Point& p, FieldVec v) { return path(v).distance(p.z); };
  }

  // Probe the path on a sample draw to decide whether it is open.
  Rng probe(opt.seed);
  const Vec v0 = e.base.sample_fields(probe);
  const PathSpec g0 = path(v0);
  g0.validate();
  if (g0.closed_path()) return h;

  VerifyOptions vo;
  vo.samples = opt.samples;
  vo.seed = opt.seed;
  vo.nodes = opt.nodes;
  vo.min_separation = opt.min_separation;
  vo.exec = Exec::serial;
  const GTStructure& s = e.base;
  auto extra = [&](const StructureSample& smp) {
    const PathSpec g = path(smp.fields);
    double d = kInf;
    const cplx ends[2] = {g.vertices.front(), g.vertices.back()};
    if (!opt.clearance)
      for (const auto& p : smp.points) d = std::min(d, g.distance(p.z));
    if (opt.clearance)
      for (const auto& p : smp.points) d = std::min(d, opt.clearance(p, smp.fields));
    // Each end acts as an extra point for f and lambda. The ends are checked
    // one at a time since they may legitimately differ by a period.
    for (cplx t : ends) {
      std::vector<Point> all(smp.points.begin(), smp.points.end());
      all.push_back(Point{t, 1});
      d = std::min(d, s.clearance(all, smp.fields));
    }
    return d;
  };
  const auto samples = draw_samples(s, 2, opt.samples, vo, extra);
  double worst = 0.0;
  for (const auto& smp : samples) {
    const DiffContext dc{smp.radius, opt.nodes};
    const Point p1 = smp.points[0], p2 = smp.points[1];
    const FieldVec v = smp.fields;
    const PathSpec g = path(v);
    const Point ts{g.vertices.front(), 1}, te{g.vertices.back(), 1};
    const cplx be = lam(te, p2, v) * s.f(p1, te, v);
    const cplx bs = lam(ts, p2, v) * s.f(p1, ts, v);
    const Vec g1 = s.g_at(p1, v);
    cplx me{0.0, 0.0}, ms{0.0, 0.0};
    for (int j = 0; j < s.m; ++j) {
      const cplx gj = g1[static_cast<std::size_t>(j)];
      me += gj * field_partial([&](FieldVec vv) { return path(vv).vertices.back(); }, v, j, dc);
      ms += gj * field_partial([&](FieldVec vv) { return path(vv).vertices.front(); }, v, j, dc);
    }
    const cplx le = lam(te, p2, v), ls = lam(ts, p2, v);
    const cplx b = be - bs - (me * le - ms * ls);
    worst = std::max(worst, std::abs(b) / std::max({1.0, std::abs(be), std::abs(bs),
                                                    std::abs(me * le), std::abs(ms * ls)}));
  }
  if (worst > opt.tol)
    throw NumericError(ErrorKind::domain_violation,
                       "open contour violates the endpoint condition (residual " +
                           std::to_string(worst) + ")");
  return h;
}

// ---------------------------------------------------------------------------
// Lie algebroid constants

std::vector<std::vector<std::vector<cplx>>> algebroid_bracket_table(
    const std::vector<std::vector<cplx>>& fc, int order) {
  const int top = order + 1;
  const int kmax = 2 * order + 2;
  auto fget = [&](int i, int j) -> cplx {
    if (i < 0 || j < 0) return {0.0, 0.0};
    if (i > order || j > order)
      throw NumericError(ErrorKind::invalid_argument, "table needs Taylor coefficients beyond order");
    return fc[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  };
  std::vector<std::vector<std::vector<cplx>>> t(
      static_cast<std::size_t>(top + 1),
      std::vector<std::vector<cplx>>(static_cast<std::size_t>(top + 1),
                                     std::vector<cplx>(static_cast<std::size_t>(kmax + 1))));
  for (int i = 1; i <= top; ++i) {
    for (int j = 1; j <= top; ++j) {
      auto& c = t[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      c[static_cast<std::size_t>(i + j)] += static_cast<double>(j - i);
      for (int r = 0; r <= i - 1; ++r)
        c[static_cast<std::size_t>(i - r + 1)] += static_cast<double>(i + r - 1) * fget(j - 2, r);
      for (int r = 0; r <= j - 1; ++r)
        c[static_cast<std::size_t>(j - r + 1)] -= static_cast<double>(j + r - 1) * fget(i - 2, r);
    }
  }
  return t;
}

AlgebroidTable algebroid_constants(const GTStructure& s, const Point& z, FieldVec v, int order,
                                   int nodes) {
  if (order < 0 || order > 6)
    throw NumericError(ErrorKind::invalid_argument,
                       "algebroid order must lie in [0, 6] for reliable circle derivatives");
  const Point pts[1] = {z};
  const double clear = std::min(1.0, s.clearance(pts, v));
  if (!(clear > 0.0)) throw NumericError(ErrorKind::domain_violation, "z is on a singular locus");
  AlgebroidTable t;
  t.order = order;
  t.z = z.z;
  const double r1 = 0.4 * clear, r2 = 0.2 * clear;
  auto reg = [&](cplx a, cplx b) {
    return s.f(Point{a, z.sheet}, Point{b, z.sheet}, v) - 1.0 / (a - b);
  };
  t.f_coeffs.assign(static_cast<std::size_t>(order + 1), Vec(static_cast<std::size_t>(order + 1)));
  for (int i = 0; i <= order; ++i)
    for (int j = 0; j <= order; ++j)
      t.f_coeffs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          torus_coeff(reg, z.z, z.z, i, j, r1, r2, nodes);

  const int kmax = 2 * order + 2;
  const auto m = static_cast<std::size_t>(s.m);
  const double r = 0.3 * clear;
  auto taylor = [&](FieldVec vv, cplx at, int k) {
    // k-th Taylor coefficient vector of g about `at`
    Vec acc(m, cplx{0.0, 0.0});
    const int n = 2 * nodes;
    for (int j = 0; j < n; ++j) {
      const double th = 2.0 * kPi * j / n;
      const Vec val = s.g_at(Point{at + std::polar(r, th), z.sheet}, vv);
      const cplx w = std::polar(1.0, -k * th);
      for (std::size_t i = 0; i < m; ++i) acc[i] += val[i] * w;
    }
    const double norm = 1.0 / (n * std::pow(r, k));
    for (auto& a : acc) a *= norm;
    return acc;
  };
  t.e.assign(static_cast<std::size_t>(kmax + 1), Vec{});
  for (int k = 2; k <= kmax; ++k) t.e[static_cast<std::size_t>(k)] = taylor(v, z.z, k - 2);
  t.bracket = algebroid_bracket_table(t.f_coeffs, order);

  // Direct Lie brackets. e_1 = d/dz acts only through the z-dependence.
  const int top = order + 1;
  const double rv = 0.25 * clear;
  auto fiber_jac = [&](int k) {
    std::vector<Vec> jac;  // jac[j] = d e_k / d v_j
    for (int j = 0; j < s.m; ++j)
      jac.push_back(cauchy_vec(
          [&](cplx w) {
            const Vec vv = with_field(v, j, w);
            return taylor(vv, z.z, k - 2);
          },
          v[static_cast<std::size_t>(j)], 1, rv, nodes, m));
    return jac;
  };
  std::vector<std::vector<Vec>> jacs(static_cast<std::size_t>(top + 1));
  for (int k = 2; k <= top; ++k) jacs[static_cast<std::size_t>(k)] = fiber_jac(k);
  double defect = 0.0;
  for (int i = 1; i <= top; ++i) {
    for (int j = 1; j <= top; ++j) {
      Vec lie(m, cplx{0.0, 0.0});
      if (i == 1 && j == 1) {
        // both are d/dz: bracket vanishes
      } else if (i == 1 || j == 1) {
        const int k = i == 1 ? j : i;
        const double sign = i == 1 ? 1.0 : -1.0;
        const Vec dz = cauchy_vec([&](cplx w) { return taylor(v, w, k - 2); }, z.z, 1, rv, nodes, m);
        for (std::size_t l = 0; l < m; ++l) lie[l] = sign * dz[l];
      } else {
        const auto& ei = t.e[static_cast<std::size_t>(i)];
        const auto& ej = t.e[static_cast<std::size_t>(j)];
        const auto& ji = jacs[static_cast<std::size_t>(i)];
        const auto& jj = jacs[static_cast<std::size_t>(j)];
        for (std::size_t l = 0; l < m; ++l)
          for (std::size_t q = 0; q < m; ++q) lie[l] += ei[q] * jj[q][l] - ej[q] * ji[q][l];
      }
      const auto& c = t.bracket[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      Vec table(m, cplx{0.0, 0.0});
      double big = 1.0;
      for (int k = 2; k <= kmax; ++k) {
        const cplx ck = c[static_cast<std::size_t>(k)];
        if (ck == cplx{0.0, 0.0}) continue;
        for (std::size_t l = 0; l < m; ++l) {
          const cplx term = ck * t.e[static_cast<std::size_t>(k)][l];
          table[l] += term;
          big = std::max(big, std::abs(term));
        }
      }
      for (std::size_t l = 0; l < m; ++l) {
        big = std::max(big, std::abs(lie[l]));
        defect = std::max(defect, std::abs(lie[l] - table[l]) / big);
      }
    }
  }
  t.table_defect = defect;
  return t;
}

// ---------------------------------------------------------------------------

double structure_distance(const GTStructure& a, const GTStructure& b, const VerifyOptions& opt) {
  if (a.m != b.m) throw NumericError(ErrorKind::invalid_argument, "structures have different fiber dimensions");
  const auto samples = draw_samples(a, 2, opt.samples, opt, [&](const StructureSample& smp) {
    return b.clearance(smp.points, smp.fields);
  });
  const auto res = fan_out(opt.samples, opt.exec, [&](int i) {
    const auto& smp = samples[static_cast<std::size_t>(i)];
    const Point p1 = smp.points[0], p2 = smp.points[1];
    const Vec ga = a.g_at(p1, smp.fields), gb = b.g_at(p1, smp.fields);
    double d = scaled(a.f(p1, p2, smp.fields), b.f(p1, p2, smp.fields), {a.f(p1, p2, smp.fields)});
    for (std::size_t k = 0; k < ga.size(); ++k) d = std::max(d, scaled(ga[k], gb[k], {ga[k]}));
    return d;
  });
  return *std::max_element(res.begin(), res.end());
}

GTStructure scale_f(const GTStructure& s, cplx factor) {
  GTStructure out = s;
  auto f = s.f;
  out.label = s.label + "*scaled";
  out.f = [f, factor](const Point& a, const Point& b, FieldVec v) { return factor * f(a, b, v); };
  return out;
}

GTStructure perturb_f(const GTStructure& s,
                      std::function<cplx(const Point&, const Point&, FieldVec)> delta) {
  GTStructure out = s;
  auto f = s.f;
  out.label = s.label + "*perturbed";
  out.f = [f, delta](const Point& a, const Point& b, FieldVec v) { return f(a, b, v) + delta(a, b, v); };
  return out;
}

}  // namespace gtw
