#include "gtw/gibbons_tsarev.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fan_out.hpp"

namespace gtw {

using Vec = std::vector<cplx>;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBlowUpClearance = 1e-3;
constexpr double kBlowUpG1 = 1e-10;

using ThreeArgFn = std::function<cplx(const Point&, const Point&, FieldVec)>;

struct Grad {
  cplx da{0.0, 0.0}, db{0.0, 0.0};
  Vec dv;
};

Grad gradient(const ThreeArgFn& fn, const Point& a, const Point& b, FieldVec v, double r, int nodes) {
  Grad g;
  g.da = cauchy_derivative([&](cplx z) { return fn(Point{z, a.sheet}, b, v); }, a.z, 1, r, nodes);
  g.db = cauchy_derivative([&](cplx z) { return fn(a, Point{z, b.sheet}, v); }, b.z, 1, r, nodes);
  Vec w(v.begin(), v.end());
  for (std::size_t l = 0; l < w.size(); ++l) {
    const cplx keep = w[l];
    g.dv.push_back(cauchy_derivative(
        [&](cplx z) {
          w[l] = z;
          const cplx out = fn(a, b, w);
          w[l] = keep;
          return out;
        },
        keep, 1, r, nodes));
  }
  return g;
}

double scaled(cplx lhs, cplx rhs) {
  return std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

/// First derivatives of the unknowns along r_i at one state. Z (d_k p_k) is
/// only known inside the integrator.
struct Rates {
  const GTSystem& sys;
  const ReductionState& st;
  double r;
  const Vec* Z = nullptr;

  cplx dp(int i, int y) const {
    if (i == y) return (*Z)[static_cast<std::size_t>(i)];
    return sys.phi(P(i), P(y), st.v) * W(i);
  }
  Vec dv(int i) const {
    Vec g = sys.G(P(i), st.v);
    for (auto& x : g) x *= W(i);
    return g;
  }
  /// d_i w_y for y != i.
  cplx dw(int i, int y) const { return sys.qhat(P(y), P(i), st.v, 0.5 * r) * W(y) * W(i); }

  /// d_i F(p_x, p_y, v) from a gradient.
  cplx along(int i, const Grad& g, int x, int y) const {
    cplx acc = g.da * dp(i, x) + g.db * dp(i, y);
    const Vec d = dv(i);
    for (std::size_t l = 0; l < d.size(); ++l) acc += g.dv[l] * d[l];
    return acc;
  }

  Grad phi_grad(int x, int y) const {
    return gradient([&](const Point& a, const Point& b, FieldVec v) { return sys.phi(a, b, v); }, P(x), P(y),
                    st.v, r, sys.nodes);
  }
  Grad qhat_grad(int x, int y) const {
    // The inner circles sit six times closer than the nearest singularity, so
    // half the nodes keep the same accuracy.
    const double inner = 0.5 * r;
    const int inner_nodes = std::max(8, sys.nodes / 2);
    return gradient([&](const Point& a, const Point& b, FieldVec v) { return sys.qhat(a, b, v, inner, inner_nodes); },
                    P(x), P(y), st.v, r, sys.nodes);
  }
  /// Gradient of G_l(p_x) (db unused).
  Grad G_grad(int x, int l) const {
    return gradient(
        [&](const Point& a, const Point&, FieldVec v) { return sys.G(a, v)[static_cast<std::size_t>(l)]; },
        P(x), P(x), st.v, r, sys.nodes);
  }

  const Point& P(int i) const { return st.p[static_cast<std::size_t>(i)]; }
  cplx W(int i) const { return st.w[static_cast<std::size_t>(i)]; }
};

double diff_radius(const GTSystem& sys, const ReductionState& st) {
  return 0.25 * std::min(1.0, state_clearance(sys, st));
}

}  // namespace

cplx GTSystem::g1(const Point& a, FieldVec v) const {
  return source.g_at(a, v)[static_cast<std::size_t>(distinguished)];
}

cplx GTSystem::phi(const Point& a, const Point& b, FieldVec v) const { return source.f(a, b, v) / g1(a, v); }

std::vector<cplx> GTSystem::G(const Point& a, FieldVec v) const {
  Vec g = source.g_at(a, v);
  const cplx d = g[static_cast<std::size_t>(distinguished)];
  for (auto& x : g) x /= d;
  return g;
}

cplx GTSystem::qhat(const Point& a, const Point& b, FieldVec v, double radius, int n) const {
  const int nodes = n > 0 ? n : this->nodes;
  const Vec ga = source.g_at(a, v);
  const cplx g1a = ga[static_cast<std::size_t>(distinguished)];
  const cplx g1b = g1(b, v);
  const cplx fab = source.f(a, b, v);
  const cplx f_b =
      cauchy_derivative([&](cplx z) { return source.f(a, Point{z, b.sheet}, v); }, b.z, 1, radius, nodes);
  const cplx g1b_p = cauchy_derivative([&](cplx z) { return g1(Point{z, b.sheet}, v); }, b.z, 1, radius, nodes);
  cplx transport{0.0, 0.0};
  Vec w(v.begin(), v.end());
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (ga[k] == cplx{0.0, 0.0}) continue;
    const cplx keep = w[k];
    const cplx d = cauchy_derivative(
        [&](cplx z) {
          w[k] = z;
          const cplx out = g1(b, w);
          w[k] = keep;
          return out;
        },
        keep, 1, radius, nodes);
    transport += ga[k] * d;
  }
  return 2.0 * f_b / g1a + (fab * g1b_p + transport) / (g1a * g1b);
}

GTSystem build_system(const GTStructure& s, int M, int distinguished, int nodes) {
  if (s.m == 0) throw NumericError(ErrorKind::invalid_argument, "the GT system needs at least one field (m = 0)");
  if (M < 1) throw NumericError(ErrorKind::invalid_argument, "the GT system needs M >= 1");
  if (distinguished < 0 || distinguished >= s.m)
    throw NumericError(ErrorKind::invalid_argument, "distinguished field index out of range");
  if (nodes < 4) throw NumericError(ErrorKind::invalid_argument, "nodes must be at least 4");
  GTSystem sys{s, M, distinguished, nodes};
  // g_1 must not vanish identically; probe a few sampled points.
  Rng rng(0x5eed);
  bool nonzero = false;
  for (int t = 0; t < 16 && !nonzero; ++t) {
    const Vec v = s.sample_fields(rng);
    const Point p = s.sample_point(rng, v);
    nonzero = std::abs(sys.g1(p, v)) > 1e-12;
  }
  if (!nonzero)
    throw NumericError(ErrorKind::domain_violation, "g_" + s.coords[static_cast<std::size_t>(distinguished)] +
                                                        " vanishes at every probe point");
  return sys;
}

double state_clearance(const GTSystem& sys, const ReductionState& st) {
  double d = sys.source.clearance(st.p, st.v);
  for (std::size_t i = 0; i < st.p.size(); ++i)
    for (std::size_t j = i + 1; j < st.p.size(); ++j) d = std::min(d, std::abs(st.p[i].z - st.p[j].z));
  return d;
}

ReductionState sample_state(const GTSystem& sys, Rng& rng, double w_scale, double min_separation) {
  VerifyOptions vo;
  vo.seed = rng.next();
  vo.min_separation = min_separation;
  const auto smp = draw_samples(sys.source, sys.M, 1, vo).front();
  ReductionState st{smp.points, smp.fields, {}};
  for (int i = 0; i < sys.M; ++i) st.w.push_back({rng.uniform(-w_scale, w_scale), rng.uniform(-w_scale, w_scale)});
  return st;
}

void validate_state(const GTSystem& sys, const ReductionState& st) {
  if (static_cast<int>(st.p.size()) != sys.M || static_cast<int>(st.w.size()) != sys.M ||
      static_cast<int>(st.v.size()) != sys.source.m)
    throw NumericError(ErrorKind::invalid_argument, "state does not match the system dimensions");
  for (std::size_t i = 0; i < st.p.size(); ++i) {
    for (std::size_t j = i + 1; j < st.p.size(); ++j)
      if (st.p[i].z == st.p[j].z && st.p[i].sheet == st.p[j].sheet)
        throw NumericError(ErrorKind::domain_violation, "state points must be pairwise distinct");
    if (!(std::abs(sys.g1(st.p[i], st.v)) > 0.0))
      throw NumericError(ErrorKind::domain_violation, "g_1 vanishes at a state point");
  }
}

VerificationReport compatibility_residual(const GTSystem& sys, const ReductionState& st, double tol) {
  validate_state(sys, st);
  if (!(state_clearance(sys, st) > 0.0))
    throw NumericError(ErrorKind::domain_violation, "state sits on a singular locus");
  const double r = diff_radius(sys, st);
  const Rates R{sys, st, r};
  const int M = sys.M, m = sys.source.m;
  double worst = 0.0, sum = 0.0;
  int count = 0;
  auto note = [&](double x) {
    worst = std::max(worst, std::isfinite(x) ? x : kInf);
    sum += x;
    ++count;
  };
  // d_i of (d_j X), with d_j X written through the system.
  for (int i = 0; i < M; ++i)
    for (int j = i + 1; j < M; ++j) {
      auto mixed_v = [&](int a, int b, int l) {
        const Grad g = R.G_grad(b, l);
        const cplx Gl = sys.G(R.P(b), st.v)[static_cast<std::size_t>(l)];
        cplx d = g.da * R.dp(a, b);
        const Vec dva = R.dv(a);
        for (int k = 0; k < m; ++k) d += g.dv[static_cast<std::size_t>(k)] * dva[static_cast<std::size_t>(k)];
        return d * R.W(b) + Gl * R.dw(a, b);
      };
      for (int l = 0; l < m; ++l) note(scaled(mixed_v(i, j, l), mixed_v(j, i, l)));
      for (int k = 0; k < M; ++k) {
        if (k == i || k == j) continue;
        auto mixed_p = [&](int a, int b) {
          const Grad g = R.phi_grad(b, k);
          return R.along(a, g, b, k) * R.W(b) + sys.phi(R.P(b), R.P(k), st.v) * R.dw(a, b);
        };
        note(scaled(mixed_p(i, j), mixed_p(j, i)));
        auto mixed_w = [&](int a, int b) {
          const Grad g = R.qhat_grad(k, b);
          const cplx q = sys.qhat(R.P(k), R.P(b), st.v, 0.5 * r);
          return R.along(a, g, k, b) * R.W(k) * R.W(b) + q * (R.dw(a, k) * R.W(b) + R.W(k) * R.dw(a, b));
        };
        note(scaled(mixed_w(i, j), mixed_w(j, i)));
      }
    }
  VerificationReport rep;
  rep.identity = "gt_system_compatibility";
  rep.structure = sys.source.label;
  rep.samples = 1;
  rep.max_residual = worst;
  rep.mean_residual = count ? sum / count : 0.0;
  rep.tol = tol;
  rep.pass = worst < tol;
  rep.nodes = sys.nodes;
  rep.metrics = {{"M", static_cast<double>(M)}, {"conditions", static_cast<double>(count)}};
  return rep;
}

VerificationReport compatibility_suite(const GTSystem& sys, int count, std::uint64_t seed, double tol,
                                       Exec exec) {
  if (count < 1) throw NumericError(ErrorKind::invalid_argument, "state count must be positive");
  Rng rng(seed);
  std::vector<ReductionState> states;
  for (int i = 0; i < count; ++i) states.push_back(sample_state(sys, rng));
  const auto reps = detail::fan_out<VerificationReport>(
      count, exec, [&](int i) { return compatibility_residual(sys, states[static_cast<std::size_t>(i)], tol); });
  VerificationReport out = reps.front();
  out.samples = count;
  out.seed = seed;
  out.max_residual = 0.0;
  double sum = 0.0;
  for (const auto& r : reps) {
    out.max_residual = std::max(out.max_residual, r.max_residual);
    sum += r.mean_residual;
  }
  out.mean_residual = sum / count;
  out.pass = std::isfinite(out.max_residual) && out.max_residual < tol;
  return out;
}

double qhat_symmetry_defect(const GTSystem& sys, const ReductionState& st) {
  if (st.p.size() < 2) throw NumericError(ErrorKind::invalid_argument, "qhat symmetry needs two points");
  const double r = diff_radius(sys, st);
  return scaled(sys.qhat(st.p[0], st.p[1], st.v, r), sys.qhat(st.p[1], st.p[0], st.v, r));
}

// ---------------------------------------------------------------------------
// Goursat integration

AxisData sample_axis_data(const GTSystem& sys, std::uint64_t seed, double scale) {
  Rng rng(seed);
  AxisData d;
  d.origin = sample_state(sys, rng, scale, 0.3);
  auto draw = [&] { return cplx{rng.uniform(-scale, scale), rng.uniform(-scale, scale)}; };
  for (int k = 0; k < sys.M; ++k) {
    d.dp.push_back(draw());
    d.ddp.push_back(draw());
    d.dw.push_back(draw());
  }
  return d;
}

const ReductionState& ReductionGrid::at(std::span<const int> index) const {
  std::size_t flat = 0;
  for (int n : index) flat = flat * static_cast<std::size_t>(steps + 1) + static_cast<std::size_t>(n);
  return nodes.at(flat);
}

namespace {

struct NodeData {
  ReductionState st;
  Vec Z, Y;  // d_k p_k and d_k w_k
};

std::string node_name(const std::vector<int>& n) {
  std::string s = "(";
  for (std::size_t i = 0; i < n.size(); ++i) s += (i ? "," : "") + std::to_string(n[i]);
  return s + ")";
}

void check_node(const GTSystem& sys, const NodeData& nd, const std::vector<int>& idx) {
  auto fail = [&](const std::string& why) {
    throw NumericError(ErrorKind::blow_up, "reduction blow-up at node " + node_name(idx) + ": " + why);
  };
  auto finite = [](cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); };
  for (const auto& p : nd.st.p)
    if (!finite(p.z)) fail("non-finite point");
  for (const auto& x : nd.st.v)
    if (!finite(x)) fail("non-finite field");
  for (std::size_t k = 0; k < nd.st.w.size(); ++k)
    if (!finite(nd.st.w[k]) || !finite(nd.Z[k]) || !finite(nd.Y[k])) fail("non-finite derivative");
  if (!(state_clearance(sys, nd.st) > kBlowUpClearance)) fail("points collide or reach a singular locus");
  for (const auto& p : nd.st.p)
    if (!(std::abs(sys.g1(p, nd.st.v)) > kBlowUpG1)) fail("g_1 crosses zero");
}

/// Group k (p_k, w_k, Z_k, Y_k) one step of size h along r_j, j != k.
void step_group(const GTSystem& sys, const NodeData& src, NodeData& dst, int k, int j, double h) {
  const double r = diff_radius(sys, src.st);
  const Rates R{sys, src.st, r, &src.Z};
  const auto K = static_cast<std::size_t>(k), J = static_cast<std::size_t>(j);
  const cplx wj = R.W(j), wk = R.W(k), Yj = src.Y[J];
  // p_k
  const cplx phi_jk = sys.phi(R.P(j), R.P(k), src.st.v);
  const Grad gphi_jk = R.phi_grad(j, k);
  const cplx d1p = phi_jk * wj;
  const cplx d2p = R.along(j, gphi_jk, j, k) * wj + phi_jk * Yj;
  dst.st.p[K] = Point{src.st.p[K].z + h * d1p + 0.5 * h * h * d2p, src.st.p[K].sheet};
  // w_k
  const cplx q_kj = sys.qhat(R.P(k), R.P(j), src.st.v, 0.5 * r);
  const Grad gq_kj = R.qhat_grad(k, j);
  const cplx d1w = q_kj * wk * wj;
  const cplx d2w = R.along(j, gq_kj, k, j) * wk * wj + q_kj * d1w * wj + q_kj * wk * Yj;
  dst.st.w[K] = wk + h * d1w + 0.5 * h * h * d2w;
  // Z_k = d_k p_k: d_j Z_k = d_k (Phi(p_j, p_k) w_j).
  const cplx dk_wj = q_kj * wj * wk;
  const cplx dZ = R.along(k, gphi_jk, j, k) * wj + phi_jk * dk_wj;
  dst.Z[K] = src.Z[K] + h * dZ;
  // Y_k = d_k w_k: d_j Y_k = d_k (qhat(p_k, p_j) w_k w_j).
  const cplx dY = R.along(k, gq_kj, k, j) * wk * wj + q_kj * src.Y[K] * wj + q_kj * wk * dk_wj;
  dst.Y[K] = src.Y[K] + h * dY;
}

void step_fields(const GTSystem& sys, const NodeData& src, NodeData& dst, int j, double h) {
  const double r = diff_radius(sys, src.st);
  const Rates R{sys, src.st, r, &src.Z};
  const auto J = static_cast<std::size_t>(j);
  const Vec G = sys.G(R.P(j), src.st.v);
  const Vec dvj = R.dv(j);
  for (int l = 0; l < sys.source.m; ++l) {
    const auto L = static_cast<std::size_t>(l);
    const Grad g = R.G_grad(j, l);
    cplx dG = g.da * src.Z[J];
    for (std::size_t mm = 0; mm < dvj.size(); ++mm) dG += g.dv[mm] * dvj[mm];
    const cplx d2 = dG * R.W(j) + G[L] * src.Y[J];
    dst.st.v[L] = src.st.v[L] + h * G[L] * R.W(j) + 0.5 * h * h * d2;
  }
}

}  // namespace

ReductionGrid integrate_reduction(const GTSystem& sys, const AxisData& data, int steps, double h) {
  const int M = sys.M;
  if (M < 2 || M > 3) throw NumericError(ErrorKind::invalid_argument, "the reduction integrator supports M = 2 or 3");
  if (steps < 1 || !(h > 0.0)) throw NumericError(ErrorKind::invalid_argument, "steps and h must be positive");
  const auto& o = data.origin;
  if (static_cast<int>(o.p.size()) != M || static_cast<int>(o.w.size()) != M ||
      static_cast<int>(data.dp.size()) != M || static_cast<int>(data.ddp.size()) != M ||
      static_cast<int>(data.dw.size()) != M || static_cast<int>(o.v.size()) != sys.source.m)
    throw NumericError(ErrorKind::invalid_argument, "axis data does not match the system dimensions");

  const int side = steps + 1;
  std::size_t total = 1;
  for (int k = 0; k < M; ++k) total *= static_cast<std::size_t>(side);
  std::vector<NodeData> grid(total);

  auto axis = [&](NodeData& nd, int k, double rk) {
    const auto K = static_cast<std::size_t>(k);
    nd.st.p[K] = Point{o.p[K].z + data.dp[K] * rk + 0.5 * data.ddp[K] * rk * rk, o.p[K].sheet};
    nd.st.w[K] = o.w[K] + data.dw[K] * rk;
    nd.Z[K] = data.dp[K] + data.ddp[K] * rk;
    nd.Y[K] = data.dw[K];
  };

  std::vector<int> idx(static_cast<std::size_t>(M), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    for (int k = M - 1; k >= 0; --k) {
      idx[static_cast<std::size_t>(k)] = static_cast<int>(rest % static_cast<std::size_t>(side));
      rest /= static_cast<std::size_t>(side);
    }
    auto pred = [&](int j) {
      std::size_t stride = 1;
      for (int k = M - 1; k > j; --k) stride *= static_cast<std::size_t>(side);
      return flat - stride;
    };
    NodeData& nd = grid[flat];
    nd.st = o;
    nd.Z.assign(static_cast<std::size_t>(M), cplx{});
    nd.Y.assign(static_cast<std::size_t>(M), cplx{});
    if (flat == 0) {
      for (int k = 0; k < M; ++k) axis(nd, k, 0.0);
    } else {
      int last = -1;
      for (int j = 0; j < M; ++j)
        if (idx[static_cast<std::size_t>(j)] > 0) last = j;
      step_fields(sys, grid[pred(last)], nd, last, h);
      for (int k = 0; k < M; ++k) {
        int dir = -1;
        for (int j = 0; j < M; ++j)
          if (j != k && idx[static_cast<std::size_t>(j)] > 0) dir = j;
        if (dir < 0)
          axis(nd, k, h * idx[static_cast<std::size_t>(k)]);
        else
          step_group(sys, grid[pred(dir)], nd, k, dir, h);
      }
    }
    check_node(sys, nd, idx);
  }

  ReductionGrid out;
  out.steps = steps;
  out.h = h;
  out.M = M;
  out.nodes.reserve(total);
  for (auto& nd : grid) out.nodes.push_back(std::move(nd.st));

  // A-posteriori residual in each coordinate plane through the origin.
  const auto d = static_cast<std::size_t>(sys.distinguished);
  for (int a = 0; a < M; ++a)
    for (int b = a + 1; b < M; ++b) {
      auto node = [&](int na, int nb) -> const ReductionState& {
        std::vector<int> ix(static_cast<std::size_t>(M), 0);
        ix[static_cast<std::size_t>(a)] = na;
        ix[static_cast<std::size_t>(b)] = nb;
        return out.at(ix);
      };
      auto rhs = [&](const ReductionState& st) {
        return sys.qhat(st.p[static_cast<std::size_t>(a)], st.p[static_cast<std::size_t>(b)], st.v,
                        diff_radius(sys, st)) *
               st.w[static_cast<std::size_t>(a)] * st.w[static_cast<std::size_t>(b)];
      };
      std::vector<cplx> q(static_cast<std::size_t>(side * side));
      for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) q[static_cast<std::size_t>(i * side + j)] = rhs(node(i, j));
      for (int i = 0; i < steps; ++i)
        for (int j = 0; j < steps; ++j) {
          const cplx mixed =
              (node(i + 1, j + 1).v[d] - node(i + 1, j).v[d] - node(i, j + 1).v[d] + node(i, j).v[d]) / (h * h);
          const auto Q = [&](int x, int y) { return q[static_cast<std::size_t>(x * side + y)]; };
          const cplx avg = 0.25 * (Q(i, j) + Q(i + 1, j) + Q(i, j + 1) + Q(i + 1, j + 1));
          out.residual = std::max(out.residual, std::abs(mixed - avg));
        }
    }
  return out;
}

ConvergenceResult reduction_convergence(const GTSystem& sys, const AxisData& data, int steps, double h) {
  ConvergenceResult c;
  c.residual_h = integrate_reduction(sys, data, steps, h).residual;
  c.residual_half = integrate_reduction(sys, data, 2 * steps, 0.5 * h).residual;
  c.ratio = c.residual_half > 0.0 ? c.residual_h / c.residual_half : kInf;
  return c;
}

}  // namespace gtw
