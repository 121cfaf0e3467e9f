#include "gtw/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

namespace gtw {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::domain_violation: return "domain-violation";
    case ErrorKind::non_convergence: return "non-convergence";
    case ErrorKind::exhaustion: return "exhaustion";
    case ErrorKind::invalid_modulus: return "invalid-modulus";
    case ErrorKind::pole_hit: return "pole-hit";
    case ErrorKind::ill_conditioned: return "ill-conditioned";
    case ErrorKind::blow_up: return "blow-up";
  }
  return "unknown";
}

double distance_to_segment(cplx z, cplx a, cplx b) {
  const cplx d = b - a;
  const double len2 = std::norm(d);
  if (len2 == 0.0) return std::abs(z - a);
  double t = std::real((z - a) * std::conj(d)) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::abs(z - (a + t * d));
}

double Exclusion::distance(cplx z) const {
  return segment ? distance_to_segment(z, a, b) : std::abs(z - a);
}

double distance_to(const Domain& domain, cplx z) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& e : domain) d = std::min(d, e.distance(z));
  return d;
}

// ---------------------------------------------------------------------------

namespace {

void check_circle(double radius, int nodes) {
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw NumericError(ErrorKind::invalid_argument, "circle radius must be positive and finite");
  if (nodes < 8) throw NumericError(ErrorKind::invalid_argument, "circle quadrature needs >= 8 nodes");
}

}  // namespace

cplx laurent_coeff(const ScalarFn& fn, cplx center, int k, double radius, int nodes) {
  check_circle(radius, nodes);
  cplx acc{0.0, 0.0};
  for (int j = 0; j < nodes; ++j) {
    const double theta = 2.0 * kPi * j / nodes;
    const cplx unit = std::polar(1.0, theta);
    acc += fn(center + radius * unit) * std::polar(1.0, -k * theta);
  }
  return acc / (static_cast<double>(nodes) * std::pow(radius, k));
}

cplx cauchy_derivative(const ScalarFn& fn, cplx center, int order, double radius, int nodes) {
  if (order < 0) throw NumericError(ErrorKind::invalid_argument, "derivative order must be >= 0");
  if (order == 0) return fn(center);
  double factorial = 1.0;
  for (int i = 2; i <= order; ++i) factorial *= i;
  return factorial * laurent_coeff(fn, center, order, radius, nodes);
}

cplx cauchy_derivative_checked(const ScalarFn& fn, cplx center, int order, double radius,
                               int nodes, double tol) {
  const cplx coarse = cauchy_derivative(fn, center, order, radius, nodes);
  if (!(tol > 0.0) || order == 0) return coarse;
  const cplx fine = cauchy_derivative(fn, center, order, radius, 2 * nodes);
  if (std::abs(fine - coarse) > tol * std::max(1.0, std::abs(fine)))
    throw NumericError(ErrorKind::non_convergence,
                       "circle quadrature changed by " + std::to_string(std::abs(fine - coarse)) +
                           " under node doubling");
  return fine;
}

cplx torus_coeff(const std::function<cplx(cplx, cplx)>& fn, cplx z1, cplx z2, int i, int j,
                 double r1, double r2, int nodes) {
  check_circle(r1, nodes);
  check_circle(r2, nodes);
  cplx acc{0.0, 0.0};
  for (int a = 0; a < nodes; ++a) {
    const double t1 = 2.0 * kPi * a / nodes;
    const cplx w1 = z1 + std::polar(r1, t1);
    for (int b = 0; b < nodes; ++b) {
      const double t2 = 2.0 * kPi * b / nodes;
      acc += fn(w1, z2 + std::polar(r2, t2)) * std::polar(1.0, -i * t1 - j * t2);
    }
  }
  return acc / (static_cast<double>(nodes) * nodes * std::pow(r1, i) * std::pow(r2, j));
}

// ---------------------------------------------------------------------------

JetEvaluator::JetEvaluator(int arity, Fn fn, std::vector<PoleLocus> poles)
    : arity_(arity), fn_(std::move(fn)), poles_(std::move(poles)) {
  if (arity_ < 0) throw NumericError(ErrorKind::invalid_argument, "negative arity");
  for (const auto& p : poles_) {
    if (p.slot < 0 || p.slot >= arity_ || p.other_slot >= arity_)
      throw NumericError(ErrorKind::invalid_argument, "pole locus refers to a missing slot");
  }
}

cplx JetEvaluator::value(std::span<const cplx> args) const {
  if (static_cast<int>(args.size()) != arity_)
    throw NumericError(ErrorKind::invalid_argument, "argument count does not match arity");
  for (const auto& a : args) {
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
      throw NumericError(ErrorKind::invalid_argument, "non-finite argument");
  }
  return fn_(args);
}

double JetEvaluator::pole_distance(std::span<const cplx> args, int slot) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& p : poles_) {
    if (p.other_slot >= 0) {
      if (p.slot == slot || p.other_slot == slot)
        d = std::min(d, std::abs(args[p.slot] - args[p.other_slot]));
    } else if (p.slot == slot) {
      d = std::min(d, std::abs(args[p.slot] - p.point));
    }
  }
  return d;
}

cplx JetEvaluator::partial(std::span<const cplx> args, std::span<const int> orders,
                           const QuadratureParams& q) const {
  if (static_cast<int>(orders.size()) != arity_)
    throw NumericError(ErrorKind::invalid_argument, "multi-index length does not match arity");
  int slot = -1;
  for (int i = 0; i < arity_; ++i) {
    if (orders[i] < 0) throw NumericError(ErrorKind::invalid_argument, "negative partial order");
    if (orders[i] > 0 && slot < 0) slot = i;
  }
  if (slot < 0) return value(args);

  std::vector<int> rest(orders.begin(), orders.end());
  const int order = rest[slot];
  rest[slot] = 0;
  std::vector<cplx> moving(args.begin(), args.end());
  const double dist = pole_distance(args, slot);
  const double radius = std::isfinite(dist) ? q.radius_fraction * dist : 0.5;

  ScalarFn inner = [&, this](cplx z) {
    std::vector<cplx> local = moving;
    local[slot] = z;
    return partial(local, rest, q);
  };
  return cauchy_derivative_checked(inner, args[slot], order, radius, q.nodes, q.tol);
}

cplx cauchy_derivative(const JetEvaluator& e, int slot, std::span<const cplx> args, int order,
                       double radius, int nodes, double tol) {
  if (slot < 0 || slot >= e.arity())
    throw NumericError(ErrorKind::invalid_argument, "slot out of range");
  const double dist = e.pole_distance(args, slot);
  if (radius <= 0.0) radius = std::isfinite(dist) ? 0.25 * dist : 0.5;
  if (radius >= dist)
    throw NumericError(ErrorKind::domain_violation,
                       "differentiation disc reaches a declared pole locus");
  std::vector<cplx> local(args.begin(), args.end());
  ScalarFn fn = [&](cplx z) {
    local[slot] = z;
    return e.value(local);
  };
  return cauchy_derivative_checked(fn, args[slot], order, radius, nodes, tol);
}

cplx laurent_coeff(const JetEvaluator& e, int slot, std::span<const cplx> args, cplx center,
                   int k, double radius, int nodes) {
  if (slot < 0 || slot >= e.arity())
    throw NumericError(ErrorKind::invalid_argument, "slot out of range");
  std::vector<cplx> local(args.begin(), args.end());
  // the circle about `center` must keep clear of every pole except the one at the centre
  local[slot] = center;
  for (const auto& p : e.poles()) {
    const bool touches = p.slot == slot || p.other_slot == slot;
    if (!touches) continue;
    const cplx where = p.other_slot >= 0 ? local[p.slot == slot ? p.other_slot : p.slot] : p.point;
    const double d = std::abs(where - center);
    if (d > 1e-14 * std::max(1.0, std::abs(center)) && radius >= d)
      throw NumericError(ErrorKind::domain_violation, "Laurent circle reaches another pole");
  }
  ScalarFn fn = [&](cplx z) {
    local[slot] = z;
    return e.value(local);
  };
  return laurent_coeff(fn, center, k, radius, nodes);
}

// ---------------------------------------------------------------------------

PathSpec PathSpec::circle(cplx c, double r, int panels, int nodes) {
  PathSpec p;
  p.kind = Kind::circle;
  p.center = c;
  p.radius = r;
  p.panels = panels;
  p.nodes = nodes;
  p.validate();
  return p;
}

PathSpec PathSpec::polyline(std::vector<cplx> v, int panels, int nodes) {
  PathSpec p;
  p.kind = Kind::polyline;
  p.vertices = std::move(v);
  p.panels = panels;
  p.nodes = nodes;
  p.validate();
  return p;
}

PathSpec PathSpec::closed(std::vector<cplx> v, int panels, int nodes) {
  PathSpec p = polyline(std::move(v), panels, nodes);
  p.kind = Kind::closed_polyline;
  return p;
}

void PathSpec::validate() const {
  if (nodes < 8) throw NumericError(ErrorKind::invalid_argument, "path needs >= 8 nodes per panel");
  if (panels < 1) throw NumericError(ErrorKind::invalid_argument, "path needs >= 1 panel");
  if (kind == Kind::circle) {
    if (!(radius > 0.0)) throw NumericError(ErrorKind::invalid_argument, "circle radius must be > 0");
  } else if (vertices.size() < 2) {
    throw NumericError(ErrorKind::invalid_argument, "polyline needs >= 2 vertices");
  }
}

PathSpec PathSpec::reversed() const {
  PathSpec p = *this;
  if (kind == Kind::circle) {
    p.clockwise = !clockwise;
    return p;
  }
  std::reverse(p.vertices.begin(), p.vertices.end());
  return p;
}

double PathSpec::distance(cplx z) const {
  if (kind == Kind::circle) return std::abs(std::abs(z - center) - radius);
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < vertices.size(); ++i)
    d = std::min(d, distance_to_segment(z, vertices[i], vertices[i + 1]));
  if (kind == Kind::closed_polyline)
    d = std::min(d, distance_to_segment(z, vertices.back(), vertices.front()));
  return d;
}

const GaussLegendre& gauss_legendre(int n) {
  static std::mutex mutex;
  static std::map<int, GaussLegendre> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  GaussLegendre gl;
  gl.x.resize(n);
  gl.w.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    gl.x[i] = -z;
    gl.x[n - 1 - i] = z;
    gl.w[i] = gl.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
  return cache.emplace(n, std::move(gl)).first->second;
}

namespace {

cplx integrate_segment(const ScalarFn& fn, cplx a, cplx b, int panels, const GaussLegendre& gl) {
  cplx acc{0.0, 0.0};
  const cplx step = (b - a) / static_cast<double>(panels);
  for (int p = 0; p < panels; ++p) {
    const cplx lo = a + static_cast<double>(p) * step;
    const cplx mid = lo + 0.5 * step;
    cplx part{0.0, 0.0};
    for (std::size_t i = 0; i < gl.x.size(); ++i) part += gl.w[i] * fn(mid + 0.5 * gl.x[i] * step);
    acc += part * 0.5 * step;
  }
  return acc;
}

cplx integrate_once(const ScalarFn& fn, const PathSpec& path, int panels) {
  const auto& gl = gauss_legendre(path.nodes);
  if (path.kind == PathSpec::Kind::circle) {
    const double r = path.radius;
    const double dir = path.clockwise ? -1.0 : 1.0;
    auto on_circle = [&](cplx s) {
      const double t = dir * s.real();
      const cplx e = std::polar(1.0, t);
      return fn(path.center + r * e) * cplx(0.0, dir * r) * e;
    };
    return integrate_segment(on_circle, 0.0, 2.0 * kPi, panels, gl);
  }
  cplx acc{0.0, 0.0};
  const auto& v = path.vertices;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) acc += integrate_segment(fn, v[i], v[i + 1], panels, gl);
  if (path.kind == PathSpec::Kind::closed_polyline && v.back() != v.front())
    acc += integrate_segment(fn, v.back(), v.front(), panels, gl);
  return acc;
}

}  // namespace

cplx path_integrate(const ScalarFn& fn, const PathSpec& path, double tol) {
  path.validate();
  const cplx coarse = integrate_once(fn, path, path.panels);
  if (!(tol > 0.0)) return coarse;
  const cplx fine = integrate_once(fn, path, 2 * path.panels);
  if (std::abs(fine - coarse) > tol * std::max(1.0, std::abs(fine)))
    throw NumericError(ErrorKind::non_convergence, "path quadrature changed under panel doubling");
  return fine;
}

cplx path_integrate(const JetEvaluator& e, int slot, std::span<const cplx> args,
                    const PathSpec& path, double tol) {
  std::vector<cplx> local(args.begin(), args.end());
  ScalarFn fn = [&](cplx t) {
    local[slot] = t;
    return e.value(local);
  };
  return path_integrate(fn, path, tol);
}

// ---------------------------------------------------------------------------

std::vector<cplx> sample_points(const Box& region, int count, std::uint64_t seed,
                                const Domain& exclusions, double min_separation,
                                int max_draws_per_point) {
  if (count < 0) throw NumericError(ErrorKind::invalid_argument, "negative sample count");
  if (region.empty()) throw NumericError(ErrorKind::invalid_argument, "empty sampling region");
  std::vector<cplx> out;
  out.reserve(count);
  Rng rng(seed);
  const long budget = static_cast<long>(max_draws_per_point) * std::max(count, 1);
  long draws = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++draws > budget)
      throw NumericError(ErrorKind::exhaustion, "rejection sampling exhausted its draw budget");
    const cplx z = region.draw(rng);
    if (distance_to(exclusions, z) < min_separation) continue;
    bool ok = true;
    for (const auto& w : out) {
      if (std::abs(w - z) < min_separation) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(z);
  }
  return out;
}

// ---------------------------------------------------------------------------

ThetaJet theta_jet(cplx p, cplx tau, double tol) {
  const double T = tau.imag();
  if (!(T > 0.0)) throw NumericError(ErrorKind::invalid_modulus, "theta needs Im tau > 0");
  if (!(tol > 0.0)) throw NumericError(ErrorKind::invalid_argument, "theta tolerance must be > 0");
  const double y = p.imag();

  auto log_mag = [&](double k) { return -2.0 * kPi * k * y - kPi * k * (k - 1.0) * T; };

  // Smallest K whose two geometric tails, weighted for the derivative factors,
  // fall below tol.
  int K = 1;
  for (;; ++K) {
    const double rp = -2.0 * kPi * y - 2.0 * kPi * (K + 1) * T;
    const double rm = 2.0 * kPi * y - 2.0 * kPi * (K + 2) * T;
    if (rp < 0.0 && rm < 0.0) {
      const double weight = 1.0 + kPi * (K + 2.0) * (K + 2.0);
      const double tail = std::exp(log_mag(K + 1)) / (1.0 - std::exp(rp)) +
                          std::exp(log_mag(-K - 1)) / (1.0 - std::exp(rm));
      if (tail * weight < tol) break;
    }
    if (K > 100000) throw NumericError(ErrorKind::non_convergence, "theta series does not converge");
  }

  ThetaJet jet{{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, K};
  auto add = [&](int k, cplx term) {
    const double kk = k;
    jet.value += term;
    jet.dp += term * kTwoPiI * kk;
    jet.dtau += term * cplx(0.0, kPi * kk * (kk - 1.0));
  };
  // Consecutive terms differ by -x Q^k going up and by -Q^(1-k) / x going down.
  const cplx x = std::exp(kTwoPiI * p), Q = std::exp(kTwoPiI * tau);
  cplx term{1.0, 0.0}, qk{1.0, 0.0};
  for (int k = 1; k <= K; ++k) {
    qk *= Q;
    term *= -qk / x;
    add(-k, term);
  }
  term = 1.0;
  qk = 1.0;
  add(0, term);
  for (int k = 1; k <= K; ++k) {
    term *= -x * qk;
    qk *= Q;
    add(k, term);
  }
  return jet;
}

cplx theta(cplx p, cplx tau, double tol) { return theta_jet(p, tau, tol).value; }

double lattice_distance(cplx z, cplx tau) {
  const double T = tau.imag();
  if (!(T > 0.0)) throw NumericError(ErrorKind::invalid_modulus, "lattice needs Im tau > 0");
  const long m0 = std::lround(z.imag() / T);
  // Compared squared; one sqrt at the end.
  double best = 0.25 * T * T;
  for (long m = m0 - 2; m <= m0 + 2; ++m) {
    const cplx shifted = z - static_cast<double>(m) * tau;
    const long n0 = std::lround(shifted.real());
    const double wm = std::max(1.0, static_cast<double>(std::labs(m)));
    for (long n = n0 - 1; n <= n0 + 1; ++n) {
      const double d2 = std::norm(shifted - static_cast<double>(n));
      best = std::min(best, d2 / (wm * wm));
    }
  }
  return std::sqrt(best);
}

cplx rho(cplx p, cplx tau, double tol, double guard) {
  if (!(tau.imag() > 0.0)) throw NumericError(ErrorKind::invalid_modulus, "rho needs Im tau > 0");
  if (lattice_distance(p, tau) < guard)
    throw NumericError(ErrorKind::pole_hit, "rho evaluated at a zero of theta");
  const ThetaJet jet = theta_jet(p, tau, tol);
  return jet.dp / jet.value;
}

}  // namespace gtw
