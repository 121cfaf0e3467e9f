#pragma once

// Complex-analytic numerics shared by every other module: seeded sampling,
// Cauchy-circle differentiation, Laurent coefficients, Gauss-Legendre path
// integration and the genus-1 functions theta and rho.
//
// Everything here is pure. Randomness enters only through explicit seeds.

#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gtw {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cplx kTwoPiI{0.0, 2.0 * std::numbers::pi};

enum class ErrorKind {
  invalid_argument,
  domain_violation,
  non_convergence,
  exhaustion,
  invalid_modulus,
  pole_hit,
  ill_conditioned,
  blow_up,
};

const char* to_string(ErrorKind kind);

class NumericError : public std::runtime_error {
 public:
  NumericError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// splitmix64. Fixed so that sample sets are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

struct Box {
  double re_lo = -1.0, re_hi = 1.0, im_lo = -1.0, im_hi = 1.0;

  bool empty() const { return !(re_hi > re_lo) || !(im_hi > im_lo); }
  cplx draw(Rng& rng) const { return {rng.uniform(re_lo, re_hi), rng.uniform(im_lo, im_hi)}; }
};

/// A pole locus in one complex plane: an isolated point or a segment (a cut).
struct Exclusion {
  cplx a;
  cplx b;
  bool segment = false;

  static Exclusion point(cplx c) { return {c, c, false}; }
  static Exclusion cut(cplx from, cplx to) { return {from, to, true}; }
  double distance(cplx z) const;
};

using Domain = std::vector<Exclusion>;

double distance_to(const Domain& domain, cplx z);
double distance_to_segment(cplx z, cplx a, cplx b);

// ---------------------------------------------------------------------------
// Circle quadrature

/// Plain holomorphic function of one complex variable.
using ScalarFn = std::function<cplx(cplx)>;

/// k-th Laurent coefficient about `center` from the trapezoid rule on the
/// circle |z - center| = radius. Spectrally accurate for functions holomorphic
/// on an annulus containing the circle.
cplx laurent_coeff(const ScalarFn& fn, cplx center, int k, double radius, int nodes);

/// order!/(2 pi i) \oint fn(z) / (z - center)^(order+1) dz on the trapezoid rule.
cplx cauchy_derivative(const ScalarFn& fn, cplx center, int order, double radius, int nodes);

/// Same, but repeats with 2*nodes and throws non_convergence if the two
/// results differ by more than tol * max(1, |result|).
cplx cauchy_derivative_checked(const ScalarFn& fn, cplx center, int order, double radius,
                               int nodes, double tol);

/// Taylor coefficient c_{i,j} of a function of two variables about (z1, z2),
/// computed on the torus |w1 - z1| = r1, |w2 - z2| = r2.
cplx torus_coeff(const std::function<cplx(cplx, cplx)>& fn, cplx z1, cplx z2, int i, int j,
                 double r1, double r2, int nodes);

// ---------------------------------------------------------------------------
// Multi-argument evaluators

/// Pole locus of a multi-argument evaluator: args[slot] == args[other_slot]
/// when other_slot >= 0, otherwise args[slot] == point.
struct PoleLocus {
  int slot = 0;
  int other_slot = -1;
  cplx point{};
};

struct QuadratureParams {
  int nodes = 32;
  double radius_fraction = 0.25;  // default radius = fraction * distance to nearest pole
  double tol = 0.0;               // > 0 enables the node-doubling convergence check
};

/// Pure holomorphic function of `arity` complex arguments with declared poles.
/// Partials of any order come from nested circle quadrature.
class JetEvaluator {
 public:
  using Fn = std::function<cplx(std::span<const cplx>)>;

  JetEvaluator() = default;
  JetEvaluator(int arity, Fn fn, std::vector<PoleLocus> poles = {});

  int arity() const { return arity_; }
  const std::vector<PoleLocus>& poles() const { return poles_; }

  cplx value(std::span<const cplx> args) const;

  /// Mixed partial with multi-index `orders` (one entry per argument).
  /// Order zero returns value() exactly.
  cplx partial(std::span<const cplx> args, std::span<const int> orders,
               const QuadratureParams& q = {}) const;

  /// Distance from args[slot] to the nearest declared pole that involves slot.
  double pole_distance(std::span<const cplx> args, int slot) const;

 private:
  int arity_ = 0;
  Fn fn_;
  std::vector<PoleLocus> poles_;
};

/// order-th derivative of e in argument `slot` at args. A non-positive radius
/// selects the default (a quarter of the distance to the nearest pole).
/// Throws domain_violation if the disc reaches a declared pole.
cplx cauchy_derivative(const JetEvaluator& e, int slot, std::span<const cplx> args, int order,
                       double radius, int nodes, double tol = 0.0);

cplx laurent_coeff(const JetEvaluator& e, int slot, std::span<const cplx> args, cplx center,
                   int k, double radius, int nodes);

// ---------------------------------------------------------------------------
// Paths

struct PathSpec {
  enum class Kind { circle, polyline, closed_polyline };
  Kind kind = Kind::polyline;
  cplx center{};
  double radius = 0.0;
  bool clockwise = false;
  std::vector<cplx> vertices;
  int panels = 8;  // per edge, or around the circle
  int nodes = 16;  // Gauss-Legendre nodes per panel

  static PathSpec circle(cplx c, double r, int panels = 8, int nodes = 16);
  static PathSpec polyline(std::vector<cplx> v, int panels = 8, int nodes = 16);
  static PathSpec closed(std::vector<cplx> v, int panels = 8, int nodes = 16);

  void validate() const;
  bool closed_path() const { return kind != Kind::polyline; }
  PathSpec reversed() const;
  /// Smallest distance from z to any point of the path.
  double distance(cplx z) const;
};

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
  std::vector<double> x;
  std::vector<double> w;
};
const GaussLegendre& gauss_legendre(int n);

/// \int_path fn(t) dt with Gauss-Legendre panels. With tol > 0 the panel
/// count is doubled once and non_convergence is raised on disagreement.
cplx path_integrate(const ScalarFn& fn, const PathSpec& path, double tol = 0.0);

cplx path_integrate(const JetEvaluator& e, int slot, std::span<const cplx> args,
                    const PathSpec& path, double tol = 0.0);

// ---------------------------------------------------------------------------
// Sampling

/// Deterministic rejection sampling inside `region`; every point keeps
/// min_separation from each exclusion and from the other points.
std::vector<cplx> sample_points(const Box& region, int count, std::uint64_t seed,
                                const Domain& exclusions, double min_separation,
                                int max_draws_per_point = 1000);

// ---------------------------------------------------------------------------
// Genus one

struct ThetaJet {
  cplx value;
  cplx dp;    // d/dp
  cplx dtau;  // d/dtau
  int terms;  // K of the symmetric partial sum
};

/// theta(p, tau) = sum_k (-1)^k exp(2 pi i (k p + k(k-1)/2 tau)), truncated at
/// |k| <= K with K chosen from an explicit geometric tail bound below tol.
ThetaJet theta_jet(cplx p, cplx tau, double tol = 1e-12);
cplx theta(cplx p, cplx tau, double tol = 1e-12);

/// Logarithmic derivative theta'/theta. Throws pole_hit within `guard` of a
/// lattice point.
cplx rho(cplx p, cplx tau, double tol = 1e-12, double guard = 1e-9);

/// Distance from z to the lattice Z + tau Z; lattice points m tau + n are
/// weighted by 1/max(1,|m|) so the result also bounds how far tau may move.
double lattice_distance(cplx z, cplx tau);

}  // namespace gtw
