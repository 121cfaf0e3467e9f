#pragma once

// GT structures: a family of vector fields g(p) on an m-dimensional fiber and
// a two-point function f(p1, p2) with a normalized simple pole on the diagonal.
// This header holds the data model, the numeric identity checks, and the
// transforms that build new structures from old ones.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gtw/kernel.hpp"

namespace gtw {

/// A point of the base curve. `sheet` selects the branch of the square root
/// on double covers; it is ignored by rational and elliptic structures.
struct Point {
  cplx z;
  int sheet = 1;
};

using FieldVec = std::span<const cplx>;

using VectorFamilyFn = std::function<void(const Point&, FieldVec, std::span<cplx>)>;
using TwoPointFn = std::function<cplx(const Point&, const Point&, FieldVec)>;
using OnePointFn = std::function<cplx(const Point&, FieldVec)>;
/// Smallest distance from any of the points (and any field coordinate acting
/// as a puncture) to a singular locus of the structure.
using ClearanceFn = std::function<double(std::span<const Point>, FieldVec)>;
using FieldSamplerFn = std::function<std::vector<cplx>(Rng&)>;
using PointSamplerFn = std::function<Point(Rng&, FieldVec)>;

struct GTStructure {
  std::string label;
  int m = 0;
  std::vector<std::string> coords;  // fiber coordinate names, size m
  VectorFamilyFn g;                 // writes g_1..g_m
  TwoPointFn f;
  ClearanceFn clearance;
  FieldSamplerFn sample_fields;
  PointSamplerFn sample_point;

  std::vector<cplx> g_at(const Point& p, FieldVec v) const;
};

struct EnhancedGT {
  GTStructure base;
  TwoPointFn lambda;
};

/// Candidate solution h(p, v) of the potential equation. Only derivatives of
/// h ever enter an identity, so multi-valued h (logarithms) supply analytic
/// jets; single-valued h may leave them empty and be differentiated by
/// circle quadrature.
struct Potential {
  std::string label;
  OnePointFn value;
  OnePointFn dp;                                        // optional
  std::function<cplx(const Point&, FieldVec, int)> dv;  // optional
  /// Extra clearance requirement for points (e.g. distance to an integration
  /// contour). Optional.
  std::function<double(const Point&, FieldVec)> clearance;
  bool difference = true;  // false for raw building blocks that are not claimed potentials
};

struct CoordinateChange {
  std::string label;
  std::function<cplx(cplx, FieldVec)> mu;  // p = mu(p~, v)
  double radius = 0.05;                    // circle radius for derivatives of mu
  int nodes = 32;
};

enum class Exec { serial, parallel };

struct VerifyOptions {
  int samples = 100;
  std::uint64_t seed = 1;
  double tol = 1e-8;
  int nodes = 32;
  double min_separation = 0.1;
  double radius_fraction = 0.25;
  int max_draws = 200000;
  Exec exec = Exec::parallel;
};

struct VerificationReport {
  std::string identity;
  std::string structure;
  int samples = 0;
  double max_residual = 0.0;
  double mean_residual = 0.0;
  double tol = 0.0;
  bool pass = false;
  std::uint64_t seed = 0;
  int nodes = 0;
  double min_separation = 0.0;
  /// Extra named measurements (e.g. mean diagonal residue).
  std::vector<std::pair<std::string, double>> metrics;
};

/// Residuals are scaled: |lhs - rhs| / max(1, largest |term|).
VerificationReport verify_pole(const GTStructure& s, const VerifyOptions& opt);
VerificationReport verify_bracket(const GTStructure& s, const VerifyOptions& opt);
VerificationReport verify_cocycle(const GTStructure& s, const VerifyOptions& opt);
VerificationReport verify_lambda(const EnhancedGT& e, const VerifyOptions& opt);
VerificationReport verify_potential(const EnhancedGT& e, const Potential& h,
                                    const VerifyOptions& opt);

/// Pole, bracket and cocycle in one call.
std::vector<VerificationReport> verify_axioms(const GTStructure& s, const VerifyOptions& opt);

// ---------------------------------------------------------------------------
// Derivative helpers shared with the other modules.

struct DiffContext {
  double radius;
  int nodes;

  cplx dz(const ScalarFn& fn, cplx at, int order = 1) const {
    return cauchy_derivative(fn, at, order, radius, nodes);
  }
};

/// d/dp of h at p (analytic jet when present).
cplx potential_dp(const Potential& h, const Point& p, FieldVec v, const DiffContext& dc);
/// d/dv_k of h at p.
cplx potential_dv(const Potential& h, const Point& p, FieldVec v, int k, const DiffContext& dc);
/// d/d(field k) of an arbitrary scalar function of the fields.
cplx field_partial(const std::function<cplx(FieldVec)>& fn, FieldVec v, int k,
                   const DiffContext& dc);
/// g(p)(X) = sum_j g_j(p) dX/dv_j.
cplx apply_g(const GTStructure& s, const Point& p, FieldVec v,
             const std::function<cplx(FieldVec)>& x, const DiffContext& dc);

// ---------------------------------------------------------------------------
// Transforms

/// Adds n punctures u_{m+1..m+n}: g^(p) = sum f(p, u_j) d/du_j + g(p).
GTStructure add_points(const GTStructure& s, int n);

struct CollisionGroup {
  int base_index = 0;  // first fiber coordinate of the group
  int depth = 0;       // the group spans coordinates base_index .. base_index + depth
};

/// Collides each group of punctures with the substitution
/// v_{j,l} = sum_s C(l,s) eps^s u_{j,s} and extrapolates eps -> 0 (Neville)
/// along `ladder`, which must be strictly decreasing and positive.
/// Throws non_convergence when the last two diagonal entries of the Neville
/// table differ by more than tol (relative).
GTStructure collide_points_limit(const GTStructure& s, const std::vector<CollisionGroup>& groups,
                                 const std::vector<double>& ladder, double tol = 1e-4);

/// The same limit in closed form: the u_{j,l} component is the Faa di Bruno
/// sum of (d/du)^r f(p, u_{j,0}) over partitions of l.
GTStructure collide_points_closed(const GTStructure& s, const std::vector<CollisionGroup>& groups,
                                  int nodes = 32);

/// 0.05 * 2^-k for k = 0..5.
std::vector<double> default_ladder();

/// Collides matching groups in the enhanced function as well.
EnhancedGT collide_points_limit(const EnhancedGT& e, const std::vector<CollisionGroup>& groups,
                                const std::vector<double>& ladder, double tol = 1e-4);

/// Collision of a family of potentials H(p, u_j): the level-l member of the
/// group is the Faa di Bruno combination of w-derivatives of H at w = u_{j,0}.
/// `dH` is the first w-derivative of H (single-valued even when H is a
/// logarithm); `w_clearance` bounds how far w may move.
Potential collided_potential(std::string label,
                             std::function<cplx(const Point&, cplx, FieldVec)> dH,
                             std::function<double(const Point&, cplx, FieldVec)> w_clearance,
                             const std::vector<CollisionGroup>& groups, int group, int level,
                             int nodes = 32);

/// Base-structure fields v(u, eps) for collided coordinates u.
std::vector<cplx> collision_substitute(FieldVec u, const std::vector<CollisionGroup>& groups,
                                       double eps);

/// Partitions of l as multiplicity vectors (index k holds i_k, 1 <= k <= l)
/// with their Faa di Bruno weights l! / prod(i_k! (k!)^{i_k}).
std::vector<std::pair<std::vector<int>, double>> faa_di_bruno_terms(int l);

GTStructure pushforward(const GTStructure& s, const CoordinateChange& c);
EnhancedGT pushforward_lambda(const EnhancedGT& e, const CoordinateChange& c);
/// Pushes a potential along: h~(p~, v) = h(mu(p~, v), v).
Potential pushforward_potential(const Potential& h, const CoordinateChange& c);

/// Derivative of mu in p~.
cplx mu_prime(const CoordinateChange& c, cplx pt, FieldVec v);

struct ContourOptions {
  double tol = 1e-8;   // boundary-condition tolerance for open paths
  int samples = 8;     // samples used for that check
  std::uint64_t seed = 11;
  int nodes = 32;
  double min_separation = 0.1;
  /// Distance from p to the set where h is not analytic. Defaults to the
  /// distance to the path; periodic structures need the translates as well.
  std::function<double(const Point&, FieldVec)> clearance;
};

/// h(p, v) = \int_gamma(v) lambda(t, p, v) dt. For an open path the boundary
/// term [lambda(t,p2) f(p1,t)] minus the endpoint-motion term g(p1)(t_end)
/// lambda(t_end,p2) - g(p1)(t_start) lambda(t_start,p2) must vanish; it is
/// checked numerically and a domain_violation is raised otherwise.
Potential potential_from_contour(const EnhancedGT& e,
                                 std::function<PathSpec(FieldVec)> path,
                                 const ContourOptions& opt = {});

// ---------------------------------------------------------------------------
// Lie algebroid view

struct AlgebroidTable {
  int order = 0;
  cplx z;
  /// f_{i,j}(z): Taylor coefficients of f - 1/(p1 - p2) about (z, z), 0 <= i, j <= order.
  std::vector<std::vector<cplx>> f_coeffs;
  /// e[k] for 2 <= k <= 2*order + 2 as fiber vectors, e_{i+2} = g^{(i)}(z) / i!.
  /// e_1 = d/dz has no fiber part; e[0] and e[1] stay empty.
  std::vector<std::vector<cplx>> e;
  /// bracket[i][j][k]: coefficient of e_k in [e_i, e_j] for 1 <= i, j <= order + 1.
  std::vector<std::vector<std::vector<cplx>>> bracket;
  /// Largest scaled mismatch between the table and Lie brackets of the e_k
  /// computed directly by differentiation.
  double table_defect = 0.0;

  int max_bracket_index() const { return order + 1; }
};

AlgebroidTable algebroid_constants(const GTStructure& s, const Point& z, FieldVec v, int order,
                                   int nodes = 32);

/// Structure constants from the table formula alone, given f_{i,j}.
std::vector<std::vector<std::vector<cplx>>> algebroid_bracket_table(
    const std::vector<std::vector<cplx>>& f_coeffs, int order);

// ---------------------------------------------------------------------------
// Sampling shared with the other modules.

struct StructureSample {
  std::vector<Point> points;
  std::vector<cplx> fields;
  double radius = 0.0;  // safe differentiation radius
};

/// Draws `count` samples with `npoints` points each; deterministic in opt.seed.
std::vector<StructureSample> draw_samples(const GTStructure& s, int npoints, int count,
                                          const VerifyOptions& opt,
                                          const std::function<double(const StructureSample&)>&
                                              extra_clearance = {});

/// Largest scaled difference of g and f between two structures on the same
/// fiber, over samples drawn from `a`.
double structure_distance(const GTStructure& a, const GTStructure& b, const VerifyOptions& opt);

/// Fault-injection helpers used by tests and the acceptance suite.
GTStructure scale_f(const GTStructure& s, cplx factor);
GTStructure perturb_f(const GTStructure& s, std::function<cplx(const Point&, const Point&, FieldVec)> delta);

}  // namespace gtw
