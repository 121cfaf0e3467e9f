#pragma once

// The Gibbons-Tsarev system of a GT structure. With w_i = d_i v_1 and the
// distinguished field v_1 (any coordinate, the first by default):
//
//   d_j p_i   = Phi(p_j, p_i) w_j,    Phi(a, b) = f(a, b) / g_1(a)
//   d_j v_l   = G_l(p_j) w_j,         G_l(a)    = g_l(a) / g_1(a)
//   d_j w_i   = qhat(p_i, p_j) w_i w_j          (i != j)
//
// qhat(p1, p2) = 2 f(p1,p2)_{p2} / g_1(p1)
//              + (f(p1,p2) d/dp2 + g(p1)) (g_1(p2)) / (g_1(p1) g_1(p2)).

#include <vector>

#include "gtw/gt_core.hpp"

namespace gtw {

struct GTSystem {
  GTStructure source;
  int M = 2;
  int distinguished = 0;
  int nodes = 32;

  cplx g1(const Point& a, FieldVec v) const;
  cplx phi(const Point& a, const Point& b, FieldVec v) const;
  std::vector<cplx> G(const Point& a, FieldVec v) const;
  /// radius: circle radius for the derivatives inside qhat; nodes = 0 means
  /// this->nodes.
  cplx qhat(const Point& a, const Point& b, FieldVec v, double radius, int nodes = 0) const;
};

/// Throws invalid_argument for m = 0 or M < 1, domain_violation when g_1
/// vanishes at every probe point.
GTSystem build_system(const GTStructure& s, int M, int distinguished = 0, int nodes = 32);

struct ReductionState {
  std::vector<Point> p;  // p_1..p_M
  std::vector<cplx> v;   // fields
  std::vector<cplx> w;   // d_i v_1
};

/// Distance from the state to every singular locus involved, including
/// pairwise point separation.
double state_clearance(const GTSystem& sys, const ReductionState& st);

/// Random state: fields and points from the source structure, w in a box of
/// half-width w_scale. Deterministic in the rng.
ReductionState sample_state(const GTSystem& sys, Rng& rng, double w_scale = 1.0,
                            double min_separation = 0.15);

/// Throws domain_violation unless the points are pairwise distinct, g_1 is
/// nonzero at each of them and the dimensions match.
void validate_state(const GTSystem& sys, const ReductionState& st);

/// Max scaled mismatch of d_i d_j X - d_j d_i X over all i < j and every X
/// whose mixed derivative the system determines (p_k and w_k for k not in
/// {i, j}, and every field). Needs M >= 3 for the p_k and w_k conditions.
VerificationReport compatibility_residual(const GTSystem& sys, const ReductionState& st, double tol);

/// The same over `count` seeded states; the report's max is over all states.
VerificationReport compatibility_suite(const GTSystem& sys, int count, std::uint64_t seed, double tol,
                                       Exec exec = Exec::parallel);

/// |qhat(p1,p2) - qhat(p2,p1)| scaled, at the first two points of the state.
double qhat_symmetry_defect(const GTSystem& sys, const ReductionState& st);

// ---------------------------------------------------------------------------
// Goursat integration on a tensor grid in (r_1, .., r_M).

/// Axis data: along the r_k axis p_k(r) = p0 + dp r + ddp r^2 / 2 and
/// w_k(r) = w0 + dw r; everything else follows from the system.
struct AxisData {
  ReductionState origin;
  std::vector<cplx> dp, ddp, dw;
};

/// Quadratic axis data around a sampled state, all slopes scaled by `scale`.
AxisData sample_axis_data(const GTSystem& sys, std::uint64_t seed, double scale);

struct ReductionGrid {
  int steps = 0;
  double h = 0.0;
  int M = 0;
  /// Flattened row-major over (n_1, .., n_M), each 0..steps.
  std::vector<ReductionState> nodes;
  /// Max over cells in each coordinate plane through the origin of
  /// |mixed difference of v_1 - corner average of qhat w_i w_j|.
  double residual = 0.0;

  const ReductionState& at(std::span<const int> index) const;
};

/// Second-order Taylor steps for p, w and v; Euler steps for d_k p_k and
/// d_k w_k. Throws blow_up with the node index if points collide, g_1
/// vanishes or a value stops being finite.
ReductionGrid integrate_reduction(const GTSystem& sys, const AxisData& data, int steps, double h);

struct ConvergenceResult {
  double residual_h = 0.0;
  double residual_half = 0.0;
  double ratio = 0.0;  // residual_h / residual_half, about 4 for a second-order scheme
};

/// Integrates on [0, steps h]^M with h and again with h/2 (twice the steps).
ConvergenceResult reduction_convergence(const GTSystem& sys, const AxisData& data, int steps, double h);

}  // namespace gtw
