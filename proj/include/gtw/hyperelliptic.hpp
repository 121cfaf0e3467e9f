#pragma once

// Period matrices of y^2 = p(p-1)(p-a)(p-b)(p-c) and the Rauch variational
// check of the normalized period matrix.
//
// Cycles come from the chain 0 - 1 - a - b - c. With I_k the integral of a
// differential along the k-th link on the branch continued from far below
// the chain,
//   a1 = 2 I_1,  a2 = 2 I_3,  b1 = 2 (I_2 + I_4),  b2 = 2 I_4,
// and b is negated once if needed so that Im B is positive definite for the
// default moduli box (kBCycleSign).

#include <Eigen/Dense>
#include <array>

#include "gtw/catalog.hpp"
#include "gtw/gt_core.hpp"

namespace gtw {

using Mat2 = Eigen::Matrix2cd;

struct PeriodOptions {
  int panels = 8;   // Gauss-Legendre panels per chain link
  int nodes = 16;   // nodes per panel
  double max_condition = 1e8;
};

struct PeriodData {
  Mat2 a_periods;    // [cycle][basis]: integrals of dp/q and p dp/q over a_1, a_2
  Mat2 b_periods;    // same over b_1, b_2
  Mat2 normalizer;   // C = A^{-1}; omega_beta = sum_k C_{k beta} p^{k-1} dp / q
  Mat2 B;            // normalized b-periods
  double condition = 0.0;  // 2-norm condition number of the A-period matrix
};

/// Chain link integrals of p^k dp / q, k = 0, 1 (links 1..4 stored at 0..3).
std::array<std::array<cplx, 2>, 4> chain_integrals(const CurveModuli& m, const PeriodOptions& opt = {});

PeriodData periods(const CurveModuli& m, const PeriodOptions& opt = {});

/// Relative symmetry defect |B12 - B21| / |B12| and the smallest eigenvalue of Im B
/// (symmetrized).
double symmetry_defect(const Mat2& B);
double min_imag_eigenvalue(const Mat2& B);

/// Normalized differentials in the local coordinate t^2 = p - e at a branch point e.
std::array<cplx, 2> local_differentials(const CurveModuli& m, const PeriodData& pd, int branch);

struct RauchResult {
  VerificationReport report;
  Mat2 finite_difference;  // central difference at delta
  Mat2 finite_difference_half;  // at delta / 2
  Mat2 predicted;          // pi i w_j w_k
  Mat2 ratio;              // finite_difference / (w_j w_k), to compare against pi i
  double deviation = 0.0;       // max relative deviation at delta
  double deviation_half = 0.0;  // same at delta / 2
  double truncation = 0.0;      // |FD(delta) - FD(delta/2)| relative, the two-delta check
};

/// branch: 0, 1, 2 for a, b, c. Passes when both deviations and the two-delta
/// truncation estimate stay below tol.
RauchResult rauch_check(const CurveModuli& m, int branch, double delta, double tol,
                        const PeriodOptions& opt = {});

/// Axioms of the genus-2 structure with the moduli held at m; points on both sheets.
std::vector<VerificationReport> gt_axioms_on_curve(const CurveModuli& m, const VerifyOptions& opt);

}  // namespace gtw
