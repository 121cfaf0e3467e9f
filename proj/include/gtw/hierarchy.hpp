#pragma once

// Whitham-type hierarchies given by potentials h_1..h_N of an (enhanced) GT
// structure: the compatibility tensor of the pseudo-potential system, its
// dimension D, the hydrodynamic coefficients, and reconstruction of f and
// lambda from the potentials.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gtw/catalog.hpp"
#include "gtw/gibbons_tsarev.hpp"
#include "gtw/gt_core.hpp"

namespace gtw {

using CMatrix = Eigen::MatrixXcd;

struct PotentialFamily {
  std::string label;
  EnhancedGT structure;  // lambda may be empty; g, f and clearance are used when present
  std::vector<Potential> h;

  /// Distance from z to every pole of the structure and the potentials.
  double clearance(const Point& z, FieldVec v) const;
};

/// The catalog potentials of an entry (differences only).
PotentialFamily family_from(const CatalogEntry& entry);

/// `count` points from the structure's sampler at least min_separation from
/// every pole; deterministic in seed.
std::vector<Point> sample_z(const PotentialFamily& fam, FieldVec v, int count, std::uint64_t seed,
                            double min_separation = 0.1);

/// Rows 0..m-1: h_i' dh_j/dv_l - h_j' dh_i/dv_l; rows m..2m-1 the same for
/// (j, k); rows 2m..3m-1 for (k, i). One column per z sample.
CMatrix compatibility_tensor(const PotentialFamily& fam, int i, int j, int k, FieldVec v,
                             std::span<const Point> zs, int nodes = 32);

struct DimensionResult {
  int D = 0;
  int D_doubled = 0;                 // with twice the z samples
  std::vector<int> D_sweep;          // over svd_tol in {1e-10, 1e-8, 1e-6}
  bool stable = false;               // every count above agrees
  std::vector<double> singular_values;
};

/// Numerical rank relative to the largest singular value. Throws
/// invalid_argument with fewer than 3m + 5 samples.
DimensionResult dimension_D(const PotentialFamily& fam, int i, int j, int k, FieldVec v, int z_samples,
                            std::uint64_t seed, double svd_tol = 1e-8, int nodes = 32);

struct HydroSystem {
  int D = 0;
  int m = 0;
  /// D x m each: sum_l a_rl dv_l/dt_i + b_rl dv_l/dt_j + c_rl dv_l/dt_k = 0.
  CMatrix a, b, c;
  std::vector<int> basis_rows;  // tensor rows chosen as S_1..S_D
  double expansion_residual = 0.0;  // relative, on the fitting samples
  double holdout_residual = 0.0;    // relative, on fresh z samples
  int stacked_rank = 0;             // rank of [a | b | c]
};

/// Throws non_convergence when the expansion residual exceeds svd_tol.
HydroSystem hydro_coefficients(const PotentialFamily& fam, int i, int j, int k, FieldVec v, int z_samples,
                               std::uint64_t seed, double svd_tol = 1e-8, int nodes = 32);

/// f from the potentials h_i, h_j:
/// sum_k (h_i'(p1) h_j(p2)_{v_k} - h_j'(p1) h_i(p2)_{v_k}) g_k(p1)
///   / (h_j'(p1) h_i'(p2) - h_j'(p2) h_i'(p1)).
cplx reconstructed_f(const PotentialFamily& fam, int i, int j, const Point& p1, const Point& p2, FieldVec v,
                     const DiffContext& dc);
/// lambda = (f(p1,p2) h_i'(p2) + g(p1)(h_i(p2))) / h_i'(p1).
cplx reconstructed_lambda(const PotentialFamily& fam, int i, const Point& p1, const Point& p2, FieldVec v,
                          const DiffContext& dc);

/// Compares against the structure's f and against every other pair (i', j').
/// Samples whose denominator nearly vanishes are redrawn and counted in the
/// "resampled" metric.
VerificationReport reconstruct_f(const PotentialFamily& fam, int i, int j, const VerifyOptions& opt);
/// Compares against every other i' and against lambda when the family has it.
VerificationReport reconstruct_lambda(const PotentialFamily& fam, int i, const VerifyOptions& opt);

/// h_j'(p1) d_1(h_i(p2)) = h_i'(p1) d_1(h_j(p2)) for every pair, with d_1
/// taken through the first-order GT system.
VerificationReport integrability_criterion(const PotentialFamily& fam, const GTSystem& sys, const VerifyOptions& opt);

}  // namespace gtw
