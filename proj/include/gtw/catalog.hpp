#pragma once

// Builtin structures: rational (genus 0), elliptic (genus 1), the genus-2
// hyperelliptic example and the Benney family, with their potentials.

#include <string>
#include <vector>

#include "gtw/gt_core.hpp"

namespace gtw {

struct StructureSpec {
  std::string family = "genus0";  // genus0 | genus1 | genus2 | benney
  int n = 1;                      // puncture count (ignored for genus2)
};

struct CatalogEntry {
  std::string family;
  EnhancedGT structure;  // lambda is empty when the family has no enhancement
  std::vector<Potential> potentials;
  /// Raw h_j; only their differences are claimed to be potentials.
  std::vector<Potential> building_blocks;

  bool enhanced() const { return static_cast<bool>(structure.lambda); }
};

const std::vector<std::string>& family_ids();
CatalogEntry make_structure(const StructureSpec& spec);

/// f = p2(p2-1)/((p1-p2)p1(p1-1)), g_i = u_i(u_i-1)/((p-u_i)p(p-1)), lambda = 1/(p1-p2).
CatalogEntry genus0(int n);
/// Fields (tau, u_1..u_n). f = rho(p1-p2) - rho(p1), lambda = f - 2 pi i.
CatalogEntry genus1(int n);
/// Fields (u_1..u_n). g_i = 1/(p-u_i), f = lambda = 1/(p1-p2).
CatalogEntry benney(int n);

/// Sample non-affine coordinate changes p = mu(p~, v):
///   "quad": p~ + 0.1 p~^2 + 0.05 v_1
///   "sin":  p~ + 0.1 sin p~ + 0.05 v_1 p~
const std::vector<std::string>& coordinate_change_ids();
CoordinateChange coordinate_change(const std::string& id);

// ---------------------------------------------------------------------------
// Genus 2: y^2 = p(p-1)(p-a)(p-b)(p-c), fields (a, b, c).

struct CurveModuli {
  cplx a, b, c;

  /// Throws invalid_modulus unless {0, 1, a, b, c} are pairwise distinct.
  void validate(double min_gap = 0.0) const;
  double separation() const;
};

/// Sheet-resolved square root of the quintic. The cuts are [0,1], [a,b] and
/// the horizontal ray from c to the right; `sheet` flips the sign.
cplx curve_q(cplx p, int sheet, const CurveModuli& m);
/// dq/dp = quintic'(p) / (2q).
cplx curve_q_dp(cplx p, int sheet, const CurveModuli& m);
/// dq/d(modulus k), k = 0, 1, 2 for a, b, c; e.g. dq/da = -p(p-1)(p-b)(p-c)/(2q).
cplx curve_q_dmod(cplx p, int sheet, const CurveModuli& m, int k);
/// Distance from p to the cut system and the branch points.
double curve_clearance(cplx p, const CurveModuli& m);
/// Default moduli box: a = 1.7, b = 2.5, c = 3.3 shifted by up to 0.25 in each
/// direction, keeping {0, 1, a, b, c} at least 0.3 apart.
CurveModuli sample_moduli(Rng& rng);

GTStructure genus2();
GTStructure genus2_from(const CurveModuli& fixed);  // moduli still vary as fields

/// Level-l potential of the collided genus-1 family (fields as in the collided structure).
Potential genus1_collided_potential(const std::vector<CollisionGroup>& groups, int group, int level);
/// Level-l potential of a collided genus-0 family.
Potential genus0_collided_potential(const std::vector<CollisionGroup>& groups, int group, int level);

}  // namespace gtw
