#include "gtw/hierarchy.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "fan_out.hpp"

namespace gtw {

using Vec = std::vector<cplx>;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRadiusFraction = 0.25;

DiffContext context_at(const PotentialFamily& fam, const Point& z, FieldVec v, int nodes) {
  const double d = fam.clearance(z, v);
  if (!(d > 0.0)) throw NumericError(ErrorKind::pole_hit, "z sample sits on a pole of the family");
  return {kRadiusFraction * std::min(d, 1.0), nodes};
}

void check_index(const PotentialFamily& fam, int i, const char* what) {
  if (i < 0 || i >= static_cast<int>(fam.h.size()))
    throw NumericError(ErrorKind::invalid_argument, std::string(what) + " index out of range");
}

void require_structure(const PotentialFamily& fam) {
  const GTStructure& s = fam.structure.base;
  if (!s.g || !s.f || !s.sample_point || !s.sample_fields)
    throw NumericError(ErrorKind::invalid_argument, "family " + fam.label + " has no GT structure attached");
}

int rank_of(const Eigen::VectorXd& sv, double tol) {
  if (sv.size() == 0 || !(sv(0) > 0.0)) return 0;
  int r = 0;
  for (Eigen::Index q = 0; q < sv.size(); ++q)
    if (sv(q) > tol * sv(0)) ++r;
  return r;
}

bool finite(const CMatrix& m) { return m.allFinite(); }

double relative_fro(const CMatrix& diff, const CMatrix& ref) {
  const double n = ref.norm();
  return n > 0.0 ? diff.norm() / n : diff.norm();
}

VerificationReport report_from(std::string identity, const PotentialFamily& fam, const VerifyOptions& opt,
                               const std::vector<double>& res) {
  VerificationReport r;
  r.identity = std::move(identity);
  r.structure = fam.structure.base.label;
  r.samples = static_cast<int>(res.size());
  r.tol = opt.tol;
  r.seed = opt.seed;
  r.nodes = opt.nodes;
  r.min_separation = opt.min_separation;
  double sum = 0.0;
  bool ok = true;
  for (double x : res) {
    if (!std::isfinite(x)) ok = false;
    r.max_residual = std::max(r.max_residual, x);
    sum += x;
  }
  if (!ok) r.max_residual = kInf;
  r.mean_residual = res.empty() ? 0.0 : sum / static_cast<double>(res.size());
  r.pass = ok && r.max_residual < opt.tol;
  return r;
}

std::vector<StructureSample> family_samples(const PotentialFamily& fam, int count, const VerifyOptions& opt) {
  VerifyOptions vo = opt;
  return draw_samples(fam.structure.base, 2, count, vo, [&](const StructureSample& smp) {
    double d = kInf;
    for (const auto& p : smp.points) d = std::min(d, fam.clearance(p, smp.fields));
    return d;
  });
}

/// Per-sample outcome for checks that may reject a sample.
struct Outcome {
  bool usable = true;
  double residual = 0.0;
};

/// Draws candidates in rounds until `want` usable samples are collected, in
/// index order so the result does not depend on the thread count.
std::vector<double> collect(const PotentialFamily& fam, const VerifyOptions& opt, int& rejected,
                            const std::function<Outcome(const StructureSample&)>& fn) {
  std::vector<double> res;
  rejected = 0;
  VerifyOptions vo = opt;
  for (int round = 0; static_cast<int>(res.size()) < opt.samples; ++round) {
    if (round > 8) throw NumericError(ErrorKind::exhaustion, "too many degenerate samples in " + fam.label);
    const int want = opt.samples - static_cast<int>(res.size());
    const auto samples = family_samples(fam, want, vo);
    const auto out = detail::fan_out<Outcome>(want, opt.exec, [&](int i) { return fn(samples[static_cast<std::size_t>(i)]); });
    for (const auto& o : out) {
      if (o.usable)
        res.push_back(o.residual);
      else
        ++rejected;
    }
    vo.seed = Rng(vo.seed + 0x9E3779B97F4A7C15ull).next();
  }
  return res;
}

double scaled(cplx lhs, cplx rhs) {
  return std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

}  // namespace

double PotentialFamily::clearance(const Point& z, FieldVec v) const {
  double d = kInf;
  if (structure.base.clearance) {
    const Point pts[1] = {z};
    d = structure.base.clearance(pts, v);
  }
  for (const auto& p : h)
    if (p.clearance) d = std::min(d, p.clearance(z, v));
  return d;
}

PotentialFamily family_from(const CatalogEntry& entry) {
  PotentialFamily fam;
  fam.label = entry.structure.base.label;
  fam.structure = entry.structure;
  for (const auto& p : entry.potentials)
    if (p.difference) fam.h.push_back(p);
  return fam;
}

std::vector<Point> sample_z(const PotentialFamily& fam, FieldVec v, int count, std::uint64_t seed,
                            double min_separation) {
  if (!fam.structure.base.sample_point)
    throw NumericError(ErrorKind::invalid_argument, "family " + fam.label + " has no point sampler");
  Rng rng(seed);
  std::vector<Point> out;
  for (int draws = 0; static_cast<int>(out.size()) < count; ++draws) {
    if (draws > 1000 * (count + 1)) throw NumericError(ErrorKind::exhaustion, "z sampling exhausted");
    const Point z = fam.structure.base.sample_point(rng, v);
    if (fam.clearance(z, v) >= min_separation) out.push_back(z);
  }
  return out;
}

CMatrix compatibility_tensor(const PotentialFamily& fam, int i, int j, int k, FieldVec v,
                             std::span<const Point> zs, int nodes) {
  check_index(fam, i, "i");
  check_index(fam, j, "j");
  check_index(fam, k, "k");
  if (i == j || j == k || i == k) throw NumericError(ErrorKind::invalid_argument, "i, j, k must be pairwise distinct");
  const int m = static_cast<int>(v.size());
  const int Z = static_cast<int>(zs.size());
  CMatrix T(3 * m, Z);
  // Columns are independent; fill them per z.
  const auto cols = detail::fan_out<Vec>(Z, Exec::parallel, [&](int c) {
    const Point& z = zs[static_cast<std::size_t>(c)];
    const DiffContext dc = context_at(fam, z, v, nodes);
    const int idx[3] = {i, j, k};
    cplx dz[3];
    Vec dv[3];
    for (int t = 0; t < 3; ++t) {
      const Potential& h = fam.h[static_cast<std::size_t>(idx[t])];
      dz[t] = potential_dp(h, z, v, dc);
      for (int l = 0; l < m; ++l) dv[t].push_back(potential_dv(h, z, v, l, dc));
    }
    Vec col(static_cast<std::size_t>(3 * m));
    const int pairs[3][2] = {{0, 1}, {1, 2}, {2, 0}};
    for (int b = 0; b < 3; ++b) {
      const int x = pairs[b][0], y = pairs[b][1];
      for (int l = 0; l < m; ++l)
        col[static_cast<std::size_t>(b * m + l)] = dz[x] * dv[y][static_cast<std::size_t>(l)] -
                                                   dz[y] * dv[x][static_cast<std::size_t>(l)];
    }
    return col;
  });
  for (int c = 0; c < Z; ++c)
    for (int r = 0; r < 3 * m; ++r) T(r, c) = cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)];
  if (!finite(T)) throw NumericError(ErrorKind::pole_hit, "compatibility tensor is not finite on the z samples");
  return T;
}

DimensionResult dimension_D(const PotentialFamily& fam, int i, int j, int k, FieldVec v, int z_samples,
                            std::uint64_t seed, double svd_tol, int nodes) {
  const int m = static_cast<int>(v.size());
  if (z_samples < 3 * m + 5)
    throw NumericError(ErrorKind::invalid_argument, "dimension_D needs at least 3m + 5 z samples");
  if (!(svd_tol > 0.0 && svd_tol < 1.0)) throw NumericError(ErrorKind::invalid_argument, "svd_tol must lie in (0, 1)");
  auto singular = [&](int count) -> Eigen::VectorXd {
    const auto zs = sample_z(fam, v, count, seed);
    const CMatrix T = compatibility_tensor(fam, i, j, k, v, zs, nodes);
    return Eigen::JacobiSVD<CMatrix>(T).singularValues();
  };
  DimensionResult r;
  const Eigen::VectorXd sv = singular(z_samples);
  r.singular_values.assign(sv.data(), sv.data() + sv.size());
  r.D = rank_of(sv, svd_tol);
  r.D_doubled = rank_of(singular(2 * z_samples), svd_tol);
  r.stable = r.D == r.D_doubled;
  for (double t : {1e-10, 1e-8, 1e-6}) {
    r.D_sweep.push_back(rank_of(sv, t));
    r.stable = r.stable && r.D_sweep.back() == r.D;
  }
  return r;
}

HydroSystem hydro_coefficients(const PotentialFamily& fam, int i, int j, int k, FieldVec v, int z_samples,
                               std::uint64_t seed, double svd_tol, int nodes) {
  const int m = static_cast<int>(v.size());
  if (z_samples < 3 * m + 5)
    throw NumericError(ErrorKind::invalid_argument, "hydro_coefficients needs at least 3m + 5 z samples");
  const auto zs = sample_z(fam, v, z_samples, seed);
  const CMatrix T = compatibility_tensor(fam, i, j, k, v, zs, nodes);
  const Eigen::VectorXd sv = Eigen::JacobiSVD<CMatrix>(T).singularValues();
  HydroSystem h;
  h.m = m;
  h.D = rank_of(sv, svd_tol);
  if (h.D == 0) throw NumericError(ErrorKind::ill_conditioned, "compatibility tensor vanishes on the z samples");

  // Pivoted QR on the transposed tensor picks D independent coefficient
  // functions as the basis S_1..S_D.
  Eigen::ColPivHouseholderQR<CMatrix> qr(T.transpose());
  for (int r = 0; r < h.D; ++r) h.basis_rows.push_back(static_cast<int>(qr.colsPermutation().indices()(r)));
  auto basis_of = [&](const CMatrix& M) {
    CMatrix S(h.D, M.cols());
    for (int r = 0; r < h.D; ++r) S.row(r) = M.row(h.basis_rows[static_cast<std::size_t>(r)]);
    return S;
  };
  const CMatrix S = basis_of(T);
  // K S = T in the least-squares sense.
  const CMatrix K = S.transpose().colPivHouseholderQr().solve(T.transpose()).transpose();
  h.expansion_residual = relative_fro(T - K * S, T);

  h.a.resize(h.D, m);
  h.b.resize(h.D, m);
  h.c.resize(h.D, m);
  for (int r = 0; r < h.D; ++r)
    for (int l = 0; l < m; ++l) {
      h.c(r, l) = K(l, r);
      h.a(r, l) = K(m + l, r);
      h.b(r, l) = K(2 * m + l, r);
    }
  CMatrix stacked(h.D, 3 * m);
  stacked << h.a, h.b, h.c;
  h.stacked_rank = rank_of(Eigen::JacobiSVD<CMatrix>(stacked).singularValues(), svd_tol);

  const auto held = sample_z(fam, v, z_samples, Rng(seed ^ 0xC0FFEEull).next());
  const CMatrix Th = compatibility_tensor(fam, i, j, k, v, held, nodes);
  h.holdout_residual = relative_fro(Th - K * basis_of(Th), Th);

  if (!(h.expansion_residual < svd_tol))
    throw NumericError(ErrorKind::non_convergence,
                       "expansion residual " + std::to_string(h.expansion_residual) + " above svd_tol");
  return h;
}

cplx reconstructed_f(const PotentialFamily& fam, int i, int j, const Point& p1, const Point& p2, FieldVec v,
                     const DiffContext& dc) {
  const Potential& hi = fam.h[static_cast<std::size_t>(i)];
  const Potential& hj = fam.h[static_cast<std::size_t>(j)];
  const Vec g = fam.structure.base.g_at(p1, v);
  const cplx hi1 = potential_dp(hi, p1, v, dc), hj1 = potential_dp(hj, p1, v, dc);
  const cplx hi2 = potential_dp(hi, p2, v, dc), hj2 = potential_dp(hj, p2, v, dc);
  cplx num{0.0, 0.0};
  for (std::size_t k = 0; k < g.size(); ++k) {
    const int kk = static_cast<int>(k);
    num += (hi1 * potential_dv(hj, p2, v, kk, dc) - hj1 * potential_dv(hi, p2, v, kk, dc)) * g[k];
  }
  return num / (hj1 * hi2 - hj2 * hi1);
}

cplx reconstructed_lambda(const PotentialFamily& fam, int i, const Point& p1, const Point& p2, FieldVec v,
                          const DiffContext& dc) {
  const GTStructure& s = fam.structure.base;
  const Potential& h = fam.h[static_cast<std::size_t>(i)];
  const Vec g = s.g_at(p1, v);
  cplx g_h{0.0, 0.0};
  for (std::size_t k = 0; k < g.size(); ++k) g_h += g[k] * potential_dv(h, p2, v, static_cast<int>(k), dc);
  return (s.f(p1, p2, v) * potential_dp(h, p2, v, dc) + g_h) / potential_dp(h, p1, v, dc);
}

VerificationReport reconstruct_f(const PotentialFamily& fam, int i, int j, const VerifyOptions& opt) {
  require_structure(fam);
  check_index(fam, i, "i");
  check_index(fam, j, "j");
  if (i == j) throw NumericError(ErrorKind::invalid_argument, "reconstruct_f needs i != j");
  const int N = static_cast<int>(fam.h.size());
  const GTStructure& s = fam.structure.base;
  int rejected = 0;
  auto res = collect(fam, opt, rejected, [&](const StructureSample& smp) -> Outcome {
    const DiffContext dc{smp.radius, opt.nodes};
    const Point p1 = smp.points[0], p2 = smp.points[1];
    const FieldVec v = smp.fields;
    auto den = [&](int a, int b) {
      const Potential& ha = fam.h[static_cast<std::size_t>(a)];
      const Potential& hb = fam.h[static_cast<std::size_t>(b)];
      const cplx a1 = potential_dp(ha, p1, v, dc), b1 = potential_dp(hb, p1, v, dc);
      const cplx a2 = potential_dp(ha, p2, v, dc), b2 = potential_dp(hb, p2, v, dc);
      return std::abs(b1 * a2 - b2 * a1) / std::max(1e-300, std::abs(b1 * a2) + std::abs(b2 * a1));
    };
    if (den(i, j) < 1e-6) return {false, 0.0};
    const cplx fr = reconstructed_f(fam, i, j, p1, p2, v, dc);
    double r = scaled(fr, s.f(p1, p2, v));
    for (int a = 0; a < N; ++a)
      for (int b = a + 1; b < N; ++b) {
        if ((a == i && b == j) || (a == j && b == i) || den(a, b) < 1e-6) continue;
        r = std::max(r, scaled(reconstructed_f(fam, a, b, p1, p2, v, dc), fr));
      }
    return {true, r};
  });
  auto rep = report_from("reconstruct_f", fam, opt, res);
  rep.metrics = {{"i", static_cast<double>(i)}, {"j", static_cast<double>(j)},
                 {"pairs_checked", static_cast<double>(N * (N - 1) / 2)},
                 {"resampled", static_cast<double>(rejected)}};
  return rep;
}

VerificationReport reconstruct_lambda(const PotentialFamily& fam, int i, const VerifyOptions& opt) {
  require_structure(fam);
  check_index(fam, i, "i");
  const int N = static_cast<int>(fam.h.size());
  int rejected = 0;
  auto res = collect(fam, opt, rejected, [&](const StructureSample& smp) -> Outcome {
    const DiffContext dc{smp.radius, opt.nodes};
    const Point p1 = smp.points[0], p2 = smp.points[1];
    const FieldVec v = smp.fields;
    auto usable = [&](int a) {
      return std::abs(potential_dp(fam.h[static_cast<std::size_t>(a)], p1, v, dc)) > 1e-8;
    };
    if (!usable(i)) return {false, 0.0};
    const cplx li = reconstructed_lambda(fam, i, p1, p2, v, dc);
    double r = 0.0;
    if (fam.structure.lambda) r = scaled(li, fam.structure.lambda(p1, p2, v));
    for (int a = 0; a < N; ++a)
      if (a != i && usable(a)) r = std::max(r, scaled(reconstructed_lambda(fam, a, p1, p2, v, dc), li));
    return {true, r};
  });
  auto rep = report_from("reconstruct_lambda", fam, opt, res);
  rep.metrics = {{"i", static_cast<double>(i)},
                 {"compared_with_lambda", fam.structure.lambda ? 1.0 : 0.0},
                 {"resampled", static_cast<double>(rejected)}};
  return rep;
}

VerificationReport integrability_criterion(const PotentialFamily& fam, const GTSystem& sys,
                                           const VerifyOptions& opt) {
  require_structure(fam);
  const int N = static_cast<int>(fam.h.size());
  if (N < 2) throw NumericError(ErrorKind::invalid_argument, "the criterion needs at least two potentials");
  const GTStructure& s = sys.source;
  // d_1 v_1 is free; one fixed nonzero value per sample.
  std::vector<cplx> w1;
  {
    Rng rng(opt.seed ^ 0xABCDEFull);
    for (int q = 0; q < opt.samples; ++q) w1.push_back(std::polar(rng.uniform(0.5, 2.0), rng.uniform(0.0, 2.0 * kPi)));
  }
  const auto samples = family_samples(fam, opt.samples, opt);
  auto res = detail::fan_out(opt.samples, opt.exec, [&](int q) {
    const auto& smp = samples[static_cast<std::size_t>(q)];
    const DiffContext dc{smp.radius, opt.nodes};
    const Point p1 = smp.points[0], p2 = smp.points[1];
    const FieldVec v = smp.fields;
    const Vec g = s.g_at(p1, v);
    const cplx scale = w1[static_cast<std::size_t>(q)] / sys.g1(p1, v);
    const cplx f12 = s.f(p1, p2, v);
    auto d1 = [&](const Potential& h) {
      cplx acc = f12 * potential_dp(h, p2, v, dc);
      for (std::size_t l = 0; l < g.size(); ++l) acc += g[l] * potential_dv(h, p2, v, static_cast<int>(l), dc);
      return acc * scale;
    };
    double r = 0.0;
    for (int i = 0; i < N; ++i)
      for (int j = i + 1; j < N; ++j) {
        const Potential& hi = fam.h[static_cast<std::size_t>(i)];
        const Potential& hj = fam.h[static_cast<std::size_t>(j)];
        r = std::max(r, scaled(potential_dp(hj, p1, v, dc) * d1(hi), potential_dp(hi, p1, v, dc) * d1(hj)));
      }
    return r;
  });
  auto rep = report_from("integrability_criterion", fam, opt, res);
  rep.metrics = {{"potentials", static_cast<double>(N)}};
  return rep;
}

}  // namespace gtw
