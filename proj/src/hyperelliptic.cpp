#include "gtw/hyperelliptic.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace gtw {

namespace {

// Fixed once for the chain orientation above; see the header comment.
constexpr double kBCycleSign = -1.0;

std::array<cplx, 5> branch_points(const CurveModuli& m) { return {0.0, 1.0, m.a, m.b, m.c}; }

/// Branch of q continued from a base point far below the chain. Each factor
/// has its cut on the upward ray from its branch point, so the chain links
/// themselves are cut-free.
struct LowerBranch {
  std::array<cplx, 5> e;
  cplx p0;
  cplx q0;

  explicit LowerBranch(const CurveModuli& m) : e(branch_points(m)) {
    cplx mid{0.0, 0.0};
    for (cplx x : e) mid += x;
    p0 = mid / 5.0 - cplx{0.0, 50.0};
    q0 = curve_q(p0, 1, m);
  }

  cplx operator()(cplx z) const {
    cplx r = q0;
    for (cplx x : e) r *= std::sqrt((z - x) / (p0 - x));
    return r;
  }
};

}  // namespace

std::array<std::array<cplx, 2>, 4> chain_integrals(const CurveModuli& m, const PeriodOptions& opt) {
  m.validate();
  if (opt.panels < 1 || opt.nodes < 2)
    throw NumericError(ErrorKind::invalid_argument, "period quadrature needs panels >= 1 and nodes >= 2");
  const LowerBranch q(m);
  const auto& gl = gauss_legendre(opt.nodes);
  std::array<std::array<cplx, 2>, 4> out{};
  for (int k = 0; k < 4; ++k) {
    const cplx lo = q.e[static_cast<std::size_t>(k)], hi = q.e[static_cast<std::size_t>(k + 1)];
    const cplx mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    // p = mid + half sin(theta) turns the endpoint 1/sqrt into a smooth integrand.
    std::array<cplx, 2> acc{};
    const double width = kPi / opt.panels;
    for (int pnl = 0; pnl < opt.panels; ++pnl) {
      const double t0 = -0.5 * kPi + pnl * width;
      for (std::size_t j = 0; j < gl.x.size(); ++j) {
        const double th = t0 + 0.5 * width * (gl.x[j] + 1.0);
        const cplx p = mid + half * std::sin(th);
        const cplx w = 0.5 * width * gl.w[j] * half * std::cos(th) / q(p);
        acc[0] += w;
        acc[1] += w * p;
      }
    }
    out[static_cast<std::size_t>(k)] = acc;
  }
  return out;
}

PeriodData periods(const CurveModuli& m, const PeriodOptions& opt) {
  const auto I = chain_integrals(m, opt);
  PeriodData pd;
  for (int k = 0; k < 2; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    pd.a_periods(0, k) = 2.0 * I[0][kk];
    pd.a_periods(1, k) = 2.0 * I[2][kk];
    pd.b_periods(0, k) = kBCycleSign * 2.0 * (I[1][kk] + I[3][kk]);
    pd.b_periods(1, k) = kBCycleSign * 2.0 * I[3][kk];
  }
  Eigen::JacobiSVD<Mat2> svd(pd.a_periods);
  const auto sv = svd.singularValues();
  pd.condition = sv(1) > 0.0 ? sv(0) / sv(1) : std::numeric_limits<double>::infinity();
  if (!(pd.condition < opt.max_condition))
    throw NumericError(ErrorKind::ill_conditioned,
                       "A-period matrix condition number " + std::to_string(pd.condition));
  pd.normalizer = pd.a_periods.inverse();
  pd.B = pd.b_periods * pd.normalizer;
  return pd;
}

double symmetry_defect(const Mat2& B) {
  return std::abs(B(0, 1) - B(1, 0)) / std::max(std::abs(B(0, 1)), 1e-300);
}

double min_imag_eigenvalue(const Mat2& B) {
  Eigen::Matrix2d im = B.imag();
  im = 0.5 * (im + im.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(im);
  return es.eigenvalues()(0);
}

std::array<cplx, 2> local_differentials(const CurveModuli& m, const PeriodData& pd, int branch) {
  if (branch < 0 || branch > 2) throw NumericError(ErrorKind::invalid_argument, "branch must be a, b or c");
  const std::array<cplx, 3> mods{m.a, m.b, m.c};
  const cplx e = mods[static_cast<std::size_t>(branch)];
  // q^2 = (p - e) R(p); with t^2 = p - e, omega = (C1 + C2 p) 2t dt / q -> 2 (C1 + C2 e) / sqrt(R(e)) dt.
  cplx R = e * (e - 1.0);
  for (std::size_t k = 0; k < 3; ++k)
    if (static_cast<int>(k) != branch) R *= e - mods[k];
  const cplx root = std::sqrt(R);
  std::array<cplx, 2> w{};
  for (int al = 0; al < 2; ++al)
    w[static_cast<std::size_t>(al)] = 2.0 * (pd.normalizer(0, al) + pd.normalizer(1, al) * e) / root;
  return w;
}

RauchResult rauch_check(const CurveModuli& m, int branch, double delta, double tol,
                        const PeriodOptions& opt) {
  if (branch < 0 || branch > 2) throw NumericError(ErrorKind::invalid_argument, "branch must be a, b or c");
  if (!(delta > 0.0)) throw NumericError(ErrorKind::invalid_argument, "delta must be positive");
  m.validate(4.0 * delta);
  auto shifted = [&](double d) {
    CurveModuli s = m;
    cplx* t = branch == 0 ? &s.a : branch == 1 ? &s.b : &s.c;
    *t += d;
    return s;
  };
  auto central = [&](double d) -> Mat2 {
    return (periods(shifted(d), opt).B - periods(shifted(-d), opt).B) / (2.0 * d);
  };
  RauchResult r;
  const PeriodData pd = periods(m, opt);
  const auto w = local_differentials(m, pd, branch);
  r.finite_difference = central(delta);
  r.finite_difference_half = central(0.5 * delta);
  const cplx pii{0.0, kPi};
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) {
      const cplx ww = w[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(k)];
      r.predicted(j, k) = pii * ww;
      r.ratio(j, k) = r.finite_difference(j, k) / ww;
    }
  std::vector<double> dev;
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) {
      const double den = std::max(std::abs(r.predicted(j, k)), 1e-300);
      const double d1 = std::abs(r.finite_difference(j, k) - r.predicted(j, k)) / den;
      const double d2 = std::abs(r.finite_difference_half(j, k) - r.predicted(j, k)) / den;
      const double tr = std::abs(r.finite_difference(j, k) - r.finite_difference_half(j, k)) / den;
      r.deviation = std::max(r.deviation, d1);
      r.deviation_half = std::max(r.deviation_half, d2);
      r.truncation = std::max(r.truncation, tr);
      dev.push_back(std::max(d1, d2));
    }
  VerificationReport& rep = r.report;
  rep.identity = std::string("rauch:") + "abc"[branch];
  rep.structure = "genus2";
  rep.samples = 1;
  rep.tol = tol;
  rep.max_residual = std::max({r.deviation, r.deviation_half, r.truncation});
  double sum = 0.0;
  for (double d : dev) sum += d;
  rep.mean_residual = sum / static_cast<double>(dev.size());
  rep.pass = rep.max_residual < tol;
  rep.nodes = opt.nodes;
  rep.metrics = {{"delta", delta},
                 {"deviation", r.deviation},
                 {"deviation_half", r.deviation_half},
                 {"truncation", r.truncation},
                 {"ratio_re", r.ratio(0, 0).real()},
                 {"ratio_im", r.ratio(0, 0).imag()}};
  return r;
}

std::vector<VerificationReport> gt_axioms_on_curve(const CurveModuli& m, const VerifyOptions& opt) {
  return verify_axioms(genus2_from(m), opt);
}

}  // namespace gtw
