#include "invcon/replica.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace invcon {
namespace {

constexpr int kMaxNewtonIters = 10000;
constexpr double kNewtonTol = 1e-12;

double sign_of(SaddleBranch b) { return b == SaddleBranch::Plus ? 1.0 : -1.0; }

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

Vec6 pack(const SaddleState& s) {
  Vec6 x;
  x << s.k, s.theta, s.chi_w, s.q_w, s.chi_w_tilde, s.q_w_tilde;
  return x;
}

SaddleState unpack(const Vec6& x, double beta) {
  return SaddleState{x[0], x[1], x[2], x[3], x[4], x[5], beta};
}

// Raw residuals of the six extremum conditions plus the per-equation scale
// max(1, |lhs|, |rhs|) used for the relative convergence test.
void residuals_raw(const Vec6& x, double alpha, double kappa, double beta,
                   Vec6& f, Vec6& scale) {
  const double k = x[0], th = x[1], cw = x[2], qw = x[3], ct = x[4], qt = x[5];
  const double d = 1.0 + th * cw;

  const double lhs[6] = {k,
                         cw,
                         qw,
                         ct + beta,
                         qt,
                         alpha * cw / (2.0 * d) + alpha * qw / (2.0 * d * d)};
  const double rhs[6] = {ct,
                         1.0 / ct,
                         1.0 + qt / (ct * ct),
                         alpha * th / d,
                         alpha * th * th * qw / (d * d),
                         kappa * (alpha - 1.0) / 2.0};
  for (int i = 0; i < 6; ++i) {
    f[i] = lhs[i] - rhs[i];
    scale[i] = std::max({1.0, std::abs(lhs[i]), std::abs(rhs[i])});
  }
}

Mat6 jacobian(const Vec6& x, double alpha) {
  const double th = x[1], cw = x[2], qw = x[3], ct = x[4], qt = x[5];
  const double d = 1.0 + th * cw;
  const double d2 = d * d, d3 = d2 * d;

  Mat6 j = Mat6::Zero();
  // f0 = k - ct
  j(0, 0) = 1.0;
  j(0, 4) = -1.0;
  // f1 = cw - 1/ct
  j(1, 2) = 1.0;
  j(1, 4) = 1.0 / (ct * ct);
  // f2 = qw - 1 - qt/ct^2
  j(2, 3) = 1.0;
  j(2, 4) = 2.0 * qt / (ct * ct * ct);
  j(2, 5) = -1.0 / (ct * ct);
  // f3 = ct + beta - alpha th / d
  j(3, 1) = -alpha / d2;
  j(3, 2) = alpha * th * th / d2;
  j(3, 4) = 1.0;
  // f4 = qt - alpha th^2 qw / d^2
  j(4, 1) = -2.0 * alpha * th * qw / d3;
  j(4, 2) = 2.0 * alpha * th * th * th * qw / d3;
  j(4, 3) = -alpha * th * th / d2;
  j(4, 5) = 1.0;
  // f5 = alpha cw/(2d) + alpha qw/(2d^2) - kappa(alpha-1)/2
  j(5, 1) = -(alpha / 2.0) * (cw * cw / d2 + 2.0 * qw * cw / d3);
  j(5, 2) = (alpha / 2.0) * (1.0 / d2 - 2.0 * th * qw / d3);
  j(5, 3) = (alpha / 2.0) / d2;
  return j;
}

double scaled_norm(const Vec6& f, const Vec6& scale) {
  double m = 0.0;
  for (int i = 0; i < 6; ++i) m = std::max(m, std::abs(f[i]) / scale[i]);
  return m;
}

// Damped Newton from x0. Returns true on convergence; x holds the last
// iterate either way.
bool newton(double alpha, double kappa, double beta, Vec6& x) {
  Vec6 f, scale;
  residuals_raw(x, alpha, kappa, beta, f, scale);
  double res = scaled_norm(f, scale);
  for (int it = 0; it < kMaxNewtonIters; ++it) {
    if (!std::isfinite(res)) return false;
    if (res < kNewtonTol) return true;

    const Mat6 j = jacobian(x, alpha);
    // Equilibrate: column scale by |x|, row scale to unit max entry. The
    // variables span many orders of magnitude at large |beta|.
    Vec6 dc;
    for (int i = 0; i < 6; ++i) dc[i] = std::max(std::abs(x[i]), 1e-12);
    Mat6 m = j * dc.asDiagonal();
    Vec6 rr;
    for (int i = 0; i < 6; ++i) {
      rr[i] = 1.0 / std::max(1.0, m.row(i).cwiseAbs().maxCoeff());
    }
    m = rr.asDiagonal() * m;
    const Vec6 z = m.partialPivLu().solve(-(rr.asDiagonal() * f));
    const Vec6 dx = dc.asDiagonal() * z;
    if (!dx.allFinite()) return false;

    double lambda = 1.0;
    bool accepted = false;
    Vec6 xt, ft, st;
    while (lambda > 1e-14) {
      xt = x + lambda * dx;
      residuals_raw(xt, alpha, kappa, beta, ft, st);
      const double rt = scaled_norm(ft, st);
      if (std::isfinite(rt) && rt < res) {
        x = xt;
        f = ft;
        scale = st;
        res = rt;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) return false;
  }
  return false;
}

Vec6 asymptotic_start(const ModelPoint& point, double beta, SaddleBranch branch) {
  const double a = point.alpha;
  const double s = sign_of(branch);
  const double u = std::sqrt(std::max(0.0, a - a / point.kappa));
  const double chi = s * u * (a - 1.0) / (beta * (a + s * u));
  if (chi == 0.0 || !std::isfinite(chi)) {
    throw std::invalid_argument(
        "saddle_solve: asymptotic start degenerate (kappa = 1 needs an explicit init)");
  }
  const double c = (1.0 + s * u) / (a - 1.0);
  const double theta = c / chi;
  const double ct = 1.0 / chi;
  const double qw = saddle_asymptotics(point, branch).q_w;
  const double qt = (qw - 1.0) * ct * ct;
  Vec6 x;
  x << ct, theta, chi, qw, ct, qt;
  return x;
}

// Start for the neighbourhood of the degenerate Minus-branch point
// kappa = alpha/(alpha-1), where theta -> 1/2 and chi_w -> -1/beta.
Vec6 fold_start(const ModelPoint& point, double beta, SaddleBranch branch) {
  const double chi = -1.0 / beta;
  const double ct = 1.0 / chi;
  const double qw = saddle_asymptotics(point, branch).q_w;
  const double qt = (qw - 1.0) * ct * ct;
  Vec6 x;
  x << ct, 0.5, chi, qw, ct, qt;
  return x;
}

}  // namespace

void validate(const ModelPoint& point) {
  if (!(point.alpha > 1.0)) {
    throw std::invalid_argument("model point: alpha must be > 1");
  }
  if (!(point.kappa >= 1.0)) {
    throw std::invalid_argument("model point: kappa must be >= 1");
  }
}

double minimal_risk_per_asset(double alpha) {
  if (!(alpha > 1.0)) {
    throw std::invalid_argument("minimal_risk_per_asset: alpha must be > 1");
  }
  return (alpha - 1.0) / 2.0;
}

ReplicaBounds q_bounds(const ModelPoint& point) {
  validate(point);
  const double a = point.alpha, k = point.kappa;
  // (sqrt(a k) +/- sqrt(k-1))^2 expanded; avoids squaring a cancelled root.
  const double s = a * k + k - 1.0;
  const double d = 2.0 * std::sqrt(a * k * (k - 1.0));
  return ReplicaBounds{(s + d) / (a - 1.0), (s - d) / (a - 1.0), point};
}

double q_min_floor_kappa(double alpha) {
  if (!(alpha > 1.0)) {
    throw std::invalid_argument("q_min_floor_kappa: alpha must be > 1");
  }
  return alpha / (alpha - 1.0);
}

double annealed_concentration(double kappa) {
  if (!(kappa >= 1.0)) {
    throw std::invalid_argument("annealed_concentration: kappa must be >= 1");
  }
  return kappa;
}

double dual_kappa(double alpha, const DualPoint& dual) {
  if (!(alpha > 1.0)) {
    throw std::invalid_argument("dual_kappa: alpha must be > 1");
  }
  if (!(dual.tau >= 1.0)) {
    throw std::invalid_argument("dual_kappa: tau must be >= 1");
  }
  const double t = dual.tau;
  const double root = 2.0 * std::sqrt(alpha * t * (t - 1.0));
  const double s = dual.branch == DualBranch::MaxConcentration ? -1.0 : 1.0;
  return ((alpha + 1.0) * t - 1.0 + s * root) / (alpha - 1.0);
}

double dual_risk(double alpha, const DualPoint& dual) {
  if (!(alpha > 1.0)) {
    throw std::invalid_argument("dual_risk: alpha must be > 1");
  }
  if (!(dual.tau >= 1.0)) {
    throw std::invalid_argument("dual_risk: tau must be >= 1");
  }
  const double t = dual.tau;
  const double root = 2.0 * std::sqrt(alpha * t * (t - 1.0));
  const double s = dual.branch == DualBranch::MaxConcentration ? -1.0 : 1.0;
  return (alpha * t + t - 1.0 + s * root) / 2.0;
}

SaddleAsymptotics saddle_asymptotics(const ModelPoint& point, SaddleBranch branch) {
  validate(point);
  const double a = point.alpha, k = point.kappa;
  const double s = sign_of(branch);
  const double u = std::sqrt(std::max(0.0, a - a / k));

  SaddleAsymptotics out;
  out.theta_chi = (1.0 + s * u) / (a - 1.0);
  // The denominator vanishes at kappa = alpha/(alpha-1) on the Minus branch,
  // where theta stays O(1) while |beta| grows; report the ratio as -inf.
  const double denom = 2.0 * a - a / k + s * (a + 1.0) * u;
  out.beta_over_theta =
      denom == 0.0 ? -std::numeric_limits<double>::infinity()
                   : s * (a - 1.0) * (a - 1.0) * u / denom;
  const double sum = a * k + k - 1.0;
  const double diff = 2.0 * std::sqrt(a * k * (k - 1.0));
  out.q_w = (sum + s * diff) / (a - 1.0);
  return out;
}

std::array<double, 6> saddle_residuals(const SaddleState& state, const ModelPoint& point) {
  validate(point);
  Vec6 f, scale;
  residuals_raw(pack(state), point.alpha, point.kappa, state.beta, f, scale);
  std::array<double, 6> out;
  for (int i = 0; i < 6; ++i) out[i] = std::abs(f[i]) / scale[i];
  return out;
}

SaddleState saddle_solve(const ModelPoint& point, double beta,
                         std::optional<SaddleState> init) {
  validate(point);
  if (beta == 0.0 || !std::isfinite(beta)) {
    throw std::invalid_argument("saddle_solve: beta must be finite and nonzero");
  }
  const SaddleBranch branch = beta > 0.0 ? SaddleBranch::Plus : SaddleBranch::Minus;

  std::vector<Vec6> starts;
  if (init) {
    starts.push_back(pack(*init));
  } else {
    const double u = std::sqrt(std::max(0.0, point.alpha - point.alpha / point.kappa));
    const bool near_fold = branch == SaddleBranch::Minus && std::abs(u - 1.0) < 0.1;
    if (near_fold) starts.push_back(fold_start(point, beta, branch));
    starts.push_back(asymptotic_start(point, beta, branch));
    if (!near_fold && branch == SaddleBranch::Minus) {
      starts.push_back(fold_start(point, beta, branch));
    }
  }

  Vec6 last = starts.front();
  for (Vec6 x : starts) {
    if (newton(point.alpha, point.kappa, beta, x)) {
      return unpack(x, beta);
    }
    last = x;
  }
  const SaddleState failed = unpack(last, beta);
  throw SaddleError("saddle_solve: no convergence within iteration cap",
                    saddle_residuals(failed, point));
}

}  // namespace invcon
