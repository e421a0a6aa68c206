#include "invcon/optimizer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace invcon {

SolverConfig SolverConfig::defaults(SolverMode mode) {
  const double s = mode == SolverMode::Minimize ? 1.0 : -1.0;
  SolverConfig c;
  c.eta_w = s * 1e-1;
  c.eta_k = s * 1e-1;
  c.eta_theta = s * 1e-5;
  c.delta = 1e-5;
  c.max_iters = 1000000;
  c.mode = mode;
  return c;
}

void validate(const SolverConfig& config) {
  const bool want_positive = config.mode == SolverMode::Minimize;
  const auto ok = [&](double eta) { return want_positive ? eta > 0.0 : eta < 0.0; };
  if (!ok(config.eta_w) || !ok(config.eta_k) || !ok(config.eta_theta)) {
    throw std::invalid_argument(
        config.mode == SolverMode::Minimize
            ? "solver config: minimize mode needs eta_w, eta_k, eta_theta > 0"
            : "solver config: maximize mode needs eta_w, eta_k, eta_theta < 0");
  }
  if (!(config.delta > 0.0)) {
    throw std::invalid_argument("solver config: delta must be > 0");
  }
  if (config.max_iters < 1) {
    throw std::invalid_argument("solver config: max_iters must be >= 1");
  }
}

double lagrangian(const Portfolio& w, double k, double theta,
                  const WishartMetric& metric, const ModelPoint& point) {
  if (w.size() != metric.matrix.rows()) {
    throw std::invalid_argument("lagrangian: portfolio/metric dimension mismatch");
  }
  validate(point);
  const double n = static_cast<double>(w.size());
  const double eps = minimal_risk_per_asset(point.alpha);
  return 0.5 * w.squaredNorm() + k * (n - w.sum()) +
         theta * (0.5 * w.dot(metric.matrix * w) - n * point.kappa * eps);
}

Gradients gradients(const SolverState& state, const WishartMetric& metric,
                    const ModelPoint& point) {
  if (state.w.size() != metric.matrix.rows()) {
    throw std::invalid_argument("gradients: portfolio/metric dimension mismatch");
  }
  validate(point);
  const double n = static_cast<double>(state.w.size());
  const double eps = minimal_risk_per_asset(point.alpha);
  const Eigen::VectorXd jw = metric.matrix * state.w;
  Gradients g;
  g.gw = (state.w.array() - state.k).matrix();
  g.gw.noalias() += state.theta * jw;
  g.gk = n - state.w.sum();
  g.gtheta = 0.5 * state.w.dot(jw) - n * point.kappa * eps;
  return g;
}

SolveReport solve(const WishartMetric& metric, const ModelPoint& point,
                  const SolverConfig& config, TraceSink trace) {
  validate(point);
  validate(config);
  const Eigen::Index n = metric.matrix.rows();
  const double nd = static_cast<double>(n);
  const double eps = minimal_risk_per_asset(point.alpha);
  const double risk_target = nd * point.kappa * eps;
  const double diverged_norm = 1e9 * std::sqrt(nd);

  Portfolio w = Portfolio::Ones(n);
  double k = 1.0;
  double theta = 1.0;

  Eigen::VectorXd gw(n), w_next(n), jw(n);
  double delta = std::numeric_limits<double>::infinity();
  std::int64_t it = 0;
  bool converged = false;

  const auto emit_trace = [&](std::int64_t step, double d) {
    if (!trace.out) return;
    if (trace.stride > 1 && step % trace.stride != 0) return;
    jw.noalias() = metric.matrix * w;
    const double q = concentration(w);
    const double budget = budget_residual(w);
    const double rrisk = 0.5 * w.dot(jw) / risk_target - 1.0;
    const double lagr = 0.5 * w.squaredNorm() + k * (nd - w.sum()) +
                        theta * (0.5 * w.dot(jw) - risk_target);
    char buf[192];
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g",
                  static_cast<long long>(step), d, lagr, q, budget, rrisk);
    *trace.out << buf << '\n';
  };

  if (trace.out) {
    *trace.out << "step,delta,lagrangian,q_w,budget_residual,risk_residual\n";
  }

  while (it < config.max_iters) {
    jw.noalias() = metric.matrix * w;
    gw = (w.array() - k).matrix();
    gw.noalias() += theta * jw;
    w_next = w - config.eta_w * gw;

    // Multiplier gradients from the updated portfolio.
    jw.noalias() = metric.matrix * w_next;
    const double gk = nd - w_next.sum();
    const double gtheta = 0.5 * w_next.dot(jw) - risk_target;
    const double k_next = k + config.eta_k * gk;
    const double theta_next = theta + config.eta_theta * gtheta;

    delta = (w - w_next).lpNorm<1>() + std::abs(k - k_next) + std::abs(theta - theta_next);
    w.swap(w_next);
    k = k_next;
    theta = theta_next;
    ++it;

    if (!w.allFinite() || w.norm() > diverged_norm) {
      throw DivergenceError("solve: portfolio norm exceeded divergence guard");
    }
    emit_trace(it, delta);
    if (delta < config.delta) {
      converged = true;
      break;
    }
  }

  SolveReport report;
  report.final = SolverState{std::move(w), k, theta, it, delta};
  report.converged = converged;
  report.q_w = concentration(report.final.w);
  report.budget_residual = budget_residual(report.final.w);
  report.risk_residual = risk(report.final.w, metric) / risk_target - 1.0;
  report.iterations = it;
  return report;
}

}  // namespace invcon
