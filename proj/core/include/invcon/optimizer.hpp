#pragma once

#include "invcon/market.hpp"
#include "invcon/replica.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>

namespace invcon {

enum class SolverMode { Minimize, Maximize };

/// Step sizes and stopping rule for the Lagrangian descent. Minimize mode
/// needs all three steps positive, Maximize all three negative.
struct SolverConfig {
  double eta_w = 0.0;
  double eta_k = 0.0;
  double eta_theta = 0.0;
  double delta = 1e-5;
  std::int64_t max_iters = 1000000;
  SolverMode mode = SolverMode::Minimize;

  /// Reference step sizes (|eta_k| = |eta_w| = 1e-1, |eta_theta| = 1e-5,
  /// delta = 1e-5), negated for Maximize. Suited to N of a few hundred at
  /// alpha ~ 3; for other sizes rescale eta_k and eta_theta like 1/N (both
  /// multiplier gradients are extensive).
  static SolverConfig defaults(SolverMode mode);
};

void validate(const SolverConfig& config);

struct SolverState {
  Portfolio w;
  double k = 1.0;
  double theta = 1.0;
  std::int64_t step = 0;
  double last_delta = 0.0;  // Delta of the most recent update
};

struct SolveReport {
  SolverState final;
  bool converged = false;
  double q_w = 0.0;
  double budget_residual = 0.0;
  double risk_residual = 0.0;  // (1/2) w^T J w / (N kappa eps) - 1
  std::int64_t iterations = 0;
};

class DivergenceError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// L(w, k, theta) = (1/2) w^T w + k (N - e^T w) + theta ((1/2) w^T J w - N kappa eps).
double lagrangian(const Portfolio& w, double k, double theta,
                  const WishartMetric& metric, const ModelPoint& point);

struct Gradients {
  Eigen::VectorXd gw;  // w - k e + theta J w
  double gk = 0.0;     // N - e^T w
  double gtheta = 0.0; // (1/2) w^T J w - N kappa eps
};

Gradients gradients(const SolverState& state, const WishartMetric& metric,
                    const ModelPoint& point);

/// Streams one CSV row per `stride` iterations: step, delta, L, q_w,
/// budget residual, risk residual.
struct TraceSink {
  std::ostream* out = nullptr;
  std::int64_t stride = 1;
};

/// Runs the multiplier steepest descent from w = e, k = theta = 1:
///   w   <- w - eta_w (w - k e + theta J w)
///   k   <- k + eta_k (N - e^T w)
///   theta <- theta + eta_theta ((1/2) w^T J w - N kappa eps)
/// with the multiplier gradients evaluated at the freshly updated w
/// (the simultaneous update diverges at reference step sizes). Stops when
/// Delta = sum_i |w_i - w_i'| + |k - k'| + |theta - theta'| < delta, or at
/// max_iters with converged = false. Throws DivergenceError when ||w||
/// exceeds 1e9 sqrt(N) or turns non-finite.
SolveReport solve(const WishartMetric& metric, const ModelPoint& point,
                  const SolverConfig& config, TraceSink trace = {});

}  // namespace invcon
