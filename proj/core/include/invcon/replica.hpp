#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>

namespace invcon {

/// A point of the model's phase diagram: scenario ratio alpha = p/N > 1 and
/// risk coefficient kappa >= 1 (allowed risk is kappa times the minimum).
struct ModelPoint {
  double alpha = 0.0;
  double kappa = 1.0;
};

void validate(const ModelPoint& point);

/// Minimal investment risk per asset, (alpha - 1)/2. Requires alpha > 1.
double minimal_risk_per_asset(double alpha);

/// Closed-form extremes of the investment concentration over the feasible
/// set: q = (sqrt(alpha kappa) +/- sqrt(kappa - 1))^2 / (alpha - 1).
struct ReplicaBounds {
  double q_max = 0.0;
  double q_min = 0.0;
  ModelPoint point;
};

ReplicaBounds q_bounds(const ModelPoint& point);

/// kappa at which q_min attains its floor value 1, i.e. alpha/(alpha - 1).
double q_min_floor_kappa(double alpha);

/// Concentration of the annealed system, where the max and min coincide:
/// q = kappa.
double annealed_concentration(double kappa);

/// max-concentration <-> min-risk, min-concentration <-> max-risk.
enum class DualBranch { MaxConcentration, MinConcentration };

struct DualPoint {
  double tau = 1.0;  // target concentration, >= 1
  DualBranch branch = DualBranch::MaxConcentration;
};

/// Risk coefficient of the dual fixed-concentration problem,
/// ((alpha+1) tau - 1 -/+ 2 sqrt(alpha tau (tau-1))) / (alpha - 1).
///
/// Caution: q_min is not injective in kappa. The MinConcentration formula
/// returns the preimage with kappa >= alpha/(alpha-1); for
/// kappa < alpha/(alpha-1) the MaxConcentration formula is the inverse of
/// q_min instead.
double dual_kappa(double alpha, const DualPoint& dual);

/// Extremal risk per asset at fixed concentration tau,
/// (alpha tau + tau - 1 -/+ 2 sqrt(alpha tau (tau-1))) / 2.
/// Identically equal to dual_kappa * minimal_risk_per_asset.
double dual_risk(double alpha, const DualPoint& dual);

/// Plus: beta -> +inf selects the maximum concentration; Minus: beta -> -inf
/// selects the minimum.
enum class SaddleBranch { Plus, Minus };

struct SaddleAsymptotics {
  double theta_chi = 0.0;       // theta * chi_w
  double beta_over_theta = 0.0; // may be +/-inf at kappa = alpha/(alpha-1), Minus
  double q_w = 0.0;             // matches the corresponding bound of q_bounds
};

SaddleAsymptotics saddle_asymptotics(const ModelPoint& point, SaddleBranch branch);

/// The six order parameters / multipliers of the finite-beta replica
/// symmetric extremum.
struct SaddleState {
  double k = 0.0;
  double theta = 0.0;
  double chi_w = 0.0;
  double q_w = 0.0;
  double chi_w_tilde = 0.0;
  double q_w_tilde = 0.0;
  double beta = 0.0;
};

/// Relative residuals of the six extremum conditions at `state`, each scaled
/// by max(1, |lhs|, |rhs|).
std::array<double, 6> saddle_residuals(const SaddleState& state, const ModelPoint& point);

class SaddleError : public std::runtime_error {
 public:
  SaddleError(const std::string& what, const std::array<double, 6>& residuals)
      : std::runtime_error(what), residuals_(residuals) {}
  const std::array<double, 6>& residuals() const { return residuals_; }

 private:
  std::array<double, 6> residuals_;
};

/// Solves the six simultaneous extremum conditions at finite beta by damped
/// Newton with the analytic Jacobian. Without an explicit `init` the start
/// point comes from saddle_asymptotics at the sign of beta; near the
/// degenerate point kappa = alpha/(alpha-1) on the Minus branch a dedicated
/// start (theta = 1/2, chi_w = -1/beta) is used. Throws SaddleError when no
/// start converges; the error carries the last residuals.
SaddleState saddle_solve(const ModelPoint& point, double beta,
                         std::optional<SaddleState> init = std::nullopt);

}  // namespace invcon
