#pragma once

#include "invcon/market.hpp"
#include "invcon/optimizer.hpp"
#include "invcon/replica.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace invcon {

/// A disorder-averaged campaign: for every kappa on the grid, M independent
/// markets, both solver modes per market, means and standard errors over the
/// converged trials.
struct CampaignSpec {
  Eigen::Index n_assets = 0;
  Eigen::Index n_scenarios = 0;
  Distribution distribution = Distribution::StandardGaussian;
  std::vector<double> kappas;
  int n_trials = 10;  // M
  std::uint64_t base_seed = 1;
  /// Step-size template; positive magnitudes (Minimize signs). The campaign
  /// negates them for the Maximize runs.
  SolverConfig solver = SolverConfig::defaults(SolverMode::Minimize);

  double scenario_ratio() const {
    return static_cast<double>(n_scenarios) / static_cast<double>(n_assets);
  }
};

void validate(const CampaignSpec& spec);

struct TrialRecord {
  int trial = 0;              // m
  std::uint64_t seed = 0;     // seed of X^m
  double q_max = 0.0;
  double q_min = 0.0;
  bool converged_max = false;
  bool converged_min = false;
  double budget_residual_max = 0.0;
  double budget_residual_min = 0.0;
  double risk_residual_max = 0.0;
  double risk_residual_min = 0.0;
  std::int64_t iterations_max = 0;
  std::int64_t iterations_min = 0;
};

struct KappaSummary {
  double kappa = 0.0;
  double q_max_mean = 0.0;
  double q_max_stderr = 0.0;
  double q_min_mean = 0.0;
  double q_min_stderr = 0.0;
  int n_converged_max = 0;
  int n_converged_min = 0;
  double replica_q_max = 0.0;
  double replica_q_min = 0.0;
};

struct ExperimentSummary {
  CampaignSpec spec;
  std::vector<KappaSummary> rows;                 // one per kappa, grid order
  std::vector<std::vector<TrialRecord>> trials;   // [kappa index][m]
  std::vector<std::string> warnings;              // non-converged trials etc.
};

class CampaignError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Runs the campaign with `jobs` worker threads (1 = serial). Trial (kappa_j, m)
/// regenerates X^m from derive_seed(base_seed, m) and runs both modes on the
/// same sample. Output is bit-identical for a fixed spec regardless of `jobs`;
/// aggregation always happens in grid order. Throws CampaignError when every
/// trial of some kappa fails to converge in one of the modes.
ExperimentSummary run_campaign(const CampaignSpec& spec, int jobs = 1);

struct DeviationRow {
  double kappa = 0.0;
  double rel_dev_max = 0.0;  // (mean - replica)/replica
  double z_max = 0.0;        // (mean - replica)/stderr; inf when stderr = 0
  double rel_dev_min = 0.0;
  double z_min = 0.0;
};

std::vector<DeviationRow> compare(const ExperimentSummary& summary);

/// Header: kappa,q_max_mean,q_max_stderr,q_min_mean,q_min_stderr,n_max,n_min,
/// replica_q_max,replica_q_min. One row per kappa, 17 significant digits.
void write_results_csv(std::ostream& out, const ExperimentSummary& summary);

/// Replica curves only, on a dense inclusive grid: kappa,replica_q_max,replica_q_min.
void write_replica_curve_csv(std::ostream& out, double alpha, double kappa_start,
                             double kappa_stop, double kappa_step);

/// Plain-text key=value round trip for CampaignSpec.
void write_config(std::ostream& out, const CampaignSpec& spec);
CampaignSpec parse_config(std::istream& in);

}  // namespace invcon
