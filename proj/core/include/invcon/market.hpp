#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>

namespace invcon {

/// A portfolio is a length-N weight vector; short positions are allowed.
using Portfolio = Eigen::VectorXd;

enum class Distribution {
  StandardGaussian,
  Rademacher,
  UniformUnitVariance,  // uniform on [-sqrt(3), sqrt(3)]
};

std::string to_string(Distribution d);
Distribution distribution_from_string(const std::string& name);

struct MarketParams {
  Eigen::Index n_assets = 0;     // N
  Eigen::Index n_scenarios = 0;  // p
  Distribution distribution = Distribution::StandardGaussian;
  std::uint64_t seed = 0;

  double scenario_ratio() const {
    return static_cast<double>(n_scenarios) / static_cast<double>(n_assets);
  }
};

/// One disorder realization. `entries` is the N x p matrix of modified
/// return rates already scaled by 1/sqrt(N); raw draws have zero mean and
/// unit variance. Immutable after construction, safe to share across threads.
struct MarketSample {
  MarketParams params;
  Eigen::MatrixXd entries;  // N x p, pre-scaled

  Eigen::Index n_assets() const { return entries.rows(); }
  Eigen::Index n_scenarios() const { return entries.cols(); }
  double scenario_ratio() const {
    return static_cast<double>(entries.cols()) / static_cast<double>(entries.rows());
  }
};

/// J = X X^T built from the pre-scaled sample, i.e.
/// J_ij = (1/N) sum_mu x_imu x_jmu. Symmetric by construction and PSD.
struct WishartMetric {
  Eigen::MatrixXd matrix;  // N x N

  Eigen::Index n_assets() const { return matrix.rows(); }
};

/// Deterministic stream split: the seed for trial `index` derived from `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// Draws an N x p i.i.d. sample for the given parameters. Deterministic for a
/// fixed seed, bit-identical on regeneration.
MarketSample generate_market(const MarketParams& params);

WishartMetric wishart(const MarketSample& sample);

/// Half the squared Mahalanobis distance, (1/2) w^T J w.
double risk(const Portfolio& w, const WishartMetric& metric);

/// Investment concentration q_w = (1/N) sum_i w_i^2.
double concentration(const Portfolio& w);

/// (sum_i w_i)/N - 1; zero iff the budget constraint sum_i w_i = N holds.
double budget_residual(const Portfolio& w);

/// Writes raw (unscaled) x_imu values, one row per asset, one column per
/// scenario, comma separated with 17 significant digits.
void write_sample_csv(std::ostream& out, const MarketSample& sample);

}  // namespace invcon
