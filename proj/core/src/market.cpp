#include "invcon/market.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>

namespace invcon {
namespace {

// splitmix64; used both to mix (base, index) pairs and to seed the engine.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform double in (0, 1], 53-bit resolution. Implementation-independent,
// unlike std::uniform_real_distribution.
double canonical(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

class Drawer {
 public:
  Drawer(Distribution dist, std::uint64_t seed) : dist_(dist), rng_(mix64(seed)) {}

  double operator()() {
    switch (dist_) {
      case Distribution::StandardGaussian: {
        if (have_spare_) {
          have_spare_ = false;
          return spare_;
        }
        // Box-Muller
        const double u1 = canonical(rng_);
        const double u2 = canonical(rng_);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
      }
      case Distribution::Rademacher:
        return (rng_() & 1u) ? 1.0 : -1.0;
      case Distribution::UniformUnitVariance:
        return std::sqrt(3.0) * (2.0 * canonical(rng_) - 1.0);
    }
    throw std::logic_error("unreachable distribution");
  }

 private:
  Distribution dist_;
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace

std::string to_string(Distribution d) {
  switch (d) {
    case Distribution::StandardGaussian: return "standard-gaussian";
    case Distribution::Rademacher: return "rademacher";
    case Distribution::UniformUnitVariance: return "uniform-unit-variance";
  }
  return "?";
}

Distribution distribution_from_string(const std::string& name) {
  if (name == "standard-gaussian") return Distribution::StandardGaussian;
  if (name == "rademacher") return Distribution::Rademacher;
  if (name == "uniform-unit-variance") return Distribution::UniformUnitVariance;
  throw std::invalid_argument("unknown distribution: " + name);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return mix64(base ^ mix64(index + 0x9e3779b97f4a7c15ULL));
}

MarketSample generate_market(const MarketParams& params) {
  if (params.n_assets < 2) {
    throw std::invalid_argument("generate_market: n_assets must be >= 2");
  }
  if (params.n_scenarios < 1) {
    throw std::invalid_argument("generate_market: n_scenarios must be >= 1");
  }
  const Eigen::Index n = params.n_assets;
  const Eigen::Index p = params.n_scenarios;
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));

  Drawer draw(params.distribution, params.seed);
  Eigen::MatrixXd entries(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index mu = 0; mu < p; ++mu) {
      entries(i, mu) = draw() * inv_sqrt_n;
    }
  }
  return MarketSample{params, std::move(entries)};
}

WishartMetric wishart(const MarketSample& sample) {
  const Eigen::Index n = sample.n_assets();
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  j.selfadjointView<Eigen::Lower>().rankUpdate(sample.entries);
  j.triangularView<Eigen::StrictlyUpper>() = j.transpose();
  return WishartMetric{std::move(j)};
}

double risk(const Portfolio& w, const WishartMetric& metric) {
  if (w.size() != metric.matrix.rows()) {
    throw std::invalid_argument("risk: portfolio/metric dimension mismatch");
  }
  return 0.5 * w.dot(metric.matrix * w);
}

double concentration(const Portfolio& w) {
  return w.squaredNorm() / static_cast<double>(w.size());
}

double budget_residual(const Portfolio& w) {
  return w.sum() / static_cast<double>(w.size()) - 1.0;
}

void write_sample_csv(std::ostream& out, const MarketSample& sample) {
  const double sqrt_n = std::sqrt(static_cast<double>(sample.n_assets()));
  char buf[64];
  for (Eigen::Index i = 0; i < sample.n_assets(); ++i) {
    for (Eigen::Index mu = 0; mu < sample.n_scenarios(); ++mu) {
      std::snprintf(buf, sizeof buf, "%.17g", sample.entries(i, mu) * sqrt_n);
      if (mu > 0) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace invcon
