#include "invcon/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

namespace invcon {
namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Pairwise sum over a fixed index order; deterministic and accurate.
double pairwise_sum(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  if (hi - lo <= 4) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += v[i];
    return s;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  int n = 0;
};

MeanStderr mean_stderr(const std::vector<double>& values) {
  MeanStderr out;
  out.n = static_cast<int>(values.size());
  if (out.n == 0) return out;
  out.mean = pairwise_sum(values, 0, values.size()) / out.n;
  if (out.n == 1) return out;  // stderr reported as 0 with n = 1
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - out.mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq, 0, sq.size()) / (out.n - 1);
  out.stderr_ = std::sqrt(var / out.n);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void validate(const CampaignSpec& spec) {
  if (spec.n_assets < 2 || spec.n_scenarios < 1) {
    throw std::invalid_argument("campaign: invalid market dimensions");
  }
  if (!(spec.scenario_ratio() > 1.0)) {
    throw std::invalid_argument("campaign: scenario ratio p/N must be > 1");
  }
  if (spec.kappas.empty()) {
    throw std::invalid_argument("campaign: kappa grid must be nonempty");
  }
  for (double k : spec.kappas) {
    if (!(k >= 1.0)) throw std::invalid_argument("campaign: every kappa must be >= 1");
  }
  if (spec.n_trials < 1) {
    throw std::invalid_argument("campaign: n_trials must be >= 1");
  }
  SolverConfig tmpl = spec.solver;
  tmpl.mode = SolverMode::Minimize;
  validate(tmpl);  // template stores Minimize-signed magnitudes
}

ExperimentSummary run_campaign(const CampaignSpec& spec, int jobs) {
  validate(spec);
  const std::size_t n_kappa = spec.kappas.size();
  const std::size_t n_tasks = n_kappa * static_cast<std::size_t>(spec.n_trials);
  const double alpha = spec.scenario_ratio();

  std::vector<TrialRecord> results(n_tasks);

  SolverConfig cfg_min = spec.solver;
  cfg_min.mode = SolverMode::Minimize;
  SolverConfig cfg_max = cfg_min;
  cfg_max.eta_w = -cfg_min.eta_w;
  cfg_max.eta_k = -cfg_min.eta_k;
  cfg_max.eta_theta = -cfg_min.eta_theta;
  cfg_max.mode = SolverMode::Maximize;

  const auto run_task = [&](std::size_t task) {
    const std::size_t j = task / spec.n_trials;
    const int m = static_cast<int>(task % spec.n_trials);
    const ModelPoint point{alpha, spec.kappas[j]};

    MarketParams params;
    params.n_assets = spec.n_assets;
    params.n_scenarios = spec.n_scenarios;
    params.distribution = spec.distribution;
    params.seed = derive_seed(spec.base_seed, static_cast<std::uint64_t>(m));

    const MarketSample sample = generate_market(params);
    const WishartMetric metric = wishart(sample);

    TrialRecord rec;
    rec.trial = m;
    rec.seed = params.seed;
    try {
      const SolveReport max_report = solve(metric, point, cfg_max);
      rec.q_max = max_report.q_w;
      rec.converged_max = max_report.converged;
      rec.budget_residual_max = max_report.budget_residual;
      rec.risk_residual_max = max_report.risk_residual;
      rec.iterations_max = max_report.iterations;
    } catch (const DivergenceError&) {
      rec.converged_max = false;
      rec.q_max = std::numeric_limits<double>::quiet_NaN();
    }
    try {
      const SolveReport min_report = solve(metric, point, cfg_min);
      rec.q_min = min_report.q_w;
      rec.converged_min = min_report.converged;
      rec.budget_residual_min = min_report.budget_residual;
      rec.risk_residual_min = min_report.risk_residual;
      rec.iterations_min = min_report.iterations;
    } catch (const DivergenceError&) {
      rec.converged_min = false;
      rec.q_min = std::numeric_limits<double>::quiet_NaN();
    }
    results[task] = rec;
  };

  const int workers = std::max(1, jobs);
  if (workers == 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t t = next.fetch_add(1);
          if (t >= n_tasks) return;
          run_task(t);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  // Deterministic aggregation in grid order.
  ExperimentSummary summary;
  summary.spec = spec;
  summary.rows.reserve(n_kappa);
  summary.trials.resize(n_kappa);
  for (std::size_t j = 0; j < n_kappa; ++j) {
    std::vector<double> max_vals, min_vals;
    auto& trial_list = summary.trials[j];
    for (int m = 0; m < spec.n_trials; ++m) {
      const TrialRecord& rec = results[j * spec.n_trials + m];
      trial_list.push_back(rec);
      if (rec.converged_max) max_vals.push_back(rec.q_max);
      if (rec.converged_min) min_vals.push_back(rec.q_min);
    }
    const double kappa = spec.kappas[j];
    if (max_vals.empty() || min_vals.empty()) {
      std::ostringstream msg;
      msg << "campaign: every trial failed to converge at kappa = " << kappa
          << (max_vals.empty() ? " (maximize)" : " (minimize)");
      throw CampaignError(msg.str());
    }
    if (static_cast<int>(max_vals.size()) < spec.n_trials ||
        static_cast<int>(min_vals.size()) < spec.n_trials) {
      std::ostringstream msg;
      msg << "kappa = " << kappa << ": converged " << max_vals.size() << "/"
          << spec.n_trials << " (maximize), " << min_vals.size() << "/"
          << spec.n_trials << " (minimize); non-converged trials excluded";
      summary.warnings.push_back(msg.str());
    }

    const MeanStderr max_ms = mean_stderr(max_vals);
    const MeanStderr min_ms = mean_stderr(min_vals);
    const ReplicaBounds bounds = q_bounds(ModelPoint{alpha, kappa});

    KappaSummary row;
    row.kappa = kappa;
    row.q_max_mean = max_ms.mean;
    row.q_max_stderr = max_ms.stderr_;
    row.q_min_mean = min_ms.mean;
    row.q_min_stderr = min_ms.stderr_;
    row.n_converged_max = max_ms.n;
    row.n_converged_min = min_ms.n;
    row.replica_q_max = bounds.q_max;
    row.replica_q_min = bounds.q_min;
    summary.rows.push_back(row);
  }
  return summary;
}

std::vector<DeviationRow> compare(const ExperimentSummary& summary) {
  std::vector<DeviationRow> out;
  out.reserve(summary.rows.size());
  for (const KappaSummary& row : summary.rows) {
    DeviationRow d;
    d.kappa = row.kappa;
    d.rel_dev_max = (row.q_max_mean - row.replica_q_max) / row.replica_q_max;
    d.rel_dev_min = (row.q_min_mean - row.replica_q_min) / row.replica_q_min;
    d.z_max = row.q_max_stderr > 0.0
                  ? (row.q_max_mean - row.replica_q_max) / row.q_max_stderr
                  : std::numeric_limits<double>::infinity();
    d.z_min = row.q_min_stderr > 0.0
                  ? (row.q_min_mean - row.replica_q_min) / row.q_min_stderr
                  : std::numeric_limits<double>::infinity();
    out.push_back(d);
  }
  return out;
}

void write_results_csv(std::ostream& out, const ExperimentSummary& summary) {
  out << "kappa,q_max_mean,q_max_stderr,q_min_mean,q_min_stderr,n_max,n_min,"
         "replica_q_max,replica_q_min\n";
  for (const KappaSummary& r : summary.rows) {
    out << fmt17(r.kappa) << ',' << fmt17(r.q_max_mean) << ',' << fmt17(r.q_max_stderr)
        << ',' << fmt17(r.q_min_mean) << ',' << fmt17(r.q_min_stderr) << ','
        << r.n_converged_max << ',' << r.n_converged_min << ','
        << fmt17(r.replica_q_max) << ',' << fmt17(r.replica_q_min) << '\n';
  }
}

void write_replica_curve_csv(std::ostream& out, double alpha, double kappa_start,
                             double kappa_stop, double kappa_step) {
  if (!(kappa_step > 0.0) || !(kappa_stop >= kappa_start)) {
    throw std::invalid_argument("replica curve: bad kappa grid");
  }
  out << "kappa,replica_q_max,replica_q_min\n";
  for (std::int64_t i = 0;; ++i) {
    const double kappa = kappa_start + static_cast<double>(i) * kappa_step;
    if (kappa > kappa_stop + 1e-12) break;
    const ReplicaBounds b = q_bounds(ModelPoint{alpha, kappa});
    out << fmt17(kappa) << ',' << fmt17(b.q_max) << ',' << fmt17(b.q_min) << '\n';
  }
}

void write_config(std::ostream& out, const CampaignSpec& spec) {
  out << "n_assets=" << spec.n_assets << '\n';
  out << "n_scenarios=" << spec.n_scenarios << '\n';
  out << "distribution=" << to_string(spec.distribution) << '\n';
  out << "kappas=";
  for (std::size_t i = 0; i < spec.kappas.size(); ++i) {
    if (i > 0) out << ',';
    out << fmt17(spec.kappas[i]);
  }
  out << '\n';
  out << "n_trials=" << spec.n_trials << '\n';
  out << "base_seed=" << spec.base_seed << '\n';
  out << "eta_w=" << fmt17(spec.solver.eta_w) << '\n';
  out << "eta_k=" << fmt17(spec.solver.eta_k) << '\n';
  out << "eta_theta=" << fmt17(spec.solver.eta_theta) << '\n';
  out << "delta=" << fmt17(spec.solver.delta) << '\n';
  out << "max_iters=" << spec.solver.max_iters << '\n';
}

CampaignSpec parse_config(std::istream& in) {
  CampaignSpec spec;
  bool have_assets = false, have_scenarios = false, have_kappas = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    try {
      if (key == "n_assets") {
        spec.n_assets = std::stoll(value);
        have_assets = true;
      } else if (key == "n_scenarios") {
        spec.n_scenarios = std::stoll(value);
        have_scenarios = true;
      } else if (key == "distribution") {
        spec.distribution = distribution_from_string(value);
      } else if (key == "kappas") {
        spec.kappas.clear();
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
          spec.kappas.push_back(std::stod(trim(item)));
        }
        have_kappas = true;
      } else if (key == "n_trials") {
        spec.n_trials = std::stoi(value);
      } else if (key == "base_seed") {
        spec.base_seed = std::stoull(value);
      } else if (key == "eta_w") {
        spec.solver.eta_w = std::stod(value);
      } else if (key == "eta_k") {
        spec.solver.eta_k = std::stod(value);
      } else if (key == "eta_theta") {
        spec.solver.eta_theta = std::stod(value);
      } else if (key == "delta") {
        spec.solver.delta = std::stod(value);
      } else if (key == "max_iters") {
        spec.solver.max_iters = std::stoll(value);
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": bad value for '" + key + "'");
    }
  }
  if (!have_assets || !have_scenarios || !have_kappas) {
    throw std::invalid_argument("config: n_assets, n_scenarios and kappas are required");
  }
  validate(spec);
  return spec;
}

}  // namespace invcon
