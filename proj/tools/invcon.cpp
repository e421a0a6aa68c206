#include "invcon/experiment.hpp"
#include "invcon/market.hpp"
#include "invcon/optimizer.hpp"
#include "invcon/replica.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmtg(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Output selector: stdout by default, file when --out was given.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw std::runtime_error("cannot open output file: " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

// start:stop:step, inclusive of stop within 1e-12.
std::vector<double> parse_grid(const std::string& text) {
  double start = 0, stop = 0, step = 0;
  char extra = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf%c", &start, &stop, &step, &extra) != 3 ||
      !(step > 0.0) || stop < start) {
    throw CLI::ValidationError("--kappa-grid", "expected start:stop:step with step > 0");
  }
  std::vector<double> grid;
  for (long long i = 0;; ++i) {
    const double v = start + static_cast<double>(i) * step;
    if (v > stop + 1e-12) break;
    grid.push_back(v);
  }
  return grid;
}

std::vector<double> parse_kappa_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw CLI::ValidationError("--kappas", "bad number: " + item);
    }
  }
  return out;
}

int cmd_replica(double alpha, const std::vector<double>& kappas,
                const std::string& format, const std::string& out_path) {
  Sink sink(out_path);
  std::ostream& out = sink.stream();
  const bool csv = format == "csv";
  if (csv) {
    out << "kappa,q_max,q_min,annealed_q\n";
  } else {
    out << "kappa        q_max        q_min        annealed_q\n";
  }
  for (double kappa : kappas) {
    const invcon::ReplicaBounds b = invcon::q_bounds({alpha, kappa});
    const double annealed = invcon::annealed_concentration(kappa);
    if (csv) {
      out << fmt17(kappa) << ',' << fmt17(b.q_max) << ',' << fmt17(b.q_min) << ','
          << fmt17(annealed) << '\n';
    } else {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%-12.6g %-12.10g %-12.10g %-12.6g\n", kappa,
                    b.q_max, b.q_min, annealed);
      out << buf;
    }
  }
  return kExitOk;
}

int cmd_saddle(double alpha, double kappa, double beta, const std::string& format,
               const std::string& out_path) {
  const invcon::ModelPoint point{alpha, kappa};
  const invcon::SaddleState state = invcon::saddle_solve(point, beta);
  const auto res = invcon::saddle_residuals(state, point);
  double res_max = 0.0;
  for (double r : res) res_max = std::max(res_max, r);

  Sink sink(out_path);
  std::ostream& out = sink.stream();
  if (format == "csv") {
    out << "alpha,kappa,beta,k,theta,chi_w,q_w,chi_w_tilde,q_w_tilde,chi_w_plus_q_w,"
           "max_residual\n";
    out << fmt17(alpha) << ',' << fmt17(kappa) << ',' << fmt17(beta) << ','
        << fmt17(state.k) << ',' << fmt17(state.theta) << ',' << fmt17(state.chi_w)
        << ',' << fmt17(state.q_w) << ',' << fmt17(state.chi_w_tilde) << ','
        << fmt17(state.q_w_tilde) << ',' << fmt17(state.chi_w + state.q_w) << ','
        << fmt17(res_max) << '\n';
  } else {
    out << "saddle state at alpha=" << fmtg(alpha) << " kappa=" << fmtg(kappa)
        << " beta=" << fmtg(beta) << "\n";
    out << "  k           = " << fmt17(state.k) << "\n";
    out << "  theta       = " << fmt17(state.theta) << "\n";
    out << "  chi_w       = " << fmt17(state.chi_w) << "\n";
    out << "  q_w         = " << fmt17(state.q_w) << "\n";
    out << "  chi_w_tilde = " << fmt17(state.chi_w_tilde) << "\n";
    out << "  q_w_tilde   = " << fmt17(state.q_w_tilde) << "\n";
    out << "  chi_w + q_w = " << fmt17(state.chi_w + state.q_w) << "\n";
    out << "  residuals   =";
    for (double r : res) out << ' ' << fmtg(r);
    out << "\n";
  }
  return kExitOk;
}

int cmd_dual(double alpha, double tau, const std::string& branch_name,
             const std::string& format, const std::string& out_path) {
  const invcon::DualBranch branch = branch_name == "max"
                                        ? invcon::DualBranch::MaxConcentration
                                        : invcon::DualBranch::MinConcentration;
  const invcon::DualPoint dual{tau, branch};
  const double kappa = invcon::dual_kappa(alpha, dual);
  const double risk_per_asset = invcon::dual_risk(alpha, dual);

  // Recover tau from the bounds at the dual kappa.
  const invcon::ReplicaBounds b = invcon::q_bounds({alpha, kappa});
  const double recovered =
      branch == invcon::DualBranch::MaxConcentration ? b.q_max : b.q_min;
  const double err = std::abs(recovered - tau) / std::max(1.0, std::abs(tau));
  const bool ok = err <= 1e-10;

  Sink sink(out_path);
  std::ostream& out = sink.stream();
  if (format == "csv") {
    out << "alpha,tau,branch,kappa,risk_per_asset,recovered_tau,round_trip\n";
    out << fmt17(alpha) << ',' << fmt17(tau) << ',' << branch_name << ','
        << fmt17(kappa) << ',' << fmt17(risk_per_asset) << ',' << fmt17(recovered)
        << ',' << (ok ? "ok" : "mismatch") << '\n';
  } else {
    out << "dual of tau=" << fmtg(tau) << " (" << branch_name
        << "-concentration branch) at alpha=" << fmtg(alpha) << "\n";
    out << "  kappa          = " << fmt17(kappa) << "\n";
    out << "  risk per asset = " << fmt17(risk_per_asset) << "\n";
    out << "  round trip     : q(" << fmtg(kappa) << ") = " << fmt17(recovered)
        << (ok ? "  [OK]" : "  [MISMATCH]") << "\n";
    if (!ok) {
      out << "  note: tau below the kappa=1 collapse value "
          << fmtg(alpha / (alpha - 1.0))
          << " lies outside this branch's invertible range\n";
    }
  }
  return kExitOk;
}

struct SolveFlags {
  std::int64_t n = 0;
  std::int64_t p = 0;
  double kappa = 1.0;
  std::string mode = "min";
  std::uint64_t seed = 1;
  std::string distribution = "standard-gaussian";
  double eta_w = 0.0, eta_k = 0.0, eta_theta = 0.0;  // 0 = use defaults
  double delta = 1e-5;
  std::int64_t max_iters = 1000000;
  std::string trace_path;
  std::int64_t trace_stride = 1;
  std::string dump_sample_path;
};

int cmd_solve(const SolveFlags& flags, const std::string& format,
              const std::string& out_path) {
  invcon::MarketParams params;
  params.n_assets = flags.n;
  params.n_scenarios = flags.p;
  params.distribution = invcon::distribution_from_string(flags.distribution);
  params.seed = flags.seed;

  const invcon::SolverMode mode = flags.mode == "max" ? invcon::SolverMode::Maximize
                                                      : invcon::SolverMode::Minimize;
  invcon::SolverConfig config = invcon::SolverConfig::defaults(mode);
  const double sign = mode == invcon::SolverMode::Minimize ? 1.0 : -1.0;
  if (flags.eta_w != 0.0) config.eta_w = sign * std::abs(flags.eta_w);
  if (flags.eta_k != 0.0) config.eta_k = sign * std::abs(flags.eta_k);
  if (flags.eta_theta != 0.0) config.eta_theta = sign * std::abs(flags.eta_theta);
  config.delta = flags.delta;
  config.max_iters = flags.max_iters;

  const invcon::MarketSample sample = invcon::generate_market(params);
  if (!flags.dump_sample_path.empty()) {
    std::ofstream dump(flags.dump_sample_path, std::ios::binary);
    if (!dump) throw std::runtime_error("cannot open " + flags.dump_sample_path);
    invcon::write_sample_csv(dump, sample);
  }
  const invcon::WishartMetric metric = invcon::wishart(sample);
  const invcon::ModelPoint point{sample.scenario_ratio(), flags.kappa};

  std::ofstream trace_file;
  invcon::TraceSink trace;
  if (!flags.trace_path.empty()) {
    trace_file.open(flags.trace_path, std::ios::binary);
    if (!trace_file) throw std::runtime_error("cannot open " + flags.trace_path);
    trace.out = &trace_file;
    trace.stride = flags.trace_stride;
  }

  const invcon::SolveReport report = invcon::solve(metric, point, config, trace);

  Sink sink(out_path);
  std::ostream& out = sink.stream();
  if (format == "csv") {
    out << "mode,n,p,kappa,seed,converged,iterations,q_w,budget_residual,"
           "risk_residual,k,theta,last_delta\n";
    out << flags.mode << ',' << flags.n << ',' << flags.p << ',' << fmt17(flags.kappa)
        << ',' << flags.seed << ',' << (report.converged ? 1 : 0) << ','
        << report.iterations << ',' << fmt17(report.q_w) << ','
        << fmt17(report.budget_residual) << ',' << fmt17(report.risk_residual) << ','
        << fmt17(report.final.k) << ',' << fmt17(report.final.theta) << ','
        << fmt17(report.final.last_delta) << '\n';
  } else {
    out << (mode == invcon::SolverMode::Minimize ? "minimize" : "maximize")
        << " concentration: N=" << flags.n << " p=" << flags.p
        << " kappa=" << fmtg(flags.kappa) << " seed=" << flags.seed << "\n";
    out << "  converged       = " << (report.converged ? "yes" : "NO") << "\n";
    out << "  iterations      = " << report.iterations << "\n";
    out << "  q_w             = " << fmt17(report.q_w) << "\n";
    out << "  budget residual = " << fmt17(report.budget_residual) << "\n";
    out << "  risk residual   = " << fmt17(report.risk_residual) << "\n";
    out << "  k               = " << fmt17(report.final.k) << "\n";
    out << "  theta           = " << fmt17(report.final.theta) << "\n";
    out << "  last delta      = " << fmt17(report.final.last_delta) << "\n";
  }
  return report.converged ? kExitOk : kExitRuntime;
}

struct CampaignFlags {
  std::string config_path;
  std::int64_t n = 0;
  std::int64_t p = 0;
  std::string kappas;
  int trials = 10;
  std::uint64_t base_seed = 1;
  std::string distribution = "standard-gaussian";
  double eta_w = 0.0, eta_k = 0.0, eta_theta = 0.0;
  double delta = 1e-5;
  std::int64_t max_iters = 1000000;
  int jobs = 0;
  std::string curve_out;
  double curve_step = 0.01;
  std::string write_config_path;
};

int cmd_campaign(const CampaignFlags& flags, const std::string& format,
                 const std::string& out_path) {
  invcon::CampaignSpec spec;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw std::runtime_error("cannot open config: " + flags.config_path);
    spec = invcon::parse_config(in);
  } else {
    spec.n_assets = flags.n;
    spec.n_scenarios = flags.p;
    spec.distribution = invcon::distribution_from_string(flags.distribution);
    spec.kappas = parse_kappa_list(flags.kappas);
    spec.n_trials = flags.trials;
    spec.base_seed = flags.base_seed;
    spec.solver = invcon::SolverConfig::defaults(invcon::SolverMode::Minimize);
    if (flags.eta_w != 0.0) spec.solver.eta_w = flags.eta_w;
    if (flags.eta_k != 0.0) spec.solver.eta_k = flags.eta_k;
    if (flags.eta_theta != 0.0) spec.solver.eta_theta = flags.eta_theta;
    spec.solver.delta = flags.delta;
    spec.solver.max_iters = flags.max_iters;
  }

  if (!flags.write_config_path.empty()) {
    std::ofstream cfg(flags.write_config_path, std::ios::binary);
    if (!cfg) throw std::runtime_error("cannot open " + flags.write_config_path);
    invcon::write_config(cfg, spec);
  }

  const int jobs = flags.jobs > 0
                       ? flags.jobs
                       : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const invcon::ExperimentSummary summary = invcon::run_campaign(spec, jobs);

  for (const invcon::KappaSummary& row : summary.rows) {
    std::cerr << "kappa=" << fmtg(row.kappa) << " q_max=" << fmtg(row.q_max_mean)
              << "+-" << fmtg(row.q_max_stderr) << " (replica " << fmtg(row.replica_q_max)
              << ", n=" << row.n_converged_max << ")  q_min=" << fmtg(row.q_min_mean)
              << "+-" << fmtg(row.q_min_stderr) << " (replica " << fmtg(row.replica_q_min)
              << ", n=" << row.n_converged_min << ")\n";
  }
  for (const std::string& w : summary.warnings) {
    std::cerr << "warning: " << w << "\n";
  }

  if (!flags.curve_out.empty()) {
    std::ofstream curve(flags.curve_out, std::ios::binary);
    if (!curve) throw std::runtime_error("cannot open " + flags.curve_out);
    const double lo = *std::min_element(spec.kappas.begin(), spec.kappas.end());
    const double hi = *std::max_element(spec.kappas.begin(), spec.kappas.end());
    invcon::write_replica_curve_csv(curve, spec.scenario_ratio(), lo, hi,
                                    flags.curve_step);
  }

  Sink sink(out_path);
  std::ostream& out = sink.stream();
  if (format == "csv" || !out_path.empty()) {
    invcon::write_results_csv(out, summary);
  } else {
    out << "kappa      q_max_mean   q_max_se     q_min_mean   q_min_se     n_max n_min"
           "  replica_q_max  replica_q_min\n";
    for (const invcon::KappaSummary& r : summary.rows) {
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "%-10.6g %-12.8g %-12.4g %-12.8g %-12.4g %-5d %-5d %-14.10g %-14.10g\n",
                    r.kappa, r.q_max_mean, r.q_max_stderr, r.q_min_mean, r.q_min_stderr,
                    r.n_converged_max, r.n_converged_min, r.replica_q_max,
                    r.replica_q_min);
      out << buf;
    }
    const auto devs = invcon::compare(summary);
    out << "\ndeviation vs replica:\n";
    out << "kappa      rel_dev_max  z_max        rel_dev_min  z_min\n";
    for (const invcon::DeviationRow& d : devs) {
      char buf[192];
      std::snprintf(buf, sizeof buf, "%-10.6g %-12.4g %-12.4g %-12.4g %-12.4g\n",
                    d.kappa, d.rel_dev_max, d.z_max, d.rel_dev_min, d.z_min);
      out << buf;
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"invcon: extremes of portfolio investment concentration under "
               "budget and risk constraints"};
  app.require_subcommand(1);
  app.fallthrough();  // accept --format/--out after the subcommand as well

  std::string format = "table";
  std::string out_path;
  app.add_option("--format", format, "output format: table or csv")
      ->check(CLI::IsMember({"table", "csv"}));
  app.add_option("--out", out_path, "write output to a file instead of stdout");

  // replica
  auto* replica = app.add_subcommand("replica", "closed-form concentration bounds");
  double r_alpha = 0.0, r_kappa = 0.0;
  std::string r_grid;
  replica->add_option("--alpha", r_alpha, "scenario ratio p/N (> 1)")->required();
  auto* r_kappa_opt = replica->add_option("--kappa", r_kappa, "risk coefficient (>= 1)");
  auto* r_grid_opt =
      replica->add_option("--kappa-grid", r_grid, "grid start:stop:step (inclusive)");
  r_kappa_opt->excludes(r_grid_opt);

  // saddle
  auto* saddle = app.add_subcommand("saddle", "finite-beta saddle point diagnostics");
  double s_alpha = 0.0, s_kappa = 0.0, s_beta = 0.0;
  saddle->add_option("--alpha", s_alpha)->required();
  saddle->add_option("--kappa", s_kappa)->required();
  saddle->add_option("--beta", s_beta, "inverse temperature (finite, nonzero)")
      ->required();

  // dual
  auto* dual = app.add_subcommand("dual", "duality map from target concentration tau");
  double d_alpha = 0.0, d_tau = 0.0;
  std::string d_branch;
  dual->add_option("--alpha", d_alpha)->required();
  dual->add_option("--tau", d_tau, "target concentration (>= 1)")->required();
  dual->add_option("--branch", d_branch, "max or min concentration branch")
      ->required()
      ->check(CLI::IsMember({"max", "min"}));

  // solve
  auto* solve = app.add_subcommand("solve", "single-sample Lagrangian descent");
  SolveFlags sf;
  solve->add_option("--n", sf.n, "number of assets N")->required();
  solve->add_option("--p", sf.p, "number of scenarios p")->required();
  solve->add_option("--kappa", sf.kappa)->required();
  solve->add_option("--mode", sf.mode)->check(CLI::IsMember({"min", "max"}));
  solve->add_option("--seed", sf.seed);
  solve->add_option("--distribution", sf.distribution)
      ->check(CLI::IsMember(
          {"standard-gaussian", "rademacher", "uniform-unit-variance"}));
  solve->add_option("--eta-w", sf.eta_w, "step magnitude for w");
  solve->add_option("--eta-k", sf.eta_k, "step magnitude for k");
  solve->add_option("--eta-theta", sf.eta_theta, "step magnitude for theta");
  solve->add_option("--delta", sf.delta, "stopping threshold");
  solve->add_option("--max-iters", sf.max_iters);
  solve->add_option("--trace", sf.trace_path, "stream per-step CSV trace to file");
  solve->add_option("--trace-stride", sf.trace_stride)->check(CLI::PositiveNumber);
  solve->add_option("--dump-sample", sf.dump_sample_path,
                    "write the raw return-rate matrix as CSV");

  // campaign
  auto* campaign = app.add_subcommand("campaign", "disorder-averaged campaign");
  CampaignFlags cf;
  campaign->add_option("--config", cf.config_path, "key=value campaign config file");
  campaign->add_option("--n", cf.n);
  campaign->add_option("--p", cf.p);
  campaign->add_option("--kappas", cf.kappas, "comma-separated kappa grid");
  campaign->add_option("--trials", cf.trials, "trials per kappa (M)");
  campaign->add_option("--base-seed", cf.base_seed);
  campaign->add_option("--distribution", cf.distribution)
      ->check(CLI::IsMember(
          {"standard-gaussian", "rademacher", "uniform-unit-variance"}));
  campaign->add_option("--eta-w", cf.eta_w);
  campaign->add_option("--eta-k", cf.eta_k);
  campaign->add_option("--eta-theta", cf.eta_theta);
  campaign->add_option("--delta", cf.delta);
  campaign->add_option("--max-iters", cf.max_iters);
  campaign->add_option("--jobs", cf.jobs, "worker threads (default: processors)");
  campaign->add_option("--curve-out", cf.curve_out,
                       "write dense replica curve CSV to file");
  campaign->add_option("--curve-step", cf.curve_step)->check(CLI::PositiveNumber);
  campaign->add_option("--write-config", cf.write_config_path,
                       "serialize the effective campaign config to file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (replica->parsed()) {
      std::vector<double> kappas;
      if (r_grid_opt->count() > 0) {
        kappas = parse_grid(r_grid);
      } else if (r_kappa_opt->count() > 0) {
        kappas.push_back(r_kappa);
      } else {
        std::cerr << "error: --kappa or --kappa-grid is required\n";
        return kExitUsage;
      }
      return cmd_replica(r_alpha, kappas, format, out_path);
    }
    if (saddle->parsed()) return cmd_saddle(s_alpha, s_kappa, s_beta, format, out_path);
    if (dual->parsed()) return cmd_dual(d_alpha, d_tau, d_branch, format, out_path);
    if (solve->parsed()) return cmd_solve(sf, format, out_path);
    if (campaign->parsed()) {
      if (cf.config_path.empty() && (cf.n == 0 || cf.p == 0 || cf.kappas.empty())) {
        std::cerr << "error: campaign needs --config or --n/--p/--kappas\n";
        return kExitUsage;
      }
      return cmd_campaign(cf, format, out_path);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const invcon::SaddleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
