// Command-line driver: offline set construction, single closed-loop runs,
// paired Monte Carlo studies, and report regeneration from saved CSVs.

#include "asmpc/config.hpp"
#include "asmpc/errors.hpp"
#include "asmpc/sim.hpp"
#include "asmpc/sparse_recovery.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeInfeasible = 3;

asmpc::sim::ExperimentConfig load_config(const std::string& path, std::uint64_t seed_override,
                                         int runs_override) {
  asmpc::sim::ExperimentConfig cfg = asmpc::sim::ExperimentConfig::from_file(path);
  if (seed_override != 0) cfg.run_seed_base = seed_override;
  if (runs_override > 0) cfg.runs = runs_override;
  return cfg;
}

asmpc::sparse::Fsps load_fsps_or_die(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    std::cerr << "offline parameter set not found at '" << path
              << "'; run the 'offline' subcommand first\n";
    std::exit(kExitConfigError);
  }
  return asmpc::sparse::load_fsps(path);
}

void write_trajectory(const asmpc::sim::TrajectoryLog& log, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw asmpc::IoError("cannot write " + path);
  os << "t";
  for (int i = 0; i < log.outputs.rows(); ++i) os << ",y" << i;
  for (int i = 0; i < log.inputs.rows(); ++i) os << ",u" << i;
  os << "\n";
  char buf[40];
  for (int t = 0; t < log.outputs.cols(); ++t) {
    os << t;
    for (int i = 0; i < log.outputs.rows(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", log.outputs(i, t));
      os << "," << buf;
    }
    for (int i = 0; i < log.inputs.rows(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", log.inputs(i, t));
      os << "," << buf;
    }
    os << "\n";
  }
}

// Rebuilds report.txt from the CSVs a previous montecarlo call produced.
int regenerate_report(const std::string& dir) {
  std::ifstream costs(std::filesystem::path(dir) / "costs.csv");
  std::ifstream dy(std::filesystem::path(dir) / "delta_y.csv");
  std::ifstream du(std::filesystem::path(dir) / "delta_u.csv");
  if (!costs || !dy || !du) {
    std::cerr << "report: missing csv files under '" << dir << "'\n";
    return kExitConfigError;
  }
  std::map<int, asmpc::sim::PairedRun> by_run;
  std::string line;
  std::getline(costs, line);  // header
  while (std::getline(costs, line)) {
    std::stringstream ss(line);
    std::string run_s, mode, cost_s;
    if (!std::getline(ss, run_s, ',') || !std::getline(ss, mode, ',') ||
        !std::getline(ss, cost_s, ','))
      continue;
    auto& pr = by_run[std::stoi(run_s)];
    pr.run = std::stoi(run_s);
    if (mode == "baseline")
      pr.cost_baseline = std::stod(cost_s);
    else
      pr.cost_sparse = std::stod(cost_s);
  }
  auto read_deltas = [&by_run](std::ifstream& is, bool is_y) {
    std::string row;
    std::getline(is, row);  // header
    std::map<int, std::vector<double>> acc;
    while (std::getline(is, row)) {
      std::stringstream ss(row);
      std::string run_s, t_s, v_s;
      if (!std::getline(ss, run_s, ',') || !std::getline(ss, t_s, ',') ||
          !std::getline(ss, v_s, ','))
        continue;
      acc[std::stoi(run_s)].push_back(std::stod(v_s));
    }
    for (auto& [run, vals] : acc) {
      Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
      if (is_y)
        by_run[run].delta_abs_y = v;
      else
        by_run[run].delta_abs_u = v;
    }
  };
  read_deltas(dy, true);
  read_deltas(du, false);

  std::vector<asmpc::sim::PairedRun> results;
  int t_end = 0;
  for (auto& [run, pr] : by_run) {
    t_end = std::max<int>(t_end, static_cast<int>(pr.delta_abs_y.size()));
    results.push_back(pr);
  }
  const asmpc::sim::MonteCarloSummary s = asmpc::sim::summarize(results, t_end);
  std::cout << "runs " << s.runs << "\n"
            << "mean_cost_baseline " << s.mean_cost_baseline << "\n"
            << "mean_cost_sparse " << s.mean_cost_sparse << "\n"
            << "mean_improvement " << s.mean_improvement << "\n"
            << "frac_sparse_lower " << s.frac_sparse_lower << "\n"
            << "frac_delta_y_negative " << s.frac_delta_y_negative << "\n"
            << "frac_delta_u_negative " << s.frac_delta_u_negative << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive stochastic MPC simulator for sparse FIR systems"};
  app.require_subcommand(1);

  std::string config_path = "configs/tableI.cfg";
  std::string fsps_path = "fsps.dat";
  std::string out_path;
  std::string mode = "sparse";
  std::uint64_t seed = 0;
  int runs = -1;
  int run_index = 0;

  CLI::App* offline = app.add_subcommand("offline", "Build and save the offline parameter set");
  offline->add_option("--config", config_path, "experiment config file");
  offline->add_option("--out", fsps_path, "output path for the parameter set");
  offline->add_option("--seed", seed, "override the offline seed");

  CLI::App* run = app.add_subcommand("run", "Simulate one closed-loop trajectory");
  run->add_option("--config", config_path, "experiment config file");
  run->add_option("--fsps", fsps_path, "offline parameter set (sparse mode)");
  run->add_option("--mode", mode, "estimator mode: sparse|baseline");
  run->add_option("--seed", seed, "override the disturbance seed base");
  run->add_option("--run", run_index, "disturbance sequence index");
  run->add_option("--out", out_path, "trajectory csv path");

  CLI::App* mc = app.add_subcommand("montecarlo", "Paired baseline/sparse study");
  mc->add_option("--config", config_path, "experiment config file");
  mc->add_option("--fsps", fsps_path, "offline parameter set");
  mc->add_option("--runs", runs, "override the run count");
  mc->add_option("--seed", seed, "override the disturbance seed base");
  mc->add_option("--out", out_path, "output directory for csv reports")->required();

  CLI::App* report = app.add_subcommand("report", "Recompute the summary from saved CSVs");
  std::string report_dir;
  report->add_option("--in", report_dir, "directory holding the montecarlo CSVs")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (offline->parsed()) {
      asmpc::sim::ExperimentConfig cfg = load_config(config_path, 0, -1);
      if (seed != 0) cfg.offline_seed = seed;
      const asmpc::sparse::Fsps fsps = asmpc::sim::offline_from_config(cfg);
      asmpc::sparse::save_fsps(fsps, fsps_path);
      std::cout << "saved parameter set (" << fsps.q << " samples) to " << fsps_path << "\n";
      return 0;
    }
    if (run->parsed()) {
      const asmpc::sim::ExperimentConfig cfg = load_config(config_path, seed, -1);
      asmpc::sim::EstimatorMode em;
      asmpc::sparse::Fsps fsps;
      const asmpc::sparse::Fsps* fsps_ptr = nullptr;
      if (mode == "sparse") {
        em = asmpc::sim::EstimatorMode::Sparse;
        fsps = load_fsps_or_die(fsps_path);
        fsps_ptr = &fsps;
      } else if (mode == "baseline") {
        em = asmpc::sim::EstimatorMode::Baseline;
      } else {
        std::cerr << "unknown mode '" << mode << "' (expected sparse|baseline)\n";
        return kExitConfigError;
      }
      const Eigen::MatrixXd w =
          asmpc::sim::draw_disturbances(cfg, cfg.run_seed_base, run_index);
      const asmpc::sim::TrajectoryLog log = asmpc::sim::run_closed_loop(cfg, em, fsps_ptr, w);
      std::cout << "closed-loop cost " << log.cost << ", constraint violations "
                << log.constraint_violations << "\n";
      if (!out_path.empty()) write_trajectory(log, out_path);
      return 0;
    }
    if (mc->parsed()) {
      const asmpc::sim::ExperimentConfig cfg = load_config(config_path, seed, runs);
      const asmpc::sparse::Fsps fsps = load_fsps_or_die(fsps_path);
      const std::vector<asmpc::sim::PairedRun> results = asmpc::sim::monte_carlo(cfg, fsps);
      asmpc::sim::write_reports(results, cfg.t_end, out_path);
      const asmpc::sim::MonteCarloSummary s = asmpc::sim::summarize(results, cfg.t_end);
      std::cout << "runs " << s.runs << ", mean improvement " << 100.0 * s.mean_improvement
                << "%, sparse lower in " << 100.0 * s.frac_sparse_lower << "% of runs\n";
      return 0;
    }
    if (report->parsed()) return regenerate_report(report_dir);
  } catch (const asmpc::InfeasibleAtRuntime& e) {
    std::cerr << "runtime infeasibility: " << e.what() << "\n";
    return kExitRuntimeInfeasible;
  } catch (const asmpc::EmptyDomain& e) {
    std::cerr << "runtime infeasibility: " << e.what() << "\n";
    return kExitRuntimeInfeasible;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const asmpc::IoError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
