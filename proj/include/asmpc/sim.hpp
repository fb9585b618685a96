#pragma once

#include "asmpc/config.hpp"
#include "asmpc/estimator.hpp"
#include "asmpc/mpc.hpp"
#include "asmpc/sparse_recovery.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace asmpc::sim {

enum class EstimatorMode { Baseline, Sparse };

// One closed-loop trajectory. Column t holds the signals applied/measured
// at time t; inputs are zero at t = 0 (no controller output yet).
struct TrajectoryLog {
  Eigen::MatrixXd outputs;  // n_y x (t_end + 1)
  Eigen::MatrixXd inputs;   // n_u x (t_end + 1)
  double cost = 0.0;
  int constraint_violations = 0;   // steps t >= 1 with E*y(t) > p
  int candidate_failures = 0;      // shifted-candidate checks that failed
  int candidate_checks = 0;
  int truth_containment_failures = 0;  // steps where the true parameter left the set
  int nesting_failures = 0;            // sampled support-function monotonicity breaks
  setmem::FpsHistory fps_history;
  Eigen::VectorXd final_estimate;  // vectorized impulse response
};

// Pre-drawn disturbances w(0..t_end), shared between paired runs.
Eigen::MatrixXd draw_disturbances(const ExperimentConfig& cfg, std::uint64_t seed_base, int run);

// Builds the offline sparse parameter set from the configured truth.
sparse::Fsps offline_from_config(const ExperimentConfig& cfg);

TrajectoryLog run_closed_loop(const ExperimentConfig& cfg, EstimatorMode mode,
                              const sparse::Fsps* fsps, const Eigen::MatrixXd& disturbances);

double closed_loop_cost(const TrajectoryLog& log, const Eigen::MatrixXd& Q,
                        const Eigen::MatrixXd& S);

struct PairedRun {
  int run = 0;
  double cost_baseline = 0.0;
  double cost_sparse = 0.0;
  Eigen::VectorXd delta_abs_y;  // |y_base(t)| - |y_sparse(t)|, t = 1..t_end
  Eigen::VectorXd delta_abs_u;
  int violations_baseline = 0;
  int violations_sparse = 0;
  int candidate_failures = 0;
  int truth_containment_failures = 0;
  int nesting_failures = 0;
};

// Runs `cfg.runs` paired closed loops (same disturbances for both
// estimator modes) across a thread pool; results are ordered by run index
// regardless of scheduling.
std::vector<PairedRun> monte_carlo(const ExperimentConfig& cfg, const sparse::Fsps& fsps);

struct MonteCarloSummary {
  int runs = 0;
  double mean_cost_baseline = 0.0;
  double mean_cost_sparse = 0.0;
  double mean_improvement = 0.0;  // relative cost reduction of sparse
  double frac_sparse_lower = 0.0;
  double frac_delta_y_negative = 0.0;
  double frac_delta_u_negative = 0.0;
  double violation_freq_baseline = 0.0;
  double violation_freq_sparse = 0.0;
  long candidate_failures = 0;
};

MonteCarloSummary summarize(const std::vector<PairedRun>& results, int t_end);

// Writes costs.csv, delta_y.csv, delta_u.csv, and report.txt into out_dir.
void write_reports(const std::vector<PairedRun>& results, int t_end, const std::string& out_dir);

}  // namespace asmpc::sim
