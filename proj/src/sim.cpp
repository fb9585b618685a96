#include "asmpc/sim.hpp"

#include "asmpc/errors.hpp"
#include "asmpc/fir_plant.hpp"
#include "asmpc/rng.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

namespace asmpc::sim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd mat_from_flat(const VectorXd& flat, int rows, int cols) {
  if (flat.size() != static_cast<Eigen::Index>(rows) * cols)
    throw DimensionMismatch("mat_from_flat: size mismatch");
  MatrixXd out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = flat(i * cols + j);
  return out;
}

plant::ImpulseResponse truth_from_config(const ExperimentConfig& cfg) {
  plant::ImpulseResponse truth;
  truth.coefficients = mat_from_flat(cfg.truth, cfg.n_y, cfg.n_u * cfg.m);
  truth.sparsity_index = truth.max_row_nonzeros(1e-12);
  return truth;
}

mpc::MpcConfig controller_config(const ExperimentConfig& cfg) {
  mpc::MpcConfig mc;
  mc.horizon = cfg.horizon;
  mc.Q = mat_from_flat(cfg.Q, cfg.n_y, cfg.n_y);
  mc.S = mat_from_flat(cfg.S, cfg.n_u, cfg.n_u);
  mc.epsilon = cfg.epsilon;
  mc.E = cfg.E.transpose();
  mc.p = cfg.p;
  mc.C = mat_from_flat(cfg.C, static_cast<int>(cfg.g.size()), cfg.n_u);
  mc.g = cfg.g;
  mc.mode = mpc::Robustification::DualLP;
  mc.solver.max_iterations = cfg.solver_max_iterations;
  // The closed-loop input deltas of the paired benchmark compare inputs down
  // to the 1e-4 scale; solve tighter than the library default so the
  // comparison reflects the optima rather than interior-point bias.
  mc.solver.feas_tol = 1e-10;
  mc.solver.gap_tol = 1e-10;
  return mc;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

MatrixXd draw_disturbances(const ExperimentConfig& cfg, std::uint64_t seed_base, int run) {
  RngStream rng = RngStream(seed_base, 0x51D0).split(static_cast<std::uint64_t>(run));
  MatrixXd w(cfg.n_y, cfg.t_end + 1);
  for (int t = 0; t <= cfg.t_end; ++t)
    for (int i = 0; i < cfg.n_y; ++i) w(i, t) = rng.uniform_symmetric(cfg.w_bar(i));
  return w;
}

sparse::Fsps offline_from_config(const ExperimentConfig& cfg) {
  const plant::ImpulseResponse truth = truth_from_config(cfg);
  const plant::DisturbanceModel disturbance = plant::uniform_disturbance(cfg.w_bar);
  return sparse::offline_phase(truth, disturbance, cfg.k_bar, cfg.delta_bar, cfg.c_tilde,
                               cfg.c_bar, cfg.offline_seed, cfg.q_override);
}

TrajectoryLog run_closed_loop(const ExperimentConfig& cfg, EstimatorMode mode,
                              const sparse::Fsps* fsps, const MatrixXd& disturbances) {
  if (disturbances.rows() != cfg.n_y || disturbances.cols() != cfg.t_end + 1)
    throw DimensionMismatch("run_closed_loop: disturbance matrix shape");
  if (mode == EstimatorMode::Sparse && fsps == nullptr)
    throw InvalidArgument("run_closed_loop: sparse mode needs an offline parameter set");

  const int d = cfg.n_u * cfg.m;
  const plant::ImpulseResponse truth = truth_from_config(cfg);
  const plant::ShiftOperators ops = plant::build_shift_operators(cfg.n_u, cfg.m);
  const plant::DisturbanceModel dist = plant::uniform_disturbance(cfg.w_bar);
  const mpc::MpcConfig mc = controller_config(cfg);
  const mpc::AppendedCovariance gamma = mpc::build_gamma(mc.E, dist.variance, d);
  const mpc::Controller controller(mc, ops, gamma);
  const sparse::Fsps* box = (mode == EstimatorMode::Sparse) ? fsps : nullptr;

  TrajectoryLog log;
  log.outputs = MatrixXd::Zero(cfg.n_y, cfg.t_end + 1);
  log.inputs = MatrixXd::Zero(cfg.n_u, cfg.t_end + 1);

  setmem::FpsHistory hist;
  hist.current = setmem::init_fps(VectorXd::Constant(cfg.n_y * d, cfg.fps_lower),
                                  VectorXd::Constant(cfg.n_y * d, cfg.fps_upper));
  estim::RlsState rls{cfg.mu0,
                      cfg.sigma0 * MatrixXd::Identity(cfg.n_y * d, cfg.n_y * d)};
  VectorXd phi = cfg.phi0;
  VectorXd u_prev = VectorXd::Zero(cfg.n_u);
  mpc::ControlSolution previous;
  bool have_previous = false;

  for (int t = 0; t <= cfg.t_end; ++t) {
    if (t > 0) phi = plant::shift_regressor(ops, phi, u_prev);
    const VectorXd y = plant::step(truth, phi, disturbances.col(t));
    log.outputs.col(t) = y;
    if (t >= 1 && mc.E.dot(y) > cfg.p) ++log.constraint_violations;

    // The adaptation loop starts at t = 1; the initial measurement is only
    // recorded for the cost, no estimate or set update happens before the
    // first control step.
    if (t == 0) continue;

    const int before = hist.current.rows();
    const setmem::Polytope previous_fps = hist.current;
    hist.current = setmem::add_measurement_cut(hist.current, phi, y, cfg.w_bar, t);
    hist.cut_count += hist.current.rows() - before;
    setmem::PruneStats stats;
    hist.current = setmem::prune_redundant(hist.current, cfg.fps_cap, &stats);
    hist.pruned_count += stats.removed;
    if (stats.merged > 0) ++hist.merge_events;

    if (!setmem::contains(hist.current, cfg.truth, 1e-8)) ++log.truth_containment_failures;
    if (t > 0) {
      // Sampled support-function monotonicity; cuts only shrink the set.
      RngStream dir_rng(0xD1C7, static_cast<std::uint64_t>(t));
      for (int s = 0; s < 8; ++s) {
        VectorXd dir(cfg.n_y * d);
        for (int i = 0; i < dir.size(); ++i) dir(i) = dir_rng.gaussian();
        const double now = setmem::support_function(hist.current, dir);
        const double was = setmem::support_function(previous_fps, dir);
        if (now > was + 1e-7) ++log.nesting_failures;
      }
    }

    rls = estim::rls_update(rls, phi, y, dist.variance);

    const estim::PointEstimateDomain domain =
        estim::point_estimate_domain(hist.current, box, cfg.exact_ball);
    const VectorXd projected = estim::project_mean(rls, domain);
    const plant::ImpulseResponse mu = estim::reshape_mean(projected, cfg.n_y, d);
    log.final_estimate = projected;

    if (have_previous) {
      ++log.candidate_checks;
      const mpc::CandidateCheck check = mpc::check_shifted_candidate(
          previous, mu, hist.current, phi, y, mc, ops, gamma);
      if (!check.feasible) ++log.candidate_failures;
    }

    auto [u, solution] = controller.solve_step(mu, hist.current, phi, y);
    log.inputs.col(t) = u;
    u_prev = u;
    previous = solution;
    have_previous = true;
  }

  log.fps_history = hist;
  log.cost = closed_loop_cost(log, mc.Q, mc.S);
  return log;
}

double closed_loop_cost(const TrajectoryLog& log, const MatrixXd& Q, const MatrixXd& S) {
  double cost = 0.0;
  for (Eigen::Index t = 0; t < log.outputs.cols(); ++t) {
    cost += log.outputs.col(t).dot(Q * log.outputs.col(t));
    cost += log.inputs.col(t).dot(S * log.inputs.col(t));
  }
  return cost;
}

std::vector<PairedRun> monte_carlo(const ExperimentConfig& cfg, const sparse::Fsps& fsps) {
  std::vector<PairedRun> results(cfg.runs);
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&]() {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= cfg.runs) return;
      try {
        const MatrixXd w = draw_disturbances(cfg, cfg.run_seed_base, r);
        const TrajectoryLog base = run_closed_loop(cfg, EstimatorMode::Baseline, nullptr, w);
        const TrajectoryLog sparse_log =
            run_closed_loop(cfg, EstimatorMode::Sparse, &fsps, w);

        PairedRun pr;
        pr.run = r;
        pr.cost_baseline = base.cost;
        pr.cost_sparse = sparse_log.cost;
        pr.delta_abs_y.resize(cfg.t_end);
        pr.delta_abs_u.resize(cfg.t_end);
        for (int t = 1; t <= cfg.t_end; ++t) {
          pr.delta_abs_y(t - 1) = base.outputs.col(t).template lpNorm<1>() -
                                  sparse_log.outputs.col(t).template lpNorm<1>();
          pr.delta_abs_u(t - 1) = base.inputs.col(t).template lpNorm<1>() -
                                  sparse_log.inputs.col(t).template lpNorm<1>();
        }
        pr.violations_baseline = base.constraint_violations;
        pr.violations_sparse = sparse_log.constraint_violations;
        pr.candidate_failures = base.candidate_failures + sparse_log.candidate_failures;
        pr.truth_containment_failures =
            base.truth_containment_failures + sparse_log.truth_containment_failures;
        pr.nesting_failures = base.nesting_failures + sparse_log.nesting_failures;
        results[r] = std::move(pr);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  unsigned n_threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                       : std::thread::hardware_concurrency();
  if (n_threads == 0) n_threads = 1;
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(cfg.runs));
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (std::thread& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

MonteCarloSummary summarize(const std::vector<PairedRun>& results, int t_end) {
  MonteCarloSummary s;
  s.runs = static_cast<int>(results.size());
  if (results.empty()) return s;
  long neg_y = 0, neg_u = 0, lower = 0;
  long viol_b = 0, viol_s = 0;
  for (const PairedRun& r : results) {
    s.mean_cost_baseline += r.cost_baseline;
    s.mean_cost_sparse += r.cost_sparse;
    if (r.cost_sparse < r.cost_baseline) ++lower;
    neg_y += (r.delta_abs_y.array() < 0.0).count();
    neg_u += (r.delta_abs_u.array() < 0.0).count();
    viol_b += r.violations_baseline;
    viol_s += r.violations_sparse;
    s.candidate_failures += r.candidate_failures;
  }
  s.mean_cost_baseline /= s.runs;
  s.mean_cost_sparse /= s.runs;
  s.mean_improvement = (s.mean_cost_baseline - s.mean_cost_sparse) / s.mean_cost_baseline;
  const double steps = static_cast<double>(s.runs) * t_end;
  s.frac_sparse_lower = static_cast<double>(lower) / s.runs;
  s.frac_delta_y_negative = static_cast<double>(neg_y) / steps;
  s.frac_delta_u_negative = static_cast<double>(neg_u) / steps;
  s.violation_freq_baseline = static_cast<double>(viol_b) / steps;
  s.violation_freq_sparse = static_cast<double>(viol_s) / steps;
  return s;
}

void write_reports(const std::vector<PairedRun>& results, int t_end,
                   const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);

  std::ofstream costs(dir / "costs.csv");
  if (!costs) throw IoError("write_reports: cannot write costs.csv");
  costs << "run,mode,cost\n";
  for (const PairedRun& r : results) {
    costs << r.run << ",baseline," << fmt(r.cost_baseline) << "\n";
    costs << r.run << ",sparse," << fmt(r.cost_sparse) << "\n";
  }

  std::ofstream dy(dir / "delta_y.csv");
  if (!dy) throw IoError("write_reports: cannot write delta_y.csv");
  dy << "run,t,delta_abs_y\n";
  for (const PairedRun& r : results)
    for (int t = 1; t <= t_end; ++t)
      dy << r.run << "," << t << "," << fmt(r.delta_abs_y(t - 1)) << "\n";

  std::ofstream du(dir / "delta_u.csv");
  if (!du) throw IoError("write_reports: cannot write delta_u.csv");
  du << "run,t,delta_abs_u\n";
  for (const PairedRun& r : results)
    for (int t = 1; t <= t_end; ++t)
      du << r.run << "," << t << "," << fmt(r.delta_abs_u(t - 1)) << "\n";

  const MonteCarloSummary s = summarize(results, t_end);
  std::ofstream report(dir / "report.txt");
  if (!report) throw IoError("write_reports: cannot write report.txt");
  report << "runs " << s.runs << "\n";
  report << "mean_cost_baseline " << fmt(s.mean_cost_baseline) << "\n";
  report << "mean_cost_sparse " << fmt(s.mean_cost_sparse) << "\n";
  report << "mean_improvement " << fmt(s.mean_improvement) << "\n";
  report << "frac_sparse_lower " << fmt(s.frac_sparse_lower) << "\n";
  report << "frac_delta_y_negative " << fmt(s.frac_delta_y_negative) << "\n";
  report << "frac_delta_u_negative " << fmt(s.frac_delta_u_negative) << "\n";
  report << "violation_freq_baseline " << fmt(s.violation_freq_baseline) << "\n";
  report << "violation_freq_sparse " << fmt(s.violation_freq_sparse) << "\n";
  report << "candidate_failures " << s.candidate_failures << "\n";
}

}  // namespace asmpc::sim
