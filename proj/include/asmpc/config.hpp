#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

namespace asmpc::sim {

// Flat key = value experiment description. Vectors are written as
// [a, b, c]; matrices are row-major vectors whose shape is fixed by the
// dimension keys. save() followed by load() reproduces every field
// exactly (all reals are printed with 17 significant digits).
struct ExperimentConfig {
  // Plant.
  int m = 10;
  int n_u = 1;
  int n_y = 1;
  Eigen::VectorXd truth;  // row-major n_y x (n_u*m)
  Eigen::VectorXd w_bar;  // length n_y

  // Controller.
  int horizon = 12;
  double epsilon = 0.1;
  Eigen::VectorXd E;  // length n_y
  double p = 5.0;
  Eigen::VectorXd C;  // row-major rows(g) x n_u
  Eigen::VectorXd g;
  Eigen::VectorXd Q;  // row-major n_y x n_y
  Eigen::VectorXd S;  // row-major n_u x n_u

  // Estimator initialization.
  Eigen::VectorXd mu0;   // length n_y * n_u * m
  double sigma0 = 0.1;   // initial covariance sigma0 * I
  Eigen::VectorXd phi0;  // length n_u * m
  double fps_lower = -3.0;
  double fps_upper = 3.0;
  int fps_cap = 120;

  // Offline recovery.
  int k_bar = 2;
  double delta_bar = 0.1;
  double c_tilde = 1.0;
  double c_bar = 2.8284271247461903;  // 2*sqrt(2)
  int q_override = -1;
  std::uint64_t offline_seed = 20240817;

  // Simulation harness.
  int t_end = 20;
  int runs = 100;
  std::uint64_t run_seed_base = 9000;
  int solver_max_iterations = 800;
  bool exact_ball = true;
  int threads = 0;  // 0 = hardware concurrency

  // Fills the vector-valued fields that depend on the dimensions with the
  // standard defaults when they were not given explicitly.
  void finalize_defaults();
  // Throws InvalidArgument on inconsistent sizes or out-of-range scalars.
  void validate() const;

  static ExperimentConfig from_file(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace asmpc::sim
