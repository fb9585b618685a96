#pragma once

#include "asmpc/fir_plant.hpp"
#include "asmpc/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>

namespace asmpc::sparse {

struct OfflineDataset {
  Eigen::MatrixXd sensing;  // q x (n_u*m), rows are offline regressors
  Eigen::MatrixXd outputs;  // q x n_y
  int q = 0;
};

// Feasible Sparse Parameter Set. centers/radii_l2 carry the recovery-error
// ball per output row; box_lower/upper is the componentwise interval hull of
// the denoising constraint set intersected with that ball, and is what the
// online projection consumes. The exact constraint sets are kept as
// ellipsoids x'Gx - 2 g_i'x + c_i <= 0 for the flag-gated exact projection.
struct Fsps {
  Eigen::MatrixXd centers;    // n_y x dim
  Eigen::VectorXd radii_l2;   // n_y
  Eigen::MatrixXd box_lower;  // n_y x dim
  Eigen::MatrixXd box_upper;  // n_y x dim
  double constant_c_bar = 0.0;
  int q = 0;
  std::uint64_t seed = 0;

  Eigen::MatrixXd gram;        // dim x dim
  Eigen::MatrixXd ell_linear;  // n_y x dim
  Eigen::VectorXd ell_const;   // n_y

  int dim() const { return static_cast<int>(centers.cols()); }
  int n_outputs() const { return static_cast<int>(centers.rows()); }
};

// q = ceil(2 C~ k log(dim / 2k) / delta^2), floored at dim + 1.
int required_sample_count(int k_bar, int dim, double delta_bar, double c_tilde);

// i.i.d. N(0, 1/q) sensing matrix.
Eigen::MatrixXd generate_offline_regressors(int q, int n_u, int m, RngStream& rng);

// Simulates the offline data collection; noise columns violating the l2
// budget sqrt(q)*w_bar_i are resampled so the recovery premise holds exactly.
OfflineDataset collect_offline_outputs(const plant::ImpulseResponse& truth,
                                       const Eigen::MatrixXd& sensing,
                                       const plant::DisturbanceModel& disturbance,
                                       RngStream& rng);

// min ||x||_1  s.t.  ||sensing*x - y||_2 <= budget. A zero budget collapses
// the residual ball to equality constraints.
Eigen::VectorXd bpdn_recover(const Eigen::MatrixXd& sensing, const Eigen::VectorXd& y,
                             double budget);

Fsps build_fsps(const Eigen::MatrixXd& centers, const OfflineDataset& data,
                const Eigen::VectorXd& w_bar, double c_bar, std::uint64_t seed);

// Whole offline phase: sensing matrix, data collection, per-row recovery,
// set construction. q_override <= 0 derives q from (delta_bar, c_tilde).
Fsps offline_phase(const plant::ImpulseResponse& truth,
                   const plant::DisturbanceModel& disturbance, int k_bar, double delta_bar,
                   double c_tilde, double c_bar, std::uint64_t seed, int q_override = -1);

void save_fsps(const Fsps& fsps, const std::string& path);
Fsps load_fsps(const std::string& path);

}  // namespace asmpc::sparse
