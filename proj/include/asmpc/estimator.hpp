#pragma once

#include "asmpc/conic.hpp"
#include "asmpc/fir_plant.hpp"
#include "asmpc/polytope.hpp"
#include "asmpc/sparse_recovery.hpp"

#include <Eigen/Dense>

#include <vector>

namespace asmpc::estim {

struct RlsState {
  Eigen::VectorXd mean;        // vectorized impulse response, rows stacked
  Eigen::MatrixXd covariance;  // symmetric positive definite
};

// diag(phi', phi', ..., phi') with n_y blocks.
Eigen::MatrixXd lift_regressor(const Eigen::VectorXd& phi, int n_y);

RlsState rls_update(const RlsState& state, const Eigen::VectorXd& phi, const Eigen::VectorXd& y,
                    const Eigen::MatrixXd& sigma_w);

// Domain for the constrained point estimate: FPS alone in baseline mode,
// FPS intersected with the FSPS box otherwise. exact_balls carries the
// flag-gated exact denoising-set constraints.
struct PointEstimateDomain {
  setmem::Polytope combined;
  std::vector<conic::SocBlock> exact_balls;
};

PointEstimateDomain point_estimate_domain(const setmem::Polytope& fps,
                                          const sparse::Fsps* fsps,
                                          bool exact_ball = false);

// Weighted projection of the RLS mean onto the domain (M = covariance^{-1}).
Eigen::VectorXd project_mean(const RlsState& state, const PointEstimateDomain& domain);

plant::ImpulseResponse reshape_mean(const Eigen::VectorXd& mean_vec, int n_y, int cols);

}  // namespace asmpc::estim
