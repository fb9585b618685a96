#pragma once

#include "asmpc/errors.hpp"
#include "asmpc/rng.hpp"

#include <Eigen/Dense>

namespace asmpc::plant {

// True system: y(t) = H Phi(t) + w(t). Coefficients relate stacked past
// inputs [u_1(t-1)..u_1(t-m), ..., u_nu(t-1)..u_nu(t-m)] to outputs.
struct ImpulseResponse {
  Eigen::MatrixXd coefficients;  // n_y x (n_u * m)
  int sparsity_index = 0;        // max nonzeros per row

  int max_row_nonzeros(double tol = 0.0) const {
    int worst = 0;
    for (Eigen::Index i = 0; i < coefficients.rows(); ++i) {
      int nnz = 0;
      for (Eigen::Index j = 0; j < coefficients.cols(); ++j)
        if (std::abs(coefficients(i, j)) > tol) ++nnz;
      worst = std::max(worst, nnz);
    }
    return worst;
  }
};

enum class DisturbanceDistribution { UniformSymmetric };

struct DisturbanceModel {
  Eigen::VectorXd bound;     // componentwise |w_j| <= bound_j
  Eigen::MatrixXd variance;  // n_y x n_y
  DisturbanceDistribution distribution = DisturbanceDistribution::UniformSymmetric;
};

// Analytic variance of the symmetric uniform disturbance: diag(bound^2 / 3).
inline DisturbanceModel uniform_disturbance(const Eigen::VectorXd& bound) {
  DisturbanceModel model;
  model.bound = bound;
  model.variance = (bound.array().square() / 3.0).matrix().asDiagonal();
  return model;
}

// Block-diagonal shift dynamics of the regressor: Phi' = W Phi + Z u.
struct ShiftOperators {
  Eigen::MatrixXd W;  // (n_u*m) x (n_u*m), nilpotent per block
  Eigen::MatrixXd Z;  // (n_u*m) x n_u
  int n_u = 0;
  int m = 0;
};

inline ShiftOperators build_shift_operators(int n_u, int m) {
  if (n_u < 1 || m < 1) throw InvalidArgument("build_shift_operators: n_u, m must be >= 1");
  ShiftOperators ops;
  ops.n_u = n_u;
  ops.m = m;
  ops.W = Eigen::MatrixXd::Zero(n_u * m, n_u * m);
  ops.Z = Eigen::MatrixXd::Zero(n_u * m, n_u);
  for (int c = 0; c < n_u; ++c) {
    const int base = c * m;
    for (int i = 1; i < m; ++i) ops.W(base + i, base + i - 1) = 1.0;
    ops.Z(base, c) = 1.0;
  }
  return ops;
}

inline Eigen::VectorXd step(const ImpulseResponse& truth, const Eigen::VectorXd& phi,
                            const Eigen::VectorXd& w) {
  if (truth.coefficients.cols() != phi.size() || truth.coefficients.rows() != w.size())
    throw DimensionMismatch("step: plant dimensions do not match regressor/disturbance");
  return truth.coefficients * phi + w;
}

inline Eigen::VectorXd shift_regressor(const ShiftOperators& ops, const Eigen::VectorXd& phi,
                                       const Eigen::VectorXd& u) {
  if (phi.size() != ops.W.rows() || u.size() != ops.Z.cols())
    throw DimensionMismatch("shift_regressor: dimensions do not match shift operators");
  return ops.W * phi + ops.Z * u;
}

inline Eigen::VectorXd sample_disturbance(const DisturbanceModel& model, RngStream& rng) {
  Eigen::VectorXd w(model.bound.size());
  for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = rng.uniform_symmetric(model.bound(j));
  return w;
}

}  // namespace asmpc::plant
