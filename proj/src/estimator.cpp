#include "asmpc/estimator.hpp"

#include "asmpc/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace asmpc::estim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd lift_regressor(const VectorXd& phi, int n_y) {
  const int d = static_cast<int>(phi.size());
  MatrixXd lifted = MatrixXd::Zero(n_y, n_y * d);
  for (int i = 0; i < n_y; ++i) lifted.block(i, i * d, 1, d) = phi.transpose();
  return lifted;
}

RlsState rls_update(const RlsState& state, const VectorXd& phi, const VectorXd& y,
                    const MatrixXd& sigma_w) {
  const int n_y = static_cast<int>(y.size());
  const int dim = static_cast<int>(state.mean.size());
  if (dim != n_y * static_cast<int>(phi.size()))
    throw DimensionMismatch("rls_update: mean length != n_y * regressor length");
  if (state.covariance.rows() != dim || state.covariance.cols() != dim)
    throw DimensionMismatch("rls_update: covariance shape");
  if (sigma_w.rows() != n_y || sigma_w.cols() != n_y)
    throw DimensionMismatch("rls_update: disturbance variance shape");

  if (phi.cwiseAbs().maxCoeff() < 1e-300) return state;  // zero information

  MatrixXd lifted = lift_regressor(phi, n_y);
  MatrixXd innovation_cov = lifted * state.covariance * lifted.transpose() + sigma_w;
  Eigen::LDLT<MatrixXd> ldlt(innovation_cov);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
    throw SingularInnovation("rls_update: innovation covariance is singular");

  MatrixXd gain = state.covariance * lifted.transpose() * ldlt.solve(MatrixXd::Identity(n_y, n_y));

  RlsState next;
  next.mean = state.mean + gain * (y - lifted * state.mean);
  MatrixXd closed = MatrixXd::Identity(dim, dim) - gain * lifted;
  // Joseph form keeps the covariance symmetric positive definite.
  next.covariance = closed * state.covariance * closed.transpose() +
                    gain * sigma_w * gain.transpose();
  next.covariance = 0.5 * (next.covariance + next.covariance.transpose()).eval();
  return next;
}

PointEstimateDomain point_estimate_domain(const setmem::Polytope& fps, const sparse::Fsps* fsps,
                                          bool exact_ball) {
  PointEstimateDomain domain;
  domain.combined = fps;
  if (fsps != nullptr) {
    const int d = fsps->dim();
    const int n_y = fsps->n_outputs();
    if (fps.dim() != n_y * d)
      throw DimensionMismatch("point_estimate_domain: fps/fsps dimensions");
    const int base = domain.combined.rows();
    domain.combined.normals.conservativeResize(base + 2 * n_y * d, fps.dim());
    domain.combined.offsets.conservativeResize(base + 2 * n_y * d);
    int r = base;
    for (int i = 0; i < n_y; ++i) {
      for (int j = 0; j < d; ++j) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(fps.dim());
        row(i * d + j) = 1.0;
        domain.combined.normals.row(r) = row;
        domain.combined.offsets(r) = fsps->box_upper(i, j);
        domain.combined.row_time.push_back(-1);
        ++r;
        domain.combined.normals.row(r) = -row;
        domain.combined.offsets(r) = -fsps->box_lower(i, j);
        domain.combined.row_time.push_back(-1);
        ++r;
      }
    }
    if (exact_ball) {
      Eigen::LLT<MatrixXd> llt(fsps->gram);
      if (llt.info() != Eigen::Success)
        throw NumericalBreakdown("point_estimate_domain: gram matrix not positive definite");
      MatrixXd lt = llt.matrixL().transpose();
      for (int i = 0; i < n_y; ++i) {
        const VectorXd g = fsps->ell_linear.row(i).transpose();
        const VectorXd center = llt.solve(g);
        const double rho = std::max(g.dot(center) - fsps->ell_const(i), 0.0);
        conic::SocBlock ball;
        ball.F = MatrixXd::Zero(d, fps.dim());
        ball.F.block(0, i * d, d, d) = lt;
        ball.f = -lt * center;
        ball.c = Eigen::RowVectorXd::Zero(fps.dim());
        ball.d = std::sqrt(rho);
        domain.exact_balls.push_back(std::move(ball));
      }
    }
  }
  if (setmem::is_empty(domain.combined))
    throw EmptyDomain("point_estimate_domain: FPS and FSPS are inconsistent");
  return domain;
}

VectorXd project_mean(const RlsState& state, const PointEstimateDomain& domain) {
  const int dim = static_cast<int>(state.mean.size());
  if (domain.combined.dim() != dim) throw DimensionMismatch("project_mean: domain dimension");

  auto satisfies_balls = [&](const VectorXd& x) {
    for (const conic::SocBlock& s : domain.exact_balls)
      if ((s.F * x + s.f).norm() > s.c.dot(x) + s.d + 1e-9) return false;
    return true;
  };
  if (setmem::contains(domain.combined, state.mean, 1e-10) && satisfies_balls(state.mean))
    return state.mean;

  Eigen::LDLT<MatrixXd> ldlt(state.covariance);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
    throw NumericalBreakdown("project_mean: covariance not positive definite");
  MatrixXd weight = ldlt.solve(MatrixXd::Identity(dim, dim));
  weight = 0.5 * (weight + weight.transpose()).eval();

  conic::ConicProgram qp;
  qp.n = dim;
  qp.P = 2.0 * weight;
  qp.q = -2.0 * (weight * state.mean);
  qp.G = domain.combined.normals;
  qp.h = domain.combined.offsets;
  qp.soc_blocks = domain.exact_balls;

  // The weight matrix spans many orders of magnitude once some directions
  // are well identified, so the default relative-gap stop can leave errors
  // far above the scale at which the projected mean is consumed downstream.
  conic::SolverTolerances tol;
  tol.feas_tol = 1e-11;
  tol.gap_tol = 1e-12;
  tol.max_iterations = 1000;
  conic::Solution sol = conic::solve(qp, tol);
  if (sol.status == conic::SolveStatus::Infeasible)
    throw EmptyDomain("project_mean: projection domain is empty");
  if (sol.status != conic::SolveStatus::Optimal)
    throw SolverFailure(std::string("project_mean: solver returned ") +
                        conic::to_string(sol.status));
  return sol.primal;
}

plant::ImpulseResponse reshape_mean(const VectorXd& mean_vec, int n_y, int cols) {
  if (static_cast<int>(mean_vec.size()) != n_y * cols)
    throw DimensionMismatch("reshape_mean: length != n_y * cols");
  plant::ImpulseResponse out;
  out.coefficients.resize(n_y, cols);
  for (int i = 0; i < n_y; ++i)
    out.coefficients.row(i) = mean_vec.segment(i * cols, cols).transpose();
  out.sparsity_index = out.max_row_nonzeros(1e-12);
  return out;
}

}  // namespace asmpc::estim
