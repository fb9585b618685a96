#include "asmpc/mpc.hpp"

#include "asmpc/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace asmpc::mpc {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

void MpcConfig::validate(int m, int n_u, int n_y) const {
  if (horizon <= m) throw InvalidArgument("MpcConfig: horizon must exceed the FIR order");
  if (epsilon <= 0.0 || epsilon >= 1.0) throw InvalidArgument("MpcConfig: epsilon outside (0,1)");
  if (Q.rows() != n_y || Q.cols() != n_y) throw DimensionMismatch("MpcConfig: Q shape");
  if (S.rows() != n_u || S.cols() != n_u) throw DimensionMismatch("MpcConfig: S shape");
  if (E.size() != n_y) throw DimensionMismatch("MpcConfig: E length");
  if (C.rows() != g.size() || (C.rows() > 0 && C.cols() != n_u))
    throw DimensionMismatch("MpcConfig: input constraint shape");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eq(Q), es(S);
  if (eq.eigenvalues().minCoeff() < 0.0 || es.eigenvalues().minCoeff() <= 0.0)
    throw InvalidArgument("MpcConfig: Q must be PSD and S positive definite");
}

bool AppendedCovariance::constant_tightening() const {
  const int d = regressor_dim;
  return full.topLeftCorner(d, d).cwiseAbs().maxCoeff() < 1e-300 &&
         full.topRightCorner(d, 2).cwiseAbs().maxCoeff() < 1e-300;
}

double AppendedCovariance::constant_term(double kappa) const {
  if (!constant_tightening())
    throw InvalidArgument("AppendedCovariance: tightening is not constant");
  const int d = regressor_dim;
  const Eigen::Vector2d ones(1.0, 1.0);
  const double quad = ones.dot(full.bottomRightCorner(2, 2) * ones);
  return kappa * std::sqrt(std::max(quad, 0.0));
}

AppendedCovariance build_gamma(const RowVectorXd& E, const MatrixXd& sigma_w, int regressor_dim) {
  if (E.size() != sigma_w.rows() || sigma_w.rows() != sigma_w.cols())
    throw DimensionMismatch("build_gamma: E/sigma_w shapes");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma_w);
  if (es.eigenvalues().minCoeff() < -1e-12)
    throw InvalidArgument("build_gamma: sigma_w must be PSD");
  AppendedCovariance gamma;
  gamma.regressor_dim = regressor_dim;
  gamma.full = MatrixXd::Zero(regressor_dim + 2, regressor_dim + 2);
  gamma.full(regressor_dim, regressor_dim) = (E * sigma_w * E.transpose())(0, 0);
  return gamma;
}

RegressorPrediction predict_regressors(const VectorXd& phi, const plant::ShiftOperators& ops,
                                       int horizon) {
  if (phi.size() != ops.W.rows()) throw DimensionMismatch("predict_regressors: phi length");
  if (horizon < 1) throw InvalidArgument("predict_regressors: horizon must be >= 1");
  const int d = static_cast<int>(phi.size());
  const int n_u = static_cast<int>(ops.Z.cols());
  RegressorPrediction pred;
  pred.n_u = n_u;
  VectorXd off = phi;
  MatrixXd jac = MatrixXd::Zero(d, horizon * n_u);
  for (int k = 1; k <= horizon; ++k) {
    off = ops.W * off;
    jac = ops.W * jac;
    jac.middleCols((k - 1) * n_u, n_u) += ops.Z;
    pred.offset.push_back(off);
    pred.jacobian.push_back(jac);
  }
  return pred;
}

std::pair<MatrixXd, VectorXd> terminal_constraint_rows(const plant::ShiftOperators& ops,
                                                       const RegressorPrediction& prediction) {
  const int d = static_cast<int>(ops.W.rows());
  const int horizon = static_cast<int>(prediction.offset.size());
  const int n_u = prediction.n_u;
  // (I - W) Phi(t+N|t) = Z u(t+N-1|t), written over U.
  MatrixXd iw = MatrixXd::Identity(d, d) - ops.W;
  MatrixXd rows = iw * prediction.jacobian.back();
  rows.middleCols((horizon - 1) * n_u, n_u) -= ops.Z;
  VectorXd rhs = -(iw * prediction.offset.back());
  return {rows, rhs};
}

namespace {

void add_variables(MpcProgram& mp, int count) {
  conic::ConicProgram& prog = mp.program;
  const int old_n = prog.n;
  prog.n += count;
  if (prog.P.size() > 0) {
    MatrixXd P = MatrixXd::Zero(prog.n, prog.n);
    P.topLeftCorner(old_n, old_n) = prog.P;
    prog.P = std::move(P);
  }
  prog.q.conservativeResize(prog.n);
  prog.q.tail(count).setZero();
  if (prog.G.rows() > 0) {
    prog.G.conservativeResize(Eigen::NoChange, prog.n);
    prog.G.rightCols(count).setZero();
  } else {
    prog.G.resize(0, prog.n);
  }
  if (prog.A.rows() > 0) {
    prog.A.conservativeResize(Eigen::NoChange, prog.n);
    prog.A.rightCols(count).setZero();
  } else {
    prog.A.resize(0, prog.n);
  }
}

void append_ineq_rows(conic::ConicProgram& prog, const MatrixXd& rows, const VectorXd& rhs) {
  const int base = static_cast<int>(prog.G.rows());
  prog.G.conservativeResize(base + rows.rows(), prog.n);
  prog.h.conservativeResize(base + rows.rows());
  prog.G.bottomRows(rows.rows()) = rows;
  prog.h.tail(rhs.size()) = rhs;
}

void append_eq_rows(conic::ConicProgram& prog, const MatrixXd& rows, const VectorXd& rhs) {
  const int base = static_cast<int>(prog.A.rows());
  prog.A.conservativeResize(base + rows.rows(), prog.n);
  prog.b.conservativeResize(base + rows.rows());
  prog.A.bottomRows(rows.rows()) = rows;
  prog.b.tail(rhs.size()) = rhs;
}

// Direction of the robust term: block i of the vectorized response gets
// E_i * Phi(k|t). Returns (matrix over U, offset).
std::pair<MatrixXd, VectorXd> robust_direction(const RowVectorXd& E,
                                               const RegressorPrediction& pred, int k) {
  const int d = static_cast<int>(pred.offset[k - 1].size());
  const int n_y = static_cast<int>(E.size());
  MatrixXd jac(n_y * d, pred.jacobian[k - 1].cols());
  VectorXd off(n_y * d);
  for (int i = 0; i < n_y; ++i) {
    jac.middleRows(i * d, d) = E(i) * pred.jacobian[k - 1];
    off.segment(i * d, d) = E(i) * pred.offset[k - 1];
  }
  return {jac, off};
}

MatrixXd gamma_sqrt(const MatrixXd& full) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(full);
  VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

void robust_output_rows(MpcProgram& mp, const setmem::Polytope& fps,
                        const AppendedCovariance& gamma, double kappa, const RowVectorXd& E,
                        double p, const RegressorPrediction& pred, Robustification mode) {
  const int horizon = static_cast<int>(pred.offset.size());
  const int d = static_cast<int>(pred.offset[0].size());
  const bool constant = gamma.constant_tightening();
  const double tighten = constant ? gamma.constant_term(kappa) : 0.0;
  MatrixXd sqrt_gamma;
  if (!constant) sqrt_gamma = gamma_sqrt(gamma.full);

  if (mode == Robustification::VertexEnumeration) {
    const std::vector<VectorXd> vertices = setmem::enumerate_vertices(fps);
    if (vertices.empty()) throw EmptyDomain("robust_output_rows: polytope has no vertices");
    for (int k = 1; k <= horizon; ++k) {
      auto [jac, off] = robust_direction(E, pred, k);
      for (const VectorXd& v : vertices) {
        RowVectorXd row_u = v.transpose() * jac;
        const double off_v = v.dot(off);
        if (constant) {
          MatrixXd row = MatrixXd::Zero(1, mp.program.n);
          row.leftCols(mp.input_vars) = row_u;
          append_ineq_rows(mp.program, row, VectorXd::Constant(1, p - tighten - off_v));
        } else {
          conic::SocBlock soc;
          soc.F = MatrixXd::Zero(d + 2, mp.program.n);
          soc.F.block(0, 0, d, mp.input_vars) = kappa * sqrt_gamma.leftCols(d) * pred.jacobian[k - 1];
          VectorXd phibar(d + 2);
          phibar.head(d) = pred.offset[k - 1];
          phibar(d) = 1.0;
          phibar(d + 1) = 1.0;
          soc.f = kappa * sqrt_gamma * phibar;
          soc.c = RowVectorXd::Zero(mp.program.n);
          soc.c.leftCols(mp.input_vars) = -row_u;
          soc.d = p - off_v;
          mp.program.soc_blocks.push_back(std::move(soc));
        }
      }
    }
    return;
  }

  // DualLP: per step, multipliers lambda_k >= 0 with A_p' lambda_k matching
  // the direction and b_p' lambda_k bounding the support function.
  const int rows = fps.rows();
  const int dvec = fps.dim();
  for (int k = 1; k <= horizon; ++k) {
    const int span = mp.program.n;
    add_variables(mp, rows);
    mp.lambda_spans.emplace_back(span, rows);

    auto [jac, off] = robust_direction(E, pred, k);
    MatrixXd eq = MatrixXd::Zero(dvec, mp.program.n);
    eq.leftCols(mp.input_vars) = -jac;
    eq.middleCols(span, rows) = fps.normals.transpose();
    append_eq_rows(mp.program, eq, off);

    MatrixXd nonneg = MatrixXd::Zero(rows, mp.program.n);
    nonneg.middleCols(span, rows) = -MatrixXd::Identity(rows, rows);
    append_ineq_rows(mp.program, nonneg, VectorXd::Zero(rows));

    if (constant) {
      MatrixXd budget = MatrixXd::Zero(1, mp.program.n);
      budget.middleCols(span, rows) = fps.offsets.transpose();
      append_ineq_rows(mp.program, budget, VectorXd::Constant(1, p - tighten));
    } else {
      conic::SocBlock soc;
      soc.F = MatrixXd::Zero(d + 2, mp.program.n);
      soc.F.block(0, 0, d, mp.input_vars) = kappa * sqrt_gamma.leftCols(d) * pred.jacobian[k - 1];
      VectorXd phibar(d + 2);
      phibar.head(d) = pred.offset[k - 1];
      phibar(d) = 1.0;
      phibar(d + 1) = 1.0;
      soc.f = kappa * sqrt_gamma * phibar;
      soc.c = RowVectorXd::Zero(mp.program.n);
      soc.c.middleCols(span, rows) = -fps.offsets.transpose();
      soc.d = p;
      mp.program.soc_blocks.push_back(std::move(soc));
    }
  }
}

MpcProgram build_mpc(const plant::ImpulseResponse& mu, const setmem::Polytope& fps,
                     const VectorXd& phi, const VectorXd& y, const MpcConfig& config,
                     const plant::ShiftOperators& ops, const AppendedCovariance& gamma) {
  const int n_u = ops.n_u;
  const int m = ops.m;
  const int n_y = static_cast<int>(mu.coefficients.rows());
  config.validate(m, n_u, n_y);
  const int d = n_u * m;
  if (mu.coefficients.cols() != d || phi.size() != d)
    throw DimensionMismatch("build_mpc: impulse response / regressor dimensions");
  if (fps.dim() != n_y * d) throw DimensionMismatch("build_mpc: FPS dimension");
  if (y.size() != n_y) throw DimensionMismatch("build_mpc: measurement length");

  const int horizon = config.horizon;
  const int nU = horizon * n_u;
  RegressorPrediction pred = predict_regressors(phi, ops, horizon);

  MpcProgram mp;
  mp.input_vars = nU;
  mp.n_u = n_u;
  mp.program.n = nU;
  mp.program.P = MatrixXd::Zero(nU, nU);
  mp.program.q = VectorXd::Zero(nU);
  mp.program.G.resize(0, nU);
  mp.program.h.resize(0);
  mp.program.A.resize(0, nU);
  mp.program.b.resize(0);

  // Nominal output terms over k = t+1..t+N; yhat(t|t) = y(t) is a constant.
  const MatrixXd weight = mu.coefficients.transpose() * config.Q * mu.coefficients;
  for (int k = 1; k <= horizon; ++k) {
    const MatrixXd& jac = pred.jacobian[k - 1];
    const VectorXd& off = pred.offset[k - 1];
    mp.program.P.noalias() += 2.0 * jac.transpose() * weight * jac;
    mp.program.q.noalias() += 2.0 * jac.transpose() * (weight * off);
    mp.objective_constant += off.dot(weight * off);
  }
  mp.objective_constant += y.dot(config.Q * y);
  for (int k = 0; k < horizon; ++k)
    mp.program.P.block(k * n_u, k * n_u, n_u, n_u) += 2.0 * config.S;
  mp.program.P = 0.5 * (mp.program.P + mp.program.P.transpose()).eval();

  // Hard input constraints at every step of the horizon.
  if (config.C.rows() > 0) {
    MatrixXd rows = MatrixXd::Zero(horizon * config.C.rows(), nU);
    VectorXd rhs(horizon * config.C.rows());
    for (int k = 0; k < horizon; ++k) {
      rows.block(k * config.C.rows(), k * n_u, config.C.rows(), n_u) = config.C;
      rhs.segment(k * config.C.rows(), config.C.rows()) = config.g;
    }
    append_ineq_rows(mp.program, rows, rhs);
  }

  auto [term_rows, term_rhs] = terminal_constraint_rows(ops, pred);
  append_eq_rows(mp.program, term_rows, term_rhs);

  robust_output_rows(mp, fps, gamma, config.kappa(), config.E, config.p, pred, config.mode);
  return mp;
}

Controller::Controller(MpcConfig config, plant::ShiftOperators ops, AppendedCovariance gamma)
    : config_(std::move(config)), ops_(std::move(ops)), gamma_(std::move(gamma)) {}

std::pair<VectorXd, ControlSolution> Controller::solve_step(const plant::ImpulseResponse& mu,
                                                            const setmem::Polytope& fps,
                                                            const VectorXd& phi,
                                                            const VectorXd& y) const {
  MpcProgram mp = build_mpc(mu, fps, phi, y, config_, ops_, gamma_);
  conic::Solution sol = conic::solve(mp.program, config_.solver);
  if (sol.status != conic::SolveStatus::Optimal) {
    std::ostringstream os;
    os << "MPC step returned " << conic::to_string(sol.status)
       << " (primal residual " << sol.primal_residual << ", dual residual "
       << sol.dual_residual << ")\n";
    conic::dump(mp.program, os);
    throw InfeasibleAtRuntime(os.str());
  }

  ControlSolution cs;
  cs.status = sol.status;
  cs.input_sequence = sol.primal.head(mp.input_vars);
  const int n_y = static_cast<int>(mu.coefficients.rows());
  cs.nominal_outputs.resize(n_y, config_.horizon);
  RegressorPrediction pred = predict_regressors(phi, ops_, config_.horizon);
  for (int k = 1; k <= config_.horizon; ++k) {
    VectorXd phik = pred.at(k, cs.input_sequence);
    cs.predicted_regressors.push_back(phik);
    cs.nominal_outputs.col(k - 1) = mu.coefficients * phik;
  }
  cs.objective_value = sol.objective_value + mp.objective_constant;
  return {cs.input_sequence.head(ops_.Z.cols()), cs};
}

CandidateCheck check_shifted_candidate(const ControlSolution& previous,
                                       const plant::ImpulseResponse& mu_next,
                                       const setmem::Polytope& fps_next,
                                       const VectorXd& phi_next, const VectorXd& y_next,
                                       const MpcConfig& config, const plant::ShiftOperators& ops,
                                       const AppendedCovariance& gamma, double tol) {
  const int n_u = ops.n_u;
  const int horizon = config.horizon;
  VectorXd candidate(horizon * n_u);
  candidate.head((horizon - 1) * n_u) = previous.input_sequence.tail((horizon - 1) * n_u);
  candidate.tail(n_u) = previous.input_sequence.tail(n_u);

  MpcProgram mp = build_mpc(mu_next, fps_next, phi_next, y_next, config, ops, gamma);

  VectorXd full = VectorXd::Zero(mp.program.n);
  full.head(mp.input_vars) = candidate;

  CandidateCheck check;
  if (config.mode == Robustification::DualLP) {
    RegressorPrediction pred = predict_regressors(phi_next, ops, horizon);
    for (int k = 1; k <= horizon; ++k) {
      // Multiplier witness from the support-function dual LP.
      const int d = static_cast<int>(phi_next.size());
      const int n_y = static_cast<int>(config.E.size());
      VectorXd phik = pred.at(k, candidate);
      VectorXd direction(n_y * d);
      for (int i = 0; i < n_y; ++i) direction.segment(i * d, d) = config.E(i) * phik;

      conic::ConicProgram dual;
      dual.n = fps_next.rows();
      dual.q = fps_next.offsets;
      dual.G = -MatrixXd::Identity(dual.n, dual.n);
      dual.h = VectorXd::Zero(dual.n);
      dual.A = fps_next.normals.transpose();
      dual.b = direction;
      conic::Solution sol = conic::solve(dual);
      if (sol.status != conic::SolveStatus::Optimal) {
        check.feasible = false;
        check.max_violation = std::numeric_limits<double>::infinity();
        return check;
      }
      auto [offset, span] = mp.lambda_spans[k - 1];
      full.segment(offset, span) = sol.primal;
    }
  }

  conic::ResidualReport rep = conic::verify(mp.program, full);
  check.max_violation = rep.max_violation();
  check.feasible = check.max_violation <= tol;
  return check;
}

}  // namespace asmpc::mpc
