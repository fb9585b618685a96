#pragma once

#include "asmpc/conic.hpp"
#include "asmpc/fir_plant.hpp"
#include "asmpc/polytope.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <utility>
#include <vector>

namespace asmpc::mpc {

enum class Robustification { DualLP, VertexEnumeration };

struct MpcConfig {
  int horizon = 0;           // N, must exceed the FIR order m
  Eigen::MatrixXd Q;         // n_y x n_y output weight
  Eigen::MatrixXd S;         // n_u x n_u input weight
  double epsilon = 0.1;      // output constraint violation probability
  Eigen::RowVectorXd E;      // output constraint row
  double p = 0.0;            // output constraint offset
  Eigen::MatrixXd C;         // input constraint matrix
  Eigen::VectorXd g;         // input constraint offsets
  Robustification mode = Robustification::DualLP;
  conic::SolverTolerances solver;

  double kappa() const { return std::sqrt((1.0 - epsilon) / epsilon); }
  void validate(int m, int n_u, int n_y) const;
};

// Covariance of the appended vector [Phi; 1; 1]-aligned uncertainty. Only
// the output-noise entry is nonzero in the FIR setting, which makes the
// cone term a constant; the general square-root path is kept for nonzero
// regressor-block covariances.
struct AppendedCovariance {
  Eigen::MatrixXd full;  // (d+2) x (d+2)
  int regressor_dim = 0;

  bool constant_tightening() const;
  // kappa * sqrt(phibar' Gamma phibar) when constant, else throws.
  double constant_term(double kappa) const;
};

AppendedCovariance build_gamma(const Eigen::RowVectorXd& E, const Eigen::MatrixXd& sigma_w,
                               int regressor_dim);

// Phi(t+k|t) = offset[k-1] + jacobian[k-1] * U for k = 1..N, affine in the
// stacked input sequence U.
struct RegressorPrediction {
  std::vector<Eigen::VectorXd> offset;
  std::vector<Eigen::MatrixXd> jacobian;
  int n_u = 0;

  Eigen::VectorXd at(int k, const Eigen::VectorXd& inputs) const {
    return offset.at(k - 1) + jacobian.at(k - 1) * inputs;
  }
};

RegressorPrediction predict_regressors(const Eigen::VectorXd& phi,
                                       const plant::ShiftOperators& ops, int horizon);

// Steady-state terminal condition as equality rows A_term * U = b_term.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> terminal_constraint_rows(
    const plant::ShiftOperators& ops, const RegressorPrediction& prediction);

// MPC program under construction: inputs first, then (DualLP mode) one
// nonnegative multiplier block per prediction step.
struct MpcProgram {
  conic::ConicProgram program;
  int input_vars = 0;
  int n_u = 0;
  double objective_constant = 0.0;
  std::vector<std::pair<int, int>> lambda_spans;  // offset/length per step
};

// Appends the robustified output-constraint rows for k = 1..N.
void robust_output_rows(MpcProgram& mp, const setmem::Polytope& fps,
                        const AppendedCovariance& gamma, double kappa,
                        const Eigen::RowVectorXd& E, double p,
                        const RegressorPrediction& prediction, Robustification mode);

MpcProgram build_mpc(const plant::ImpulseResponse& mu, const setmem::Polytope& fps,
                     const Eigen::VectorXd& phi, const Eigen::VectorXd& y,
                     const MpcConfig& config, const plant::ShiftOperators& ops,
                     const AppendedCovariance& gamma);

struct ControlSolution {
  Eigen::VectorXd input_sequence;                   // length N * n_u
  std::vector<Eigen::VectorXd> predicted_regressors;  // Phi(t+1|t) .. Phi(t+N|t)
  Eigen::MatrixXd nominal_outputs;                  // n_y x N, yhat(t+1|t)..yhat(t+N|t)
  double objective_value = 0.0;
  conic::SolveStatus status = conic::SolveStatus::MaxIterations;
};

class Controller {
 public:
  Controller(MpcConfig config, plant::ShiftOperators ops, AppendedCovariance gamma);

  // Solves the step problem and returns (applied input, full solution).
  // Throws InfeasibleAtRuntime on any non-Optimal status.
  std::pair<Eigen::VectorXd, ControlSolution> solve_step(const plant::ImpulseResponse& mu,
                                                         const setmem::Polytope& fps,
                                                         const Eigen::VectorXd& phi,
                                                         const Eigen::VectorXd& y) const;

  const MpcConfig& config() const { return config_; }
  const plant::ShiftOperators& ops() const { return ops_; }
  const AppendedCovariance& gamma() const { return gamma_; }

 private:
  MpcConfig config_;
  plant::ShiftOperators ops_;
  AppendedCovariance gamma_;
};

// Independent check of the shifted candidate sequence (previous optimum with
// the last input repeated) against the next step's program via verify().
struct CandidateCheck {
  bool feasible = false;
  double max_violation = 0.0;
};

CandidateCheck check_shifted_candidate(const ControlSolution& previous,
                                       const plant::ImpulseResponse& mu_next,
                                       const setmem::Polytope& fps_next,
                                       const Eigen::VectorXd& phi_next,
                                       const Eigen::VectorXd& y_next, const MpcConfig& config,
                                       const plant::ShiftOperators& ops,
                                       const AppendedCovariance& gamma, double tol = 1e-6);

}  // namespace asmpc::mpc
