#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <vector>

namespace asmpc::conic {

// One second-order cone constraint  ||F x + f||_2 <= c x + d.
struct SocBlock {
  Eigen::MatrixXd F;
  Eigen::VectorXd f;
  Eigen::RowVectorXd c;
  double d = 0.0;
};

// min 1/2 x'Px + q'x  s.t.  Gx <= h,  Ax = b,  soc blocks.
// P may be 0x0 (pure linear objective); G/A may have zero rows.
struct ConicProgram {
  int n = 0;
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  std::vector<SocBlock> soc_blocks;

  // Throws DimensionMismatch on inconsistent sizes, InvalidArgument if P is
  // not symmetric within 1e-12 (relative).
  void validate() const;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIterations };

const char* to_string(SolveStatus s);

struct SolverTolerances {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iterations = 500;  // total Newton steps across both phases
};

struct Solution {
  SolveStatus status = SolveStatus::MaxIterations;
  Eigen::VectorXd primal;
  double objective_value = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int newton_iterations = 0;
};

// Worst violation per constraint class; the independent feasibility oracle
// used by the property suites.
struct ResidualReport {
  double linear_inequality = 0.0;
  double linear_equality = 0.0;
  double soc = 0.0;

  double max_violation() const;
  bool within(double tol) const { return max_violation() <= tol; }
};

Solution solve(const ConicProgram& program, const SolverTolerances& tol = {});

ResidualReport verify(const ConicProgram& program, const Eigen::VectorXd& candidate);

// Plain-text dump for offline inspection.
void dump(const ConicProgram& program, std::ostream& os);

}  // namespace asmpc::conic
