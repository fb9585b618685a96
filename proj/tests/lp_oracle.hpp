#pragma once

#include <Eigen/Dense>

namespace oracle {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
};

// min c'x  s.t.  G x <= h,  A x = b  over free x. Independent dense
// two-phase simplex (Bland's rule), used only as a cross-check oracle.
LpResult simplex_solve(const Eigen::VectorXd& c, const Eigen::MatrixXd& G,
                       const Eigen::VectorXd& h, const Eigen::MatrixXd& A,
                       const Eigen::VectorXd& b);

}  // namespace oracle
