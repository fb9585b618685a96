#include "lp_oracle.hpp"

#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kPivotTol = 1e-9;

// Returns the entering column by Bland's rule, or -1 at optimality.
int entering_column(const MatrixXd& tab, const VectorXd& cost, const std::vector<int>& basis,
                    int allowed_cols) {
  VectorXd cb(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) cb(i) = cost(basis[i]);
  for (int j = 0; j < allowed_cols; ++j) {
    const double rc = cost(j) - cb.dot(tab.col(j));
    if (rc < -kPivotTol) return j;
  }
  return -1;
}

// Bland ratio test; returns the pivot row or -1 (unbounded direction).
int leaving_row(const MatrixXd& tab, const VectorXd& rhs, const std::vector<int>& basis,
                int col) {
  int row = -1;
  double best = 0.0;
  for (int i = 0; i < tab.rows(); ++i) {
    if (tab(i, col) <= kPivotTol) continue;
    const double ratio = rhs(i) / tab(i, col);
    if (row < 0 || ratio < best - 1e-12 ||
        (ratio < best + 1e-12 && basis[i] < basis[row]))
      row = i, best = ratio;
  }
  return row;
}

void pivot(MatrixXd& tab, VectorXd& rhs, std::vector<int>& basis, int row, int col) {
  const double p = tab(row, col);
  tab.row(row) /= p;
  rhs(row) /= p;
  for (int i = 0; i < tab.rows(); ++i) {
    if (i == row) continue;
    const double f = tab(i, col);
    if (f == 0.0) continue;
    tab.row(i) -= f * tab.row(row);
    rhs(i) -= f * rhs(row);
  }
  basis[row] = col;
}

// Runs simplex to optimality on the current tableau. Returns false on an
// unbounded direction.
bool run(MatrixXd& tab, VectorXd& rhs, std::vector<int>& basis, const VectorXd& cost,
         int allowed_cols) {
  for (int iter = 0; iter < 100000; ++iter) {
    const int col = entering_column(tab, cost, basis, allowed_cols);
    if (col < 0) return true;
    const int row = leaving_row(tab, rhs, basis, col);
    if (row < 0) return false;
    pivot(tab, rhs, basis, row, col);
  }
  return true;  // iteration cap; treated as converged for test-sized problems
}

}  // namespace

LpResult simplex_solve(const VectorXd& c, const MatrixXd& G, const VectorXd& h,
                       const MatrixXd& A, const VectorXd& b) {
  const int n = static_cast<int>(c.size());
  const int m1 = static_cast<int>(G.rows());
  const int m2 = static_cast<int>(A.rows());
  const int m = m1 + m2;
  const int nv = 2 * n + m1;        // x+, x-, slacks
  const int total = nv + m;         // plus one artificial per row

  MatrixXd tab = MatrixXd::Zero(m, total);
  VectorXd rhs(m);
  for (int i = 0; i < m1; ++i) {
    tab.block(i, 0, 1, n) = G.row(i);
    tab.block(i, n, 1, n) = -G.row(i);
    tab(i, 2 * n + i) = 1.0;
    rhs(i) = h(i);
  }
  for (int i = 0; i < m2; ++i) {
    tab.block(m1 + i, 0, 1, n) = A.row(i);
    tab.block(m1 + i, n, 1, n) = -A.row(i);
    rhs(m1 + i) = b(i);
  }
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) {
    if (rhs(i) < 0.0) {
      tab.row(i) = -tab.row(i);
      rhs(i) = -rhs(i);
    }
    tab(i, nv + i) = 1.0;
    basis[i] = nv + i;
  }

  LpResult result;

  VectorXd phase1_cost = VectorXd::Zero(total);
  phase1_cost.tail(m).setOnes();
  run(tab, rhs, basis, phase1_cost, total);
  double infeasibility = 0.0;
  for (int i = 0; i < m; ++i)
    if (basis[i] >= nv) infeasibility += rhs(i);
  if (infeasibility > 1e-7) {
    result.status = LpStatus::Infeasible;
    return result;
  }

  VectorXd phase2_cost = VectorXd::Zero(total);
  phase2_cost.head(n) = c;
  phase2_cost.segment(n, n) = -c;
  if (!run(tab, rhs, basis, phase2_cost, nv)) {
    result.status = LpStatus::Unbounded;
    return result;
  }

  VectorXd z = VectorXd::Zero(total);
  for (int i = 0; i < m; ++i) z(basis[i]) = rhs(i);
  result.status = LpStatus::Optimal;
  result.x = z.head(n) - z.segment(n, n);
  result.objective = c.dot(result.x);
  return result;
}

}  // namespace oracle
