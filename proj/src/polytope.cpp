#include "asmpc/polytope.hpp"

#include "asmpc/errors.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <vector>

namespace asmpc::setmem {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

conic::Solution solve_lp(const MatrixXd& G, const VectorXd& h, const VectorXd& cost_min) {
  conic::ConicProgram lp;
  lp.n = static_cast<int>(cost_min.size());
  lp.q = cost_min;
  lp.G = G;
  lp.h = h;
  return conic::solve(lp);
}

Polytope drop_rows(const Polytope& p, const std::vector<char>& remove) {
  int kept = 0;
  for (char r : remove)
    if (!r) ++kept;
  Polytope out;
  out.normals.resize(kept, p.dim());
  out.offsets.resize(kept);
  out.row_time.reserve(kept);
  int k = 0;
  for (int i = 0; i < p.rows(); ++i) {
    if (remove[i]) continue;
    out.normals.row(k) = p.normals.row(i);
    out.offsets(k) = p.offsets(i);
    out.row_time.push_back(p.row_time[i]);
    ++k;
  }
  return out;
}

}  // namespace

Polytope init_fps(const VectorXd& lower, const VectorXd& upper) {
  if (lower.size() != upper.size()) throw DimensionMismatch("init_fps: bound lengths differ");
  if ((lower.array() > upper.array()).any())
    throw InvalidArgument("init_fps: lower bound exceeds upper bound");
  const int d = static_cast<int>(lower.size());
  Polytope p;
  p.normals = MatrixXd::Zero(2 * d, d);
  p.offsets.resize(2 * d);
  p.row_time.assign(2 * d, -1);
  for (int i = 0; i < d; ++i) {
    p.normals(i, i) = 1.0;
    p.offsets(i) = upper(i);
    p.normals(d + i, i) = -1.0;
    p.offsets(d + i) = -lower(i);
  }
  return p;
}

Polytope add_measurement_cut(const Polytope& fps, const VectorXd& phi, const VectorXd& y,
                             const VectorXd& w_bar, long t) {
  const int n_y = static_cast<int>(y.size());
  const int nm = static_cast<int>(phi.size());
  if (w_bar.size() != n_y) throw DimensionMismatch("add_measurement_cut: w_bar length");
  if (fps.dim() != n_y * nm) throw DimensionMismatch("add_measurement_cut: polytope dimension");

  const bool vacuous = phi.cwiseAbs().maxCoeff() < 1e-14;
  if (vacuous) {
    // Zero regressor carries no information; an impossible reading means the
    // disturbance bound was violated.
    for (int j = 0; j < n_y; ++j)
      if (std::abs(y(j)) > w_bar(j) + 1e-12)
        throw EmptyDomain("add_measurement_cut: vacuous cut certifies inconsistency");
    return fps;
  }

  Polytope out = fps;
  const int base = fps.rows();
  out.normals.conservativeResize(base + 2 * n_y, fps.dim());
  out.offsets.conservativeResize(base + 2 * n_y);
  for (int j = 0; j < n_y; ++j) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(fps.dim());
    row.segment(j * nm, nm) = phi.transpose();
    out.normals.row(base + 2 * j) = row;
    out.offsets(base + 2 * j) = y(j) + w_bar(j);
    out.normals.row(base + 2 * j + 1) = -row;
    out.offsets(base + 2 * j + 1) = -y(j) + w_bar(j);
    out.row_time.push_back(t);
    out.row_time.push_back(t);
  }
  return out;
}

Polytope prune_redundant(const Polytope& fps, int cap, PruneStats* stats) {
  if (cap < 2 * fps.dim()) throw InvalidArgument("prune_redundant: cap below 2*dim");
  PruneStats local;

  // Exact pass: row i is redundant iff max a_i'h over the others (with row i
  // relaxed by +1 to keep the LP bounded) does not exceed b_i.
  Polytope p = fps;
  for (int i = p.rows() - 1; i >= 0; --i) {
    if (p.rows() <= 1) break;
    MatrixXd G = p.normals;
    VectorXd h = p.offsets;
    h(i) += 1.0;
    conic::Solution sol = solve_lp(G, h, -p.normals.row(i).transpose());
    if (sol.status == conic::SolveStatus::Optimal && -sol.objective_value <= p.offsets(i) + 1e-9) {
      std::vector<char> remove(p.rows(), 0);
      remove[i] = 1;
      p = drop_rows(p, remove);
      ++local.removed;
    }
  }

  if (p.rows() > cap) {
    // Conservative overflow handling: replace the box rows with the current
    // bounding box and drop the oldest cuts until under the cap.
    const int d = p.dim();
    VectorXd lo(d), hi(d);
    for (int j = 0; j < d; ++j) {
      VectorXd dir = VectorXd::Zero(d);
      dir(j) = 1.0;
      hi(j) = support_function(p, dir);
      lo(j) = -support_function(p, -dir);
    }
    std::vector<std::pair<long, int>> cuts;  // (age, row)
    for (int i = 0; i < p.rows(); ++i)
      if (p.row_time[i] >= 0) cuts.emplace_back(p.row_time[i], i);
    std::sort(cuts.begin(), cuts.end());
    std::vector<char> remove(p.rows(), 0);
    for (int i = 0; i < p.rows(); ++i)
      if (p.row_time[i] < 0) remove[i] = 1;  // box rows rebuilt below
    int target_cuts = cap - 2 * d;
    int surviving = static_cast<int>(cuts.size());
    for (const auto& [age, row] : cuts) {
      if (surviving <= target_cuts) break;
      remove[row] = 1;
      --surviving;
      ++local.merged;
    }
    Polytope trimmed = drop_rows(p, remove);
    Polytope box = init_fps(lo, hi);
    const int base = box.rows();
    box.normals.conservativeResize(base + trimmed.rows(), d);
    box.offsets.conservativeResize(base + trimmed.rows());
    for (int i = 0; i < trimmed.rows(); ++i) {
      box.normals.row(base + i) = trimmed.normals.row(i);
      box.offsets(base + i) = trimmed.offsets(i);
      box.row_time.push_back(trimmed.row_time[i]);
    }
    p = std::move(box);
  }

  if (stats != nullptr) *stats = local;
  return p;
}

double support_function(const Polytope& fps, const VectorXd& direction) {
  if (direction.size() != fps.dim()) throw DimensionMismatch("support_function: direction length");
  if (direction.cwiseAbs().maxCoeff() == 0.0) {
    if (is_empty(fps)) throw EmptyDomain("support_function: empty polytope");
    return 0.0;
  }
  conic::Solution sol = solve_lp(fps.normals, fps.offsets, -direction);
  if (sol.status == conic::SolveStatus::Unbounded)
    throw UnboundedDirection("support_function: polytope unbounded in direction");
  if (sol.status == conic::SolveStatus::Infeasible)
    throw EmptyDomain("support_function: empty polytope");
  if (sol.status != conic::SolveStatus::Optimal)
    throw SolverFailure("support_function: LP did not converge");
  return -sol.objective_value;
}

std::vector<VectorXd> enumerate_vertices(const Polytope& fps, int max_dim) {
  const int d = fps.dim();
  if (d > max_dim) throw DimensionTooLarge("enumerate_vertices: dimension above oracle limit");
  const int m = fps.rows();
  std::vector<VectorXd> vertices;
  std::vector<int> combo(d);
  for (int i = 0; i < d; ++i) combo[i] = i;

  auto try_combo = [&]() {
    MatrixXd A(d, d);
    VectorXd b(d);
    for (int i = 0; i < d; ++i) {
      A.row(i) = fps.normals.row(combo[i]);
      b(i) = fps.offsets(combo[i]);
    }
    Eigen::FullPivLU<MatrixXd> lu(A);
    lu.setThreshold(1e-10);
    if (lu.rank() < d) return;
    VectorXd v = lu.solve(b);
    if (((fps.normals * v - fps.offsets).array() > 1e-8).any()) return;
    for (const VectorXd& w : vertices)
      if ((w - v).cwiseAbs().maxCoeff() < 1e-7) return;
    vertices.push_back(v);
  };

  // All size-d subsets of rows.
  if (m < d) return vertices;
  for (;;) {
    try_combo();
    int i = d - 1;
    while (i >= 0 && combo[i] == m - d + i) --i;
    if (i < 0) break;
    ++combo[i];
    for (int j = i + 1; j < d; ++j) combo[j] = combo[j - 1] + 1;
  }
  return vertices;
}

bool contains(const Polytope& fps, const VectorXd& point, double tol) {
  if (point.size() != fps.dim()) throw DimensionMismatch("contains: point length");
  if (fps.rows() == 0) return true;
  return ((fps.normals * point - fps.offsets).array() <= tol).all();
}

bool is_empty(const Polytope& fps) {
  if (fps.rows() == 0) return false;
  conic::ConicProgram lp;
  lp.n = fps.dim();
  lp.q = VectorXd::Zero(fps.dim());
  lp.G = fps.normals;
  lp.h = fps.offsets;
  return conic::solve(lp).status == conic::SolveStatus::Infeasible;
}

}  // namespace asmpc::setmem
