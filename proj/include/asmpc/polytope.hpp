#pragma once

#include "asmpc/conic.hpp"

#include <Eigen/Dense>

#include <vector>

namespace asmpc::setmem {

// H-representation {h : normals * h <= offsets} over the vectorized impulse
// response [row_1, ..., row_ny]. row_time tracks cut age (-1 for box rows)
// so overflow merging can drop the oldest cuts first.
struct Polytope {
  Eigen::MatrixXd normals;
  Eigen::VectorXd offsets;
  std::vector<long> row_time;

  int dim() const { return static_cast<int>(normals.cols()); }
  int rows() const { return static_cast<int>(normals.rows()); }
};

struct PruneStats {
  int removed = 0;
  int merged = 0;
};

// Running FPS bookkeeping for one closed-loop run.
struct FpsHistory {
  Polytope current;
  long cut_count = 0;
  long pruned_count = 0;
  long merge_events = 0;
};

Polytope init_fps(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

// Appends the two halfspaces per output row implied by |y - H phi| <= w_bar.
// Vacuous rows (zero regressor) are skipped; an inconsistent vacuous cut
// (0 <= negative) throws EmptyDomain.
Polytope add_measurement_cut(const Polytope& fps, const Eigen::VectorXd& phi,
                             const Eigen::VectorXd& y, const Eigen::VectorXd& w_bar,
                             long t = 0);

// LP-certified redundancy removal, then (only if still above cap) merge of
// the oldest cuts into a bounding-box relaxation.
Polytope prune_redundant(const Polytope& fps, int cap, PruneStats* stats = nullptr);

double support_function(const Polytope& fps, const Eigen::VectorXd& direction);

// Test oracle; throws DimensionTooLarge above max_dim.
std::vector<Eigen::VectorXd> enumerate_vertices(const Polytope& fps, int max_dim = 6);

bool contains(const Polytope& fps, const Eigen::VectorXd& point, double tol = 1e-9);

bool is_empty(const Polytope& fps);

}  // namespace asmpc::setmem
