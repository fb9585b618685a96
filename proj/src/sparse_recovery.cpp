#include "asmpc/sparse_recovery.hpp"

#include "asmpc/conic.hpp"
#include "asmpc/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace asmpc::sparse {

using Eigen::MatrixXd;
using Eigen::VectorXd;

int required_sample_count(int k_bar, int dim, double delta_bar, double c_tilde) {
  if (k_bar < 1 || 2 * k_bar >= dim)
    throw InvalidArgument("required_sample_count: need 1 <= 2*k_bar < dim");
  if (delta_bar <= 0.0 || delta_bar >= std::sqrt(2.0) - 1.0)
    throw InvalidArgument("required_sample_count: delta_bar must lie in (0, sqrt(2)-1)");
  if (c_tilde <= 0.0) throw InvalidArgument("required_sample_count: c_tilde must be positive");
  const double raw =
      2.0 * c_tilde * k_bar * std::log(static_cast<double>(dim) / (2.0 * k_bar)) /
      (delta_bar * delta_bar);
  return std::max(dim + 1, static_cast<int>(std::ceil(raw)));
}

MatrixXd generate_offline_regressors(int q, int n_u, int m, RngStream& rng) {
  if (q < 1) throw InvalidArgument("generate_offline_regressors: q must be >= 1");
  const double sigma = 1.0 / std::sqrt(static_cast<double>(q));
  MatrixXd sensing(q, n_u * m);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < n_u * m; ++j) sensing(i, j) = sigma * rng.gaussian();
  return sensing;
}

OfflineDataset collect_offline_outputs(const plant::ImpulseResponse& truth,
                                       const MatrixXd& sensing,
                                       const plant::DisturbanceModel& disturbance,
                                       RngStream& rng) {
  const int q = static_cast<int>(sensing.rows());
  const int n_y = static_cast<int>(truth.coefficients.rows());
  if (truth.coefficients.cols() != sensing.cols())
    throw DimensionMismatch("collect_offline_outputs: sensing width != impulse length");
  if (disturbance.bound.size() != n_y)
    throw DimensionMismatch("collect_offline_outputs: disturbance bound length");

  OfflineDataset data;
  data.sensing = sensing;
  data.q = q;
  data.outputs.resize(q, n_y);
  const double sqrt_q = std::sqrt(static_cast<double>(q));
  for (int i = 0; i < n_y; ++i) {
    VectorXd clean = sensing * truth.coefficients.row(i).transpose();
    const double budget = sqrt_q * disturbance.bound(i);
    VectorXd noise(q);
    bool ok = false;
    for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
      for (int k = 0; k < q; ++k) noise(k) = rng.uniform_symmetric(disturbance.bound(i));
      ok = noise.norm() <= budget;
    }
    if (!ok) throw NoiseBudgetExceeded("collect_offline_outputs: could not realize noise budget");
    data.outputs.col(i) = clean + noise;
  }
  return data;
}

VectorXd bpdn_recover(const MatrixXd& sensing, const VectorXd& y, double budget) {
  if (budget < 0.0) throw InvalidArgument("bpdn_recover: negative budget");
  if (sensing.rows() != y.size()) throw DimensionMismatch("bpdn_recover: sensing/output mismatch");
  const int d = static_cast<int>(sensing.cols());

  // Infeasible-budget screen: distance from y to range(sensing).
  {
    VectorXd x_ls = sensing.colPivHouseholderQr().solve(y);
    if ((sensing * x_ls - y).norm() > budget + 1e-9)
      throw InfeasibleBudget("bpdn_recover: budget below distance to range of sensing matrix");
  }

  // Epigraph form over (x, s): min 1's  s.t.  x <= s, -x <= s, residual ball.
  conic::ConicProgram prog;
  prog.n = 2 * d;
  prog.q = VectorXd::Zero(2 * d);
  prog.q.tail(d).setOnes();
  prog.G = MatrixXd::Zero(2 * d, 2 * d);
  prog.G.topLeftCorner(d, d) = MatrixXd::Identity(d, d);
  prog.G.topRightCorner(d, d) = -MatrixXd::Identity(d, d);
  prog.G.bottomLeftCorner(d, d) = -MatrixXd::Identity(d, d);
  prog.G.bottomRightCorner(d, d) = -MatrixXd::Identity(d, d);
  prog.h = VectorXd::Zero(2 * d);

  if (budget <= 1e-12) {
    prog.A = MatrixXd::Zero(sensing.rows(), 2 * d);
    prog.A.leftCols(d) = sensing;
    prog.b = y;
  } else {
    conic::SocBlock ball;
    ball.F = MatrixXd::Zero(sensing.rows(), 2 * d);
    ball.F.leftCols(d) = sensing;
    ball.f = -y;
    ball.c = Eigen::RowVectorXd::Zero(2 * d);
    ball.d = budget;
    prog.soc_blocks.push_back(std::move(ball));
  }

  conic::Solution sol = conic::solve(prog);
  if (sol.status != conic::SolveStatus::Optimal)
    throw SolverFailure(std::string("bpdn_recover: solver returned ") +
                        conic::to_string(sol.status));
  return sol.primal.head(d);
}

Fsps build_fsps(const MatrixXd& centers, const OfflineDataset& data, const VectorXd& w_bar,
                double c_bar, std::uint64_t seed) {
  const int n_y = static_cast<int>(centers.rows());
  const int d = static_cast<int>(centers.cols());
  if (w_bar.size() != n_y) throw DimensionMismatch("build_fsps: w_bar length");
  if (data.sensing.cols() != d || data.outputs.cols() != n_y)
    throw DimensionMismatch("build_fsps: dataset dimensions");

  Fsps fsps;
  fsps.centers = centers;
  fsps.constant_c_bar = c_bar;
  fsps.q = data.q;
  fsps.seed = seed;
  const double sqrt_q = std::sqrt(static_cast<double>(data.q));
  fsps.radii_l2 = c_bar * sqrt_q * w_bar;

  fsps.gram = data.sensing.transpose() * data.sensing;
  fsps.ell_linear.resize(n_y, d);
  fsps.ell_const.resize(n_y);
  fsps.box_lower.resize(n_y, d);
  fsps.box_upper.resize(n_y, d);

  Eigen::LDLT<MatrixXd> ldlt(fsps.gram);
  if (ldlt.info() != Eigen::Success)
    throw NumericalBreakdown("build_fsps: sensing Gram matrix not factorizable");
  MatrixXd gram_inv = ldlt.solve(MatrixXd::Identity(d, d));

  for (int i = 0; i < n_y; ++i) {
    const VectorXd y = data.outputs.col(i);
    const double budget = sqrt_q * w_bar(i);
    const VectorXd g = data.sensing.transpose() * y;
    fsps.ell_linear.row(i) = g.transpose();
    fsps.ell_const(i) = y.squaredNorm() - budget * budget;

    // Interval hull of the ellipsoid {x'Gx - 2g'x + c <= 0} around the
    // least-squares center, then intersected with the recovery-error box.
    const VectorXd x_c = ldlt.solve(g);
    double rho = g.dot(x_c) - fsps.ell_const(i);
    if (rho < -1e-9) throw InfeasibleBudget("build_fsps: empty denoising constraint set");
    rho = std::max(rho, 0.0);
    for (int j = 0; j < d; ++j) {
      const double half_width = std::sqrt(std::max(rho * gram_inv(j, j), 0.0));
      const double lo_ell = x_c(j) - half_width;
      const double hi_ell = x_c(j) + half_width;
      fsps.box_lower(i, j) = std::max(lo_ell, centers(i, j) - fsps.radii_l2(i));
      fsps.box_upper(i, j) = std::min(hi_ell, centers(i, j) + fsps.radii_l2(i));
      if (fsps.box_lower(i, j) > fsps.box_upper(i, j)) {
        // Ball and constraint set barely separate; fall back to the midpoint.
        const double mid = 0.5 * (fsps.box_lower(i, j) + fsps.box_upper(i, j));
        fsps.box_lower(i, j) = fsps.box_upper(i, j) = mid;
      }
    }
  }
  return fsps;
}

Fsps offline_phase(const plant::ImpulseResponse& truth,
                   const plant::DisturbanceModel& disturbance, int k_bar, double delta_bar,
                   double c_tilde, double c_bar, std::uint64_t seed, int q_override) {
  const int d = static_cast<int>(truth.coefficients.cols());
  const int q = q_override > 0
                    ? q_override
                    : required_sample_count(k_bar, d, delta_bar, c_tilde);
  RngStream rng(seed, /*stream=*/0x0FF1);
  RngStream sensing_rng = rng.split(1);
  RngStream noise_rng = rng.split(2);
  MatrixXd sensing = generate_offline_regressors(q, 1, d, sensing_rng);
  OfflineDataset data = collect_offline_outputs(truth, sensing, disturbance, noise_rng);

  const double sqrt_q = std::sqrt(static_cast<double>(q));
  MatrixXd centers(truth.coefficients.rows(), d);
  for (int i = 0; i < centers.rows(); ++i)
    centers.row(i) =
        bpdn_recover(sensing, data.outputs.col(i), sqrt_q * disturbance.bound(i)).transpose();
  return build_fsps(centers, data, disturbance.bound, c_bar, seed);
}

namespace {

void write_matrix(std::ostream& os, const char* name, const MatrixXd& mat) {
  os << name << " " << mat.rows() << " " << mat.cols() << "\n";
  char buf[40];
  for (long i = 0; i < mat.rows(); ++i) {
    for (long j = 0; j < mat.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", mat(i, j));
      os << buf << (j + 1 < mat.cols() ? " " : "\n");
    }
  }
}

MatrixXd read_matrix(std::istream& is, const std::string& expect) {
  std::string name;
  long rows = 0, cols = 0;
  if (!(is >> name >> rows >> cols) || name != expect)
    throw IoError("fsps file: expected section '" + expect + "'");
  MatrixXd mat(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j)
      if (!(is >> mat(i, j))) throw IoError("fsps file: truncated section '" + expect + "'");
  return mat;
}

}  // namespace

void save_fsps(const Fsps& fsps, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("save_fsps: cannot open " + path);
  os.precision(17);
  os << "asmpc-fsps 1\n";
  os << "c_bar " << fsps.constant_c_bar << "\n";
  os << "q " << fsps.q << "\n";
  os << "seed " << fsps.seed << "\n";
  write_matrix(os, "centers", fsps.centers);
  write_matrix(os, "radii", fsps.radii_l2);
  write_matrix(os, "box_lower", fsps.box_lower);
  write_matrix(os, "box_upper", fsps.box_upper);
  write_matrix(os, "gram", fsps.gram);
  write_matrix(os, "ell_linear", fsps.ell_linear);
  write_matrix(os, "ell_const", fsps.ell_const);
  if (!os) throw IoError("save_fsps: write failed for " + path);
}

Fsps load_fsps(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("load_fsps: cannot open " + path);
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "asmpc-fsps" || version != 1)
    throw IoError("load_fsps: not a version-1 fsps file: " + path);
  Fsps fsps;
  std::string key;
  if (!(is >> key >> fsps.constant_c_bar) || key != "c_bar") throw IoError("fsps file: c_bar");
  if (!(is >> key >> fsps.q) || key != "q") throw IoError("fsps file: q");
  if (!(is >> key >> fsps.seed) || key != "seed") throw IoError("fsps file: seed");
  fsps.centers = read_matrix(is, "centers");
  fsps.radii_l2 = read_matrix(is, "radii");
  fsps.box_lower = read_matrix(is, "box_lower");
  fsps.box_upper = read_matrix(is, "box_upper");
  fsps.gram = read_matrix(is, "gram");
  fsps.ell_linear = read_matrix(is, "ell_linear");
  fsps.ell_const = read_matrix(is, "ell_const");
  return fsps;
}

}  // namespace asmpc::sparse
