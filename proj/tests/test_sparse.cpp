#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "asmpc/errors.hpp"
#include "asmpc/rng.hpp"
#include "asmpc/sparse_recovery.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

using namespace asmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Exhaustive minimum-l1 oracle over all supports of size <= k. Only valid
// for small dimensions; used to cross-check the convex recovery.
VectorXd l1_oracle(const MatrixXd& A, const VectorXd& y, int k, double budget) {
  const int d = static_cast<int>(A.cols());
  double best = 1e300;
  VectorXd best_x = VectorXd::Zero(d);
  std::vector<int> support;
  auto try_support = [&](const std::vector<int>& s) {
    MatrixXd As(A.rows(), s.size());
    for (std::size_t j = 0; j < s.size(); ++j) As.col(j) = A.col(s[j]);
    VectorXd xs = As.colPivHouseholderQr().solve(y);
    if ((As * xs - y).norm() > budget + 1e-9) return;
    const double l1 = xs.cwiseAbs().sum();
    if (l1 < best) {
      best = l1;
      best_x.setZero();
      for (std::size_t j = 0; j < s.size(); ++j) best_x(s[j]) = xs(j);
    }
  };
  for (int i = 0; i < d; ++i) {
    try_support({i});
    for (int j = i + 1; j < d; ++j)
      if (k >= 2) try_support({i, j});
  }
  return best_x;
}

}  // namespace

TEST_CASE("sample count formula and its guards") {
  CHECK(sparse::required_sample_count(2, 10, 0.1, 1.0) == 367);
  // Tiny leading constants floor out at dim + 1.
  CHECK(sparse::required_sample_count(1, 3, 0.3, 0.1) == 4);
  CHECK_THROWS_AS(sparse::required_sample_count(2, 4, 0.1, 1.0), InvalidArgument);
  CHECK_THROWS_AS(sparse::required_sample_count(2, 10, 0.5, 1.0), InvalidArgument);
  CHECK_THROWS_AS(sparse::required_sample_count(2, 10, 0.1, -1.0), InvalidArgument);
}

TEST_CASE("offline regressors are N(0, 1/q)") {
  RngStream rng(3);
  MatrixXd sensing = sparse::generate_offline_regressors(400, 1, 10, rng);
  CHECK(sensing.rows() == 400);
  CHECK(sensing.cols() == 10);
  const double var = sensing.array().square().mean();
  CHECK(var == doctest::Approx(1.0 / 400.0).epsilon(0.1));
}

TEST_CASE("noiseless recovery is exact and matches the exhaustive oracle") {
  RngStream rng(91);
  for (int trial = 0; trial < 5; ++trial) {
    const int d = 8, q = 40;
    MatrixXd A(q, d);
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < d; ++j) A(i, j) = rng.gaussian() / std::sqrt(static_cast<double>(q));
    VectorXd h = VectorXd::Zero(d);
    h(trial % d) = -1.0;
    h((trial + 3) % d) = 2.0;
    const VectorXd y = A * h;

    const VectorXd recovered = sparse::bpdn_recover(A, y, 0.0);
    CHECK((recovered - h).norm() < 1e-6);
    const VectorXd ref = l1_oracle(A, y, 2, 0.0);
    CHECK((recovered - ref).norm() < 1e-6);
  }
}

TEST_CASE("infeasible residual budget is rejected up front") {
  RngStream rng(17);
  MatrixXd A(6, 2);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 2; ++j) A(i, j) = rng.gaussian();
  VectorXd y(6);
  for (int i = 0; i < 6; ++i) y(i) = rng.gaussian();
  CHECK_THROWS_AS(sparse::bpdn_recover(A, y, 1e-9), InfeasibleBudget);
}

TEST_CASE("offline phase bounds the recovery error and brackets the truth") {
  plant::ImpulseResponse truth;
  truth.coefficients = MatrixXd::Zero(1, 10);
  truth.coefficients(0, 0) = -1.0;
  truth.coefficients(0, 8) = -2.0;
  truth.sparsity_index = 2;
  const plant::DisturbanceModel dist = plant::uniform_disturbance(VectorXd::Constant(1, 0.1));

  const double c_bar = 2.0 * std::sqrt(2.0);
  const sparse::Fsps fsps = sparse::offline_phase(truth, dist, 2, 0.1, 1.0, c_bar, 424242);
  CHECK(fsps.q == 367);
  const double radius = c_bar * std::sqrt(367.0) * 0.1;
  CHECK(fsps.radii_l2(0) == doctest::Approx(radius));
  CHECK((fsps.centers.row(0).transpose() - truth.coefficients.row(0).transpose()).norm() <
        radius);
  for (int j = 0; j < 10; ++j) {
    CHECK(fsps.box_lower(0, j) <= truth.coefficients(0, j) + 1e-9);
    CHECK(fsps.box_upper(0, j) >= truth.coefficients(0, j) - 1e-9);
    CHECK(fsps.box_upper(0, j) - fsps.box_lower(0, j) < 2.0 * radius);
  }
  // The interval hull is much tighter than the l2 ball (diameter ~10.8 for
  // these parameters) whenever the sensing Gram matrix is well conditioned;
  // that is the whole point.
  CHECK((fsps.box_upper - fsps.box_lower).maxCoeff() < 4.0);
}

TEST_CASE("parameter-set files round-trip exactly") {
  plant::ImpulseResponse truth;
  truth.coefficients = MatrixXd::Zero(1, 6);
  truth.coefficients(0, 1) = 0.5;
  truth.coefficients(0, 4) = -1.5;
  truth.sparsity_index = 2;
  const plant::DisturbanceModel dist = plant::uniform_disturbance(VectorXd::Constant(1, 0.05));
  const sparse::Fsps fsps = sparse::offline_phase(truth, dist, 2, 0.1, 1.0, 2.0, 7, 30);

  const std::string path = "fsps_roundtrip_test.dat";
  sparse::save_fsps(fsps, path);
  const sparse::Fsps back = sparse::load_fsps(path);
  std::remove(path.c_str());

  CHECK(back.q == fsps.q);
  CHECK(back.seed == fsps.seed);
  CHECK((back.centers - fsps.centers).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.radii_l2 - fsps.radii_l2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.box_lower - fsps.box_lower).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.box_upper - fsps.box_upper).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.gram - fsps.gram).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.ell_linear - fsps.ell_linear).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.ell_const - fsps.ell_const).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(sparse::load_fsps("no_such_file.dat"), IoError);
}
