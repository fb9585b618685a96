#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "asmpc/fir_plant.hpp"
#include "asmpc/rng.hpp"

#include <cmath>

using namespace asmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("shift operators implement the per-channel delay line") {
  const plant::ShiftOperators ops = plant::build_shift_operators(2, 3);
  VectorXd phi(6);
  phi << 1, 2, 3, 4, 5, 6;  // [u1(t-1..t-3), u2(t-1..t-3)]
  VectorXd u(2);
  u << 10, 20;
  VectorXd next = plant::shift_regressor(ops, phi, u);
  VectorXd expected(6);
  expected << 10, 1, 2, 20, 4, 5;
  CHECK((next - expected).norm() == 0.0);

  // W is nilpotent of index m per block: W^m = 0.
  CHECK((ops.W * ops.W * ops.W).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("plant step is the impulse response applied to the regressor") {
  plant::ImpulseResponse truth;
  truth.coefficients = MatrixXd(1, 4);
  truth.coefficients << -1, 0, 2, 0;
  VectorXd phi(4);
  phi << 1, 1, 1, 1;
  VectorXd w(1);
  w << 0.05;
  CHECK(plant::step(truth, phi, w)(0) == doctest::Approx(1.05));
  CHECK(truth.max_row_nonzeros() == 2);
}

TEST_CASE("uniform disturbance variance is bound^2 / 3") {
  VectorXd bound(2);
  bound << 0.1, 0.3;
  plant::DisturbanceModel model = plant::uniform_disturbance(bound);
  CHECK(model.variance(0, 0) == doctest::Approx(0.01 / 3.0));
  CHECK(model.variance(1, 1) == doctest::Approx(0.09 / 3.0));
  CHECK(model.variance(0, 1) == 0.0);

  // Empirical second moment of the sampler agrees with the analytic value.
  RngStream rng(77);
  double acc = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    VectorXd w = plant::sample_disturbance(model, rng);
    CHECK(std::abs(w(0)) <= bound(0));
    CHECK(std::abs(w(1)) <= bound(1));
    acc += w(0) * w(0);
  }
  CHECK(acc / draws == doctest::Approx(0.01 / 3.0).epsilon(0.02));
}

TEST_CASE("rng streams are reproducible and split-independent") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  // Draws from a parent do not perturb an already-derived child.
  RngStream parent(7);
  RngStream child_before = parent.split(3);
  parent.uniform();
  RngStream child_after = parent.split(3);
  for (int i = 0; i < 10; ++i) CHECK(child_before.next_u64() == child_after.next_u64());

  // Distinct substreams decorrelate immediately.
  RngStream s1 = RngStream(7).split(1);
  RngStream s2 = RngStream(7).split(2);
  CHECK(s1.next_u64() != s2.next_u64());
}

TEST_CASE("gaussian sampler has unit variance") {
  RngStream rng(2024);
  double sum = 0.0, sum2 = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sum2 += g * g;
  }
  CHECK(sum / draws == doctest::Approx(0.0).epsilon(0.02));
  CHECK(sum2 / draws == doctest::Approx(1.0).epsilon(0.02));
}
