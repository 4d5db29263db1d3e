#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "melohist/common.hpp"
#include "melohist/targets.hpp"

using namespace melohist;

namespace {

// Composite Simpson integration of the Gaussian pdf; independent oracle for
// the CDF-difference bin weights.
double simpson_gaussian_mass(double lo, double hi, double mu, double sigma, int intervals = 128) {
  auto pdf = [&](double x) {
    const double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * 3.14159265358979323846));
  };
  const double h = (hi - lo) / (2.0 * intervals);
  double sum = pdf(lo) + pdf(hi);
  for (int i = 1; i < 2 * intervals; ++i) {
    sum += pdf(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return sum * h / 3.0;
}

}  // namespace

TEST_SUITE("targets") {

TEST_CASE("gaussian_cdf anchors") {
  CHECK(gaussian_cdf(0.0, 0.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(gaussian_cdf(1.96, 0.0, 1.0) == doctest::Approx(0.9750021).epsilon(1e-3));
  CHECK(gaussian_cdf(-10.0, 0.0, 1.0) < 1e-20);
  CHECK(gaussian_cdf(2.0 - 10.0 * 0.3, 2.0, 0.3) < 1e-20);
  CHECK_THROWS_AS(gaussian_cdf(0.0, 0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(gaussian_cdf(0.0, 0.0, -1.0), std::domain_error);
}

TEST_CASE("gaussian_cdf against Simpson integration") {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const double mu = rng.uniform(-2.0, 2.0);
    const double sigma = rng.uniform(0.05, 1.5);
    const double x = mu + rng.uniform(-3.0, 3.0) * sigma;
    const double oracle = 0.5 + (x >= mu ? simpson_gaussian_mass(mu, x, mu, sigma, 256)
                                         : -simpson_gaussian_mass(x, mu, mu, sigma, 256));
    CHECK(gaussian_cdf(x, mu, sigma) == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("bin_weights concentrates around the mean") {
  const BinGrid grid = make_grid(GridKind::VoicedOnly);
  const int j = 200;
  const double mu = grid.center(j);
  const Eigen::VectorXd p = bin_weights(grid, mu, grid.bin_width);
  int argmax = 0;
  p.maxCoeff(&argmax);
  CHECK(argmax + 1 == j);
  CHECK(p.sum() > 1.0 - 1e-6);
  CHECK(p.sum() <= 1.0 + 1e-12);
}

TEST_CASE("bin_weights telescoping identity") {
  const BinGrid grid = make_grid(GridKind::Joint);
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    const double mu = rng.uniform(grid.a - 0.5, grid.right_end() + 0.5);
    const double sigma = rng.uniform(1e-3, 0.5);
    const Eigen::VectorXd p = bin_weights(grid, mu, sigma);
    const double expected =
        gaussian_cdf(grid.right_end(), mu, sigma) - gaussian_cdf(grid.a, mu, sigma);
    CHECK(std::fabs(p.sum() - expected) < 1e-12);
    CHECK(p.minCoeff() >= 0.0);
  }
}

TEST_CASE("bin_weights against per-bin Simpson integration") {
  const BinGrid grid = make_grid(GridKind::VoicedOnly);
  const Eigen::VectorXd p = bin_weights(grid, 2.0, 0.01042);
  for (int k = 1; k <= grid.num_bins; ++k) {
    const double oracle = simpson_gaussian_mass(grid.left_edge(k),
                                                grid.left_edge(k) + grid.bin_width, 2.0, 0.01042);
    CHECK(std::fabs(p[k - 1] - oracle) < 1e-8);
  }
}

TEST_CASE("bin_weights translation consistency") {
  const BinGrid grid = make_grid(GridKind::VoicedOnly);
  const double mu = 1.5;
  const double sigma = 0.03;
  const int shift = 7;
  const Eigen::VectorXd base = bin_weights(grid, mu, sigma);
  const Eigen::VectorXd moved = bin_weights(grid, mu + shift * grid.bin_width, sigma);
  for (int k = 40; k + shift < grid.num_bins - 40; ++k) {
    CHECK(std::fabs(moved[k + shift] - base[k]) < 1e-9);
  }
}

TEST_CASE("fixed_sigma_targets at the unvoiced encoding") {
  const BinGrid grid = make_grid(GridKind::Joint);
  const TargetWeights t = fixed_sigma_targets(grid, -0.521);
  // The mean sits on the left support edge: half the mass falls below the
  // support, and nearly all of what remains lands in the first three bins.
  CHECK(t.p.sum() == doctest::Approx(0.5).epsilon(1e-6));
  const double first_three = t.p[0] + t.p[1] + t.p[2];
  CHECK(first_three / t.p.sum() > 0.93);
  CHECK(first_three == doctest::Approx(0.49865).epsilon(1e-3));
}

TEST_CASE("fixed_sigma_targets peaks at the encoded bin") {
  const BinGrid grid = make_grid(GridKind::Joint);
  const TargetWeights t = fixed_sigma_targets(grid, 2.0);
  int argmax = 0;
  t.p.maxCoeff(&argmax);
  CHECK(argmax + 1 == grid.bin_of(2.0));
}

TEST_CASE("fixed_sigma_targets deterministic") {
  const BinGrid grid = make_grid(GridKind::Joint);
  const TargetWeights a = fixed_sigma_targets(grid, 1.234);
  const TargetWeights b = fixed_sigma_targets(grid, 1.234);
  CHECK((a.p - b.p).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dynamic_sigma") {
  CHECK(dynamic_sigma(2.0, 2.5, 0.01042) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(dynamic_sigma(2.0, 2.0, 0.01042) == 0.01042);
  CHECK(dynamic_sigma(0.0, -0.521, 0.01042) == doctest::Approx(0.521).epsilon(1e-12));
  CHECK_THROWS_AS(dynamic_sigma(0.0, 0.0, 0.0), std::invalid_argument);

  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const double y = rng.uniform(-1.0, 4.0);
    const double y_hat = rng.uniform(-1.0, 4.0);
    const double floor = rng.uniform(1e-4, 0.1);
    CHECK(dynamic_sigma(y, y_hat, floor) == dynamic_sigma(y_hat, y, floor));
    CHECK(dynamic_sigma(y, y_hat, floor) >= floor);
  }
}

TEST_CASE("class_weights") {
  std::vector<FrameLabel> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(FrameLabel{220.0});
  for (int i = 0; i < 40; ++i) labels.push_back(FrameLabel{0.0});
  const ClassWeights w = class_weights(labels);
  CHECK(w.voiced == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(w.unvoiced == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(w.voiced + w.unvoiced == 1.0);

  const ClassWeights inverted = class_weights(labels, true);
  CHECK(inverted.voiced == doctest::Approx(0.4).epsilon(1e-15));

  std::vector<FrameLabel> all_voiced(10, FrameLabel{100.0});
  const ClassWeights wv = class_weights(all_voiced);
  CHECK(wv.voiced == 1.0);
  CHECK(wv.unvoiced == 0.0);

  std::vector<FrameLabel> mixed{FrameLabel{100.0}, FrameLabel{0.0}, FrameLabel{0.0},
                                FrameLabel{0.0}};
  const ClassWeights wm = class_weights(mixed);
  CHECK(wm.voiced == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(wm.unvoiced == doctest::Approx(0.75).epsilon(1e-15));

  CHECK_THROWS_AS(class_weights(std::vector<FrameLabel>{}), std::invalid_argument);
}

}  // TEST_SUITE
