#include <doctest.h>

#include <Eigen/QR>
#include <cmath>
#include <numeric>

#include "error.hpp"
#include "losses.hpp"
#include "scl_oracle.hpp"
#include "test_support.hpp"

using namespace supwma;
using nn::Matrix;
using supwma::test::random_unit_rows;
using supwma::test::scl_nested_loop;

namespace {

std::vector<std::int32_t> random_labels(std::size_t m, std::size_t classes, SeededRng& rng) {
  std::vector<std::int32_t> labels(m);
  for (auto& l : labels) l = static_cast<std::int32_t>(rng.below(classes));
  return labels;
}

Matrix three_sample(double t) {
  // z3 slides from (0,1) toward (1,0) along the unit circle.
  const double angle = (1.0 - t) * M_PI / 2.0;
  Matrix z(3, 2);
  z << 1, 0, 1, 0, std::cos(angle), std::sin(angle);
  return z;
}

}  // namespace

TEST_CASE("scl_loss special cases") {
  SUBCASE("two identical positives give exactly zero") {
    Matrix z(2, 3);
    z << 0, 1, 0, 0, 1, 0;
    const std::vector<std::int32_t> labels{4, 4};
    const nn::LossGrad lg = scl_loss(z, labels);
    CHECK(lg.loss == 0.0);
  }

  SUBCASE("all unique classes give zero") {
    SeededRng rng(1);
    const Matrix z = random_unit_rows(6, 4, rng);
    const std::vector<std::int32_t> labels{0, 1, 2, 3, 4, 5};
    const nn::LossGrad lg = scl_loss(z, labels);
    CHECK(lg.loss == 0.0);
    CHECK(lg.grad.isZero(0.0));
  }

  SUBCASE("three-sample embedding") {
    const Matrix z = three_sample(0.0);
    const std::vector<std::int32_t> labels{0, 0, 1};
    const nn::LossGrad lg = scl_loss(z, labels, {0.1});
    const double expect = 2.0 * std::log1p(std::exp(-10.0));
    CHECK(std::abs(lg.loss - expect) < 1e-12);
    CHECK(std::abs(lg.loss - scl_nested_loop(z, labels, 0.1)) < 1e-12);

    Matrix x = z;
    const double rel = nn::finite_difference_check(
        [&](std::span<const double> v) {
          std::copy(v.begin(), v.end(), x.data());
          return scl_loss(x, labels, {0.1}).loss;
        },
        nn::flat(z), nn::flat(lg.grad), 9e-7);
    CHECK(rel < 1e-6);
  }
}

TEST_CASE("scl_loss argument errors") {
  const std::vector<std::int32_t> one{0};
  CHECK_THROWS_AS(scl_loss(Matrix::Identity(1, 2), one), Error);
  const std::vector<std::int32_t> two{0, 0};
  CHECK_THROWS_AS(scl_loss(Matrix::Constant(2, 2, 1.0), two), Error);
  CHECK_THROWS_AS(scl_loss(Matrix::Identity(2, 2), one), Error);
  CHECK_THROWS_AS(scl_loss(Matrix::Identity(2, 2), two, {0.0}), Error);
}

TEST_CASE("property: scl_loss equals the nested-loop oracle") {
  SeededRng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 2 + rng.below(63), classes = 2 + rng.below(7);
    const Matrix z = random_unit_rows(static_cast<Eigen::Index>(m), 16, rng);
    const auto labels = random_labels(m, classes, rng);
    const double loss = scl_loss(z, labels).loss;
    CHECK(std::abs(loss - scl_nested_loop(z, labels, 0.1)) < 1e-9);
    CHECK(loss >= 0.0);
  }
}

TEST_CASE("property: scl_loss gradient passes finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SeededRng rng(seed);
    const std::size_t m = 2 + rng.below(31);
    const Matrix z = random_unit_rows(static_cast<Eigen::Index>(m), 8, rng);
    const auto labels = random_labels(m, 3, rng);
    const nn::LossGrad lg = scl_loss(z, labels, {0.5});
    // h = 1e-7 keeps perturbed rows inside the unit-norm tolerance.
    Matrix x = z;
    const double rel = nn::finite_difference_check(
        [&](std::span<const double> v) {
          std::copy(v.begin(), v.end(), x.data());
          return scl_loss(x, labels, {0.5}).loss;
        },
        nn::flat(z), nn::flat(lg.grad), 1e-7);
    CHECK(rel < 1e-5);
  }
}

TEST_CASE("property: scl_loss invariances") {
  SeededRng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 4 + rng.below(28);
    const Matrix z = random_unit_rows(static_cast<Eigen::Index>(m), 6, rng);
    const auto labels = random_labels(m, 3, rng);
    const double base = scl_loss(z, labels).loss;

    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd::NullaryExpr(
                                                                        6, 6, [&] { return rng.normal(); }))
                                  .householderQ();
    const Matrix rotated = z * q;
    CHECK(std::abs(scl_loss(rotated, labels).loss - base) < 1e-9);

    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    Matrix zp(z.rows(), z.cols());
    std::vector<std::int32_t> lp(m);
    for (std::size_t i = 0; i < m; ++i) {
      zp.row(static_cast<Eigen::Index>(i)) = z.row(static_cast<Eigen::Index>(perm[i]));
      lp[i] = labels[perm[i]];
    }
    CHECK(std::abs(scl_loss(zp, lp).loss - base) < 1e-12);
  }
}

TEST_CASE("moving the negative toward the positives increases the loss") {
  const std::vector<std::int32_t> labels{0, 0, 1};
  double previous = scl_loss(three_sample(0.0), labels).loss;
  for (int step = 1; step <= 10; ++step) {
    const double loss = scl_loss(three_sample(step / 10.0), labels).loss;
    CHECK(loss > previous);
    previous = loss;
  }
}

TEST_CASE("scl_loss stays finite for nearly parallel rows") {
  Matrix z = Matrix::Zero(64, 4);
  z.col(0).setOnes();
  const std::vector<std::int32_t> labels(64, 0);
  std::vector<std::int32_t> mixed(64);
  for (std::size_t i = 0; i < 64; ++i) mixed[i] = static_cast<std::int32_t>(i % 2);
  CHECK(std::isfinite(scl_loss(z, labels, {0.01}).loss));
  const nn::LossGrad lg = scl_loss(z, mixed, {0.01});
  CHECK(std::isfinite(lg.loss));
  CHECK(lg.grad.allFinite());
}
