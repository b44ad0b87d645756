#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "error.hpp"
#include "metrics.hpp"
#include "rng.hpp"

using namespace supwma;

namespace {

ConfusionMatrix from_rows(const std::vector<std::vector<int>>& rows) {
  ConfusionMatrix cm(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows.size(); ++c)
      for (int n = 0; n < rows[r][c]; ++n) cm.add(r, c);
  return cm;
}

struct BruteForce {
  double accuracy;
  std::vector<double> f1;  // NaN where undefined
  double mean;
  double stddev;
};

BruteForce brute_force(const std::vector<std::int32_t>& truth, const std::vector<std::int32_t>& pred,
                       std::size_t k) {
  BruteForce out{};
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == pred[i];
  out.accuracy = static_cast<double>(hits) / static_cast<double>(truth.size());
  std::vector<double> included;
  for (std::size_t c = 0; c < k; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool t = truth[i] == static_cast<std::int32_t>(c);
      const bool p = pred[i] == static_cast<std::int32_t>(c);
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
    }
    if (tp + fn == 0 && tp + fp == 0) {
      out.f1.push_back(NAN);
      continue;
    }
    const double f = 2 * tp / (2 * tp + fp + fn);
    out.f1.push_back(f);
    included.push_back(f);
  }
  double sum = 0;
  for (double f : included) sum += f;
  out.mean = sum / static_cast<double>(included.size());
  double sq = 0;
  for (double f : included) sq += (f - out.mean) * (f - out.mean);
  out.stddev = std::sqrt(sq / static_cast<double>(included.size()));
  return out;
}

double brute_cir(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& expected,
                 std::size_t threshold) {
  const std::set<std::int32_t> unique(expected.begin(), expected.end());
  std::size_t found = 0;
  for (std::int32_t id : unique) {
    std::size_t n = 0;
    for (std::int32_t p : pred) n += p == id;
    found += n >= threshold;
  }
  return static_cast<double>(found) / static_cast<double>(unique.size());
}

}  // namespace

TEST_CASE("confusion and accuracy") {
  const std::vector<std::int32_t> t{0, 1, 2, 1};
  const ConfusionMatrix perfect = confusion(t, t, 3);
  CHECK(perfect.trace() == 4);
  CHECK(accuracy(perfect) == 1.0);
  CHECK(confusion({}, {}, 3).total() == 0);
  CHECK_THROWS_AS(accuracy(confusion({}, {}, 3)), Error);
  CHECK(accuracy(from_rows({{0, 5}, {5, 0}})) == 0.0);
  CHECK(accuracy(from_rows({{3, 1}, {2, 4}})) == doctest::Approx(0.7).epsilon(1e-15));

  const std::vector<std::int32_t> bad{3};
  const std::vector<std::int32_t> zero{0};
  CHECK_THROWS_AS(confusion(bad, zero, 3), Error);
  CHECK_THROWS_AS(confusion(zero, t, 3), Error);
}

TEST_CASE("confusion matches a nested-loop count") {
  SeededRng rng(1);
  std::vector<std::int32_t> t(100), p(100);
  for (std::size_t i = 0; i < 100; ++i) {
    t[i] = static_cast<std::int32_t>(rng.below(5));
    p[i] = static_cast<std::int32_t>(rng.below(5));
  }
  const ConfusionMatrix cm = confusion(t, p, 5);
  for (std::int32_t r = 0; r < 5; ++r)
    for (std::int32_t c = 0; c < 5; ++c) {
      std::uint64_t n = 0;
      for (std::size_t i = 0; i < 100; ++i) n += t[i] == r && p[i] == c;
      CHECK(cm.at(r, c) == n);
    }
}

TEST_CASE("macro F1 examples") {
  const MacroF1 perfect = macro_f1(from_rows({{2, 0}, {0, 3}}));
  CHECK(perfect.mean == 1.0);
  CHECK(perfect.stddev == 0.0);

  const MacroF1 f = macro_f1(from_rows({{1, 1}, {0, 2}}));
  CHECK(std::abs(*f.per_class[0] - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(*f.per_class[1] - 4.0 / 5.0) < 1e-15);
  CHECK(f.mean == doctest::Approx(0.7333).epsilon(1e-4));
  CHECK(f.stddev == doctest::Approx(0.0667).epsilon(1e-3));

  const MacroF1 absent = macro_f1(from_rows({{2, 0, 0}, {0, 0, 0}, {1, 0, 1}}));
  CHECK_FALSE(absent.per_class[1].has_value());
  CHECK(absent.excluded == std::vector<std::size_t>{1});

  const MacroF1 never_right = macro_f1(from_rows({{0, 2}, {0, 1}}));
  CHECK(*never_right.per_class[0] == 0.0);

  CHECK_THROWS_AS(macro_f1(ConfusionMatrix(1)), Error);
}

TEST_CASE("property: metrics agree with brute-force counting") {
  SeededRng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng.below(9), n = 1 + rng.below(200);
    std::vector<std::int32_t> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = static_cast<std::int32_t>(rng.below(k));
      p[i] = rng.uniform() < 0.5 ? t[i] : static_cast<std::int32_t>(rng.below(k));
    }
    const ConfusionMatrix cm = confusion(t, p, k);
    const BruteForce bf = brute_force(t, p, k);
    CHECK(std::abs(accuracy(cm) - bf.accuracy) < 1e-12);
    const MacroF1 f = macro_f1(cm);
    CHECK(std::abs(f.mean - bf.mean) < 1e-12);
    CHECK(std::abs(f.stddev - bf.stddev) < 1e-12);
    for (std::size_t c = 0; c < k; ++c) {
      CHECK(f.per_class[c].has_value() == !std::isnan(bf.f1[c]));
      if (f.per_class[c]) CHECK(std::abs(*f.per_class[c] - bf.f1[c]) < 1e-12);
    }

    std::vector<std::int32_t> expected(1 + rng.below(k));
    for (auto& e : expected) e = static_cast<std::int32_t>(rng.below(k));
    const std::size_t threshold = 1 + rng.below(30);
    CHECK(std::abs(cluster_identification_rate(p, expected, threshold) - brute_cir(p, expected, threshold)) <
          1e-12);
  }
}

TEST_CASE("property: macro F1 is invariant under a shared row/column permutation") {
  SeededRng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.below(6);
    std::vector<std::vector<int>> rows(k, std::vector<int>(k));
    for (auto& r : rows)
      for (auto& v : r) v = static_cast<int>(rng.below(5));
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    std::vector<std::vector<int>> permuted(k, std::vector<int>(k));
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t c = 0; c < k; ++c) permuted[r][c] = rows[perm[r]][perm[c]];
    const ConfusionMatrix a = from_rows(rows), b = from_rows(permuted);
    if (a.total() == 0) continue;
    CHECK(std::abs(macro_f1(a).mean - macro_f1(b).mean) < 1e-12);
  }
}

TEST_CASE("cluster identification rate") {
  std::vector<std::int32_t> pred;
  pred.insert(pred.end(), 25, 0);
  pred.insert(pred.end(), 19, 1);
  pred.insert(pred.end(), 20, 2);
  const std::vector<std::int32_t> expected{0, 1, 2};
  CHECK(cluster_identification_rate(pred, expected, 20) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(cluster_identification_rate(pred, expected) == cluster_identification_rate(pred, expected, 20));

  double previous = 1.0;
  for (std::size_t th = 1; th <= 30; ++th) {
    const double cir = cluster_identification_rate(pred, expected, th);
    CHECK(cir <= previous);
    previous = cir;
  }
  CHECK_THROWS_AS(cluster_identification_rate(pred, {}, 20), Error);
  CHECK_THROWS_AS(cluster_identification_rate(pred, expected, 0), Error);
}

TEST_CASE("metrics report") {
  const std::vector<std::int32_t> t{0, 1, 1}, p{0, 1, 0};
  const MetricsReport r = make_report(t, p, 2);
  CHECK(r.samples == 3);
  CHECK(r.accuracy == doctest::Approx(2.0 / 3.0));
  const auto j = r.to_json(true);
  CHECK(j.at("accuracy").get<double>() == doctest::Approx(2.0 / 3.0));
  CHECK(j.contains("confusion"));
  CHECK_FALSE(r.to_json(false).contains("confusion"));
  CHECK_THROWS_AS(make_report({}, {}, 2), Error);
}
