#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>

#include "error.hpp"
#include "synthdata.hpp"
#include "test_support.hpp"

using namespace supwma;
using supwma::test::slurp;
using supwma::test::temp_dir;

namespace {

double dist(const Point3& a, const Point3& b) { return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z); }

// Distance from p to the curve over u in [lo, hi]: dense grid, then a
// golden-section refinement around the best grid point.
double distance_to_curve(const ClusterPrototype& proto, const Point3& p, double lo, double hi) {
  const int grid = 4000;
  double best_u = lo, best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= grid; ++k) {
    const double u = lo + (hi - lo) * k / grid;
    const double d = dist(proto.at(u), p);
    if (d < best) best = d, best_u = u;
  }
  double a = best_u - (hi - lo) / grid, b = best_u + (hi - lo) / grid;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double c = b - phi * (b - a), d = a + phi * (b - a);
    if (dist(proto.at(c), p) < dist(proto.at(d), p)) b = d;
    else a = c;
  }
  return std::min(best, dist(proto.at((a + b) / 2), p));
}

GenConfig small_config() {
  GenConfig cfg;
  cfg.clusters = 4;
  cfg.streamlines_per_cluster = 50;
  cfg.confusable_pairs = 1;
  return cfg;
}

}  // namespace

TEST_CASE("gen_prototypes") {
  GenConfig cfg;
  cfg.clusters = 2;
  cfg.confusable_pairs = 0;
  const auto two = gen_prototypes(cfg);
  REQUIRE(two.size() == 2);
  CHECK(dist(two[0].centroid(), two[1].centroid()) >= std::max(4.0 * cfg.point_noise, 15.0));

  const GenConfig def;
  const auto protos = gen_prototypes(def);
  REQUIRE(protos.size() == 20);
  for (std::size_t p = 0; p < def.confusable_pairs; ++p) {
    const auto& a = protos[2 * p];
    const auto& b = protos[2 * p + 1];
    CHECK(a.family == b.family);
    CHECK(a.radius == b.radius);
    CHECK(a.span == b.span);
    CHECK(a.torsion == b.torsion);
    CHECK(a.rotation == b.rotation);
    CHECK_FALSE(a.translation == b.translation);
    CHECK(std::abs(a.length() - b.length()) == 0.0);
  }
  for (std::size_t i = 0; i < protos.size(); ++i)
    for (std::size_t j = i + 1; j < protos.size(); ++j) {
      const bool twins = j < 2 * def.confusable_pairs && i + 1 == j && i % 2 == 0;
      if (!twins) CHECK(dist(protos[i].centroid(), protos[j].centroid()) >= 15.0);
    }

  const auto again = gen_prototypes(def);
  for (std::size_t i = 0; i < protos.size(); ++i) {
    CHECK(again[i].rotation == protos[i].rotation);
    CHECK(again[i].translation == protos[i].translation);
    CHECK(again[i].radius == protos[i].radius);
  }
}

TEST_CASE("noise-free samples lie on the curve and reversal flips endpoints") {
  GenConfig cfg;
  cfg.point_noise = 0.0;
  cfg.endpoint_jitter = 0.0;
  const auto protos = gen_prototypes(cfg);
  SeededRng rng(4);
  int reversed = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto& proto = protos[trial % protos.size()];
    const SampledStreamline s = sample_streamline(proto, rng);
    const auto& pts = s.streamline.points;
    CHECK((pts.size() >= 30 && pts.size() <= 60));
    for (const Point3& p : pts) CHECK(distance_to_curve(proto, p, 0.0, 1.0) < 1e-9);
    const Point3 start = proto.at(0.0), end = proto.at(1.0);
    if (s.reversed) {
      ++reversed;
      CHECK(dist(pts.front(), end) < 1e-12);
      CHECK(dist(pts.back(), start) < 1e-12);
    } else {
      CHECK(dist(pts.front(), start) < 1e-12);
      CHECK(dist(pts.back(), end) < 1e-12);
    }
  }
  CHECK(reversed > 0);
  CHECK(reversed < 30);
}

TEST_CASE("point noise has the half-normal mean absolute deviation") {
  GenConfig cfg;
  cfg.endpoint_jitter = 0.0;
  cfg.point_noise = 1.5;
  const auto protos = gen_prototypes(cfg);
  SeededRng rng(5);
  double sum = 0.0;
  std::size_t n = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const auto& proto = protos[trial % protos.size()];
    const SampledStreamline s = sample_streamline(proto, rng);
    const auto& pts = s.streamline.points;
    const std::size_t count = pts.size();
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t idx = s.reversed ? count - 1 - k : k;
      const Point3 c = proto.at(static_cast<double>(k) / static_cast<double>(count - 1));
      sum += std::abs(pts[idx].x - c.x) + std::abs(pts[idx].y - c.y) + std::abs(pts[idx].z - c.z);
      n += 3;
    }
  }
  const double expect = 1.5 * std::sqrt(2.0 / M_PI);
  CHECK(std::abs(sum / static_cast<double>(n) - expect) < 0.05 * expect);
}

TEST_CASE("generate: counts, labels and determinism") {
  const GenConfig cfg = small_config();
  const SyntheticDataset ds = generate(cfg);
  const std::size_t outliers = cfg.outlier_count();
  CHECK(ds.train.size() + ds.val.size() + ds.test.size() == 4 * 50 + outliers);

  std::map<std::int32_t, std::size_t> per_class;
  for (const auto* s : {&ds.train, &ds.val, &ds.test})
    for (auto l : *s->labels) ++per_class[l];
  for (std::int32_t c = 0; c < 4; ++c) CHECK(per_class[c] == 50);
  CHECK(per_class[4] == outliers);
  CHECK(per_class.size() == 5);
  CHECK(ds.manifest.at("outlier_label") == 4);

  const auto& splits = ds.manifest.at("splits");
  CHECK(splits.at("train").at("count") == ds.train.size());
  CHECK(splits.at("train").at("per_class").at(0) == 35);
  CHECK(splits.at("val").at("per_class").at(0) == 5);
  CHECK(splits.at("test").at("per_class").at(0) == 10);

  const SyntheticDataset again = generate(cfg);
  CHECK(again.train == ds.train);
  CHECK(again.test == ds.test);
}

TEST_CASE("default corpus size") {
  const GenConfig cfg;
  CHECK(cfg.outlier_count() + cfg.clusters * cfg.streamlines_per_cluster == 20000);
}

TEST_CASE("gen_dataset writes identical bytes for the same seed") {
  const auto a = temp_dir("gen_a"), b = temp_dir("gen_b");
  const auto manifest = gen_dataset(small_config(), a);
  gen_dataset(small_config(), b);
  CHECK(manifest == a / "manifest.json");
  for (const char* f : {"train.slp", "val.slp", "test.slp", "train_labels.csv", "val_labels.csv",
                        "test_labels.csv", "manifest.json"}) {
    CHECK(std::filesystem::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto train = read_slp(a / "train.slp");
  const auto labels = read_labels(a / "train_labels.csv", train.size());
  for (auto l : labels) CHECK((l >= 0 && l <= 4));
}

TEST_CASE("invalid generator configs") {
  GenConfig cfg;
  cfg.train_fraction = 0.9;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.clusters = 3;
  cfg.confusable_pairs = 2;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.outlier_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_THROWS_AS(GenConfig::from_json(nlohmann::json{{"clusters", "many"}}), Error);
}

TEST_CASE("confusable twins share every pose-invariant shape descriptor") {
  const auto protos = gen_prototypes(GenConfig{});
  auto descriptor = [](const ClusterPrototype& p) {
    // Sorted pairwise distances between 12 noise-free curve points.
    std::vector<double> d;
    for (int i = 0; i < 12; ++i)
      for (int j = i + 1; j < 12; ++j) d.push_back(dist(p.at(i / 11.0), p.at(j / 11.0)));
    return d;
  };
  const auto a = descriptor(protos[0]), b = descriptor(protos[1]);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-9);
}

TEST_CASE("nearest-centroid baseline separates non-confusable clusters") {
  const GenConfig cfg;
  const SyntheticDataset ds = generate(cfg);
  const std::size_t n = 15;
  const auto protos = ds.prototypes;

  std::vector<Streamline> proto_lines;
  for (const auto& p : protos) {
    Streamline s;
    for (std::size_t k = 0; k < n; ++k) s.points.push_back(p.at(static_cast<double>(k) / (n - 1)));
    proto_lines.push_back(s);
  }
  auto sq = [&](const Streamline& a, const Streamline& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < n; ++k) d += std::pow(dist(a.points[k], b.points[k]), 2);
    return d;
  };

  // Class means of orientation-aligned training streamlines.
  std::vector<std::vector<Point3>> sums(cfg.clusters, std::vector<Point3>(n));
  std::vector<std::size_t> counts(cfg.clusters, 0);
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    const auto label = static_cast<std::size_t>((*ds.train.labels)[i]);
    if (label >= cfg.clusters) continue;
    Streamline r = resample(ds.train.streamlines[i], n);
    if (sq(reverse(r), proto_lines[label]) < sq(r, proto_lines[label])) r = reverse(r);
    for (std::size_t k = 0; k < n; ++k) {
      sums[label][k].x += r.points[k].x;
      sums[label][k].y += r.points[k].y;
      sums[label][k].z += r.points[k].z;
    }
    ++counts[label];
  }
  std::vector<Streamline> means(cfg.clusters);
  for (std::size_t c = 0; c < cfg.clusters; ++c)
    for (const auto& p : sums[c]) {
      const double k = static_cast<double>(counts[c]);
      means[c].points.push_back({p.x / k, p.y / k, p.z / k});
    }

  std::size_t total = 0, correct = 0;
  for (std::size_t i = 0; i < ds.test.size(); ++i) {
    const auto label = static_cast<std::size_t>((*ds.test.labels)[i]);
    if (label >= cfg.clusters || label < 2 * cfg.confusable_pairs) continue;
    const Streamline r = resample(ds.test.streamlines[i], n);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cfg.clusters; ++c) {
      const double d = std::min(sq(r, means[c]), sq(reverse(r), means[c]));
      if (d < best_d) best_d = d, best = c;
    }
    ++total;
    correct += best == label;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(total) >= 0.95);
}
