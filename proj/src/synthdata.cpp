#include "synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "error.hpp"

namespace supwma {

namespace {

constexpr double kPi = std::numbers::pi;
// Lower bound on centroid separation between unrelated clusters, in mm.
constexpr double kMinSeparation = 15.0;
constexpr double kBoxHalfWidth = 45.0;
constexpr std::size_t kMinRawPoints = 30;
constexpr std::size_t kMaxRawPoints = 60;

std::array<double, 9> random_rotation(SeededRng& rng) {
  // Uniform unit quaternion.
  double q[4];
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& c : q) {
      c = rng.normal();
      norm += c * c;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  const double w = q[0] / norm, x = q[1] / norm, y = q[2] / norm, z = q[3] / norm;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
          2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
          2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
}

std::array<double, 9> axis_angle(const Point3& axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle), t = 1 - c;
  const double x = axis.x, y = axis.y, z = axis.z;
  return {t * x * x + c,     t * x * y - s * z, t * x * z + s * y,
          t * x * y + s * z, t * y * y + c,     t * y * z - s * x,
          t * x * z - s * y, t * y * z + s * x, t * z * z + c};
}

std::array<double, 9> compose(const std::array<double, 9>& a, const std::array<double, 9>& b) {
  std::array<double, 9> out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) out[3 * i + j] += a[3 * i + k] * b[3 * k + j];
  return out;
}

Point3 random_direction(SeededRng& rng) {
  double x, y, z, n;
  do {
    x = rng.normal();
    y = rng.normal();
    z = rng.normal();
    n = std::sqrt(x * x + y * y + z * z);
  } while (n < 1e-12);
  return {x / n, y / n, z / n};
}

double dist(const Point3& a, const Point3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

Point3 local_point(const ClusterPrototype& p, double u) {
  switch (p.family) {
    case CurveFamily::kArc: {
      const double theta = (u - 0.5) * p.span;
      return {p.radius * std::sin(theta), p.radius * std::cos(theta), 0.0};
    }
    case CurveFamily::kHelix: {
      const double theta = (u - 0.5) * p.span;
      return {p.radius * std::sin(theta), p.radius * std::cos(theta), p.torsion * theta};
    }
    case CurveFamily::kUFiber: {
      // Two straight legs of length `radius` pointing down (-y) from the
      // ends of the arc; parametrised by arc length.
      const double leg = p.radius;
      const double arc = p.radius * p.span;
      const double s = u * (2 * leg + arc);
      const double t0 = -0.5 * p.span;
      const double t1 = 0.5 * p.span;
      if (s < leg) {
        return {p.radius * std::sin(t0), p.radius * std::cos(t0) - (leg - s), 0.0};
      }
      if (s <= leg + arc) {
        const double theta = t0 + (s - leg) / p.radius;
        return {p.radius * std::sin(theta), p.radius * std::cos(theta), 0.0};
      }
      return {p.radius * std::sin(t1), p.radius * std::cos(t1) - (s - leg - arc), 0.0};
    }
  }
  return {};
}

std::vector<std::int32_t> class_counts(const StreamlineSet& set, std::size_t classes) {
  std::vector<std::int32_t> counts(classes, 0);
  for (std::int32_t y : *set.labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

nlohmann::json prototype_json(const ClusterPrototype& p) {
  return {{"id", p.id},
          {"family", to_string(p.family)},
          {"radius", p.radius},
          {"span", p.span},
          {"torsion", p.torsion},
          {"rotation", p.rotation},
          {"translation", {p.translation.x, p.translation.y, p.translation.z}}};
}

}  // namespace

std::string to_string(CurveFamily f) {
  switch (f) {
    case CurveFamily::kArc: return "arc";
    case CurveFamily::kUFiber: return "u-fiber";
    case CurveFamily::kHelix: return "helix";
  }
  return "unknown";
}

Point3 ClusterPrototype::at(double u) const {
  const Point3 l = local_point(*this, u);
  const auto& r = rotation;
  return {r[0] * l.x + r[1] * l.y + r[2] * l.z + translation.x,
          r[3] * l.x + r[4] * l.y + r[5] * l.z + translation.y,
          r[6] * l.x + r[7] * l.y + r[8] * l.z + translation.z};
}

double ClusterPrototype::length() const {
  switch (family) {
    case CurveFamily::kArc: return radius * span;
    case CurveFamily::kHelix: return span * std::sqrt(radius * radius + torsion * torsion);
    case CurveFamily::kUFiber: return 2 * radius + radius * span;
  }
  return 0.0;
}

Point3 ClusterPrototype::centroid() const {
  constexpr int kSamples = 64;
  Point3 c;
  for (int i = 0; i < kSamples; ++i) {
    const Point3 p = at(static_cast<double>(i) / (kSamples - 1));
    c.x += p.x;
    c.y += p.y;
    c.z += p.z;
  }
  return {c.x / kSamples, c.y / kSamples, c.z / kSamples};
}

void GenConfig::validate() const {
  require(clusters >= 2, ErrorCode::kInvalidArgument, "cluster count must be >= 2");
  require(streamlines_per_cluster >= 1, ErrorCode::kInvalidArgument, "streamlines per cluster must be >= 1");
  require(2 * confusable_pairs <= clusters, ErrorCode::kInvalidArgument, "too many confusable pairs for cluster count");
  require(outlier_fraction >= 0.0 && outlier_fraction < 1.0, ErrorCode::kInvalidArgument,
          "outlier fraction must be in [0, 1)");
  require(outlier_scale >= 0.0 && point_noise >= 0.0 && endpoint_jitter >= 0.0, ErrorCode::kInvalidArgument,
          "noise and scale parameters must be >= 0");
  const bool in_range = train_fraction >= 0.0 && val_fraction >= 0.0 && test_fraction >= 0.0;
  require(in_range && std::abs(train_fraction + val_fraction + test_fraction - 1.0) <= 1e-9,
          ErrorCode::kInvalidArgument, "split fractions must be non-negative and sum to 1");
}

std::size_t GenConfig::outlier_count() const {
  const double inliers = static_cast<double>(clusters * streamlines_per_cluster);
  return static_cast<std::size_t>(std::llround(inliers * outlier_fraction / (1.0 - outlier_fraction)));
}

nlohmann::json GenConfig::to_json() const {
  return {{"seed", seed},
          {"clusters", clusters},
          {"streamlines_per_cluster", streamlines_per_cluster},
          {"outlier_fraction", outlier_fraction},
          {"outlier_scale", outlier_scale},
          {"confusable_pairs", confusable_pairs},
          {"point_noise", point_noise},
          {"endpoint_jitter", endpoint_jitter},
          {"train_fraction", train_fraction},
          {"val_fraction", val_fraction},
          {"test_fraction", test_fraction}};
}

GenConfig GenConfig::from_json(const nlohmann::json& j) { return from_json(j, GenConfig{}); }

GenConfig GenConfig::from_json(const nlohmann::json& j, GenConfig base) {
  try {
    base.seed = j.value("seed", base.seed);
    base.clusters = j.value("clusters", base.clusters);
    base.streamlines_per_cluster = j.value("streamlines_per_cluster", base.streamlines_per_cluster);
    base.outlier_fraction = j.value("outlier_fraction", base.outlier_fraction);
    base.outlier_scale = j.value("outlier_scale", base.outlier_scale);
    base.confusable_pairs = j.value("confusable_pairs", base.confusable_pairs);
    base.point_noise = j.value("point_noise", base.point_noise);
    base.endpoint_jitter = j.value("endpoint_jitter", base.endpoint_jitter);
    base.train_fraction = j.value("train_fraction", base.train_fraction);
    base.val_fraction = j.value("val_fraction", base.val_fraction);
    base.test_fraction = j.value("test_fraction", base.test_fraction);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("bad generator config: ") + e.what());
  }
  return base;
}

std::vector<ClusterPrototype> gen_prototypes(const GenConfig& cfg) {
  cfg.validate();
  SeededRng rng(SeededRng::derive(cfg.seed, 100));
  const double min_sep = std::max(4.0 * cfg.point_noise, kMinSeparation);
  const double pair_shift = std::max(8.0 * cfg.point_noise, 10.0);

  std::vector<ClusterPrototype> protos;
  std::vector<Point3> centroids;
  auto far_enough = [&](const Point3& c, std::size_t skip) {
    for (std::size_t i = 0; i < centroids.size(); ++i) {
      if (i != skip && dist(c, centroids[i]) < min_sep) return false;
    }
    return true;
  };

  for (std::size_t id = 0; id < cfg.clusters; ++id) {
    const bool partner = id < 2 * cfg.confusable_pairs && id % 2 == 1;
    ClusterPrototype p;
    for (int attempt = 0;; ++attempt) {
      require(attempt < 10000, ErrorCode::kInvalidArgument, "cannot place cluster prototypes; reduce cluster count");
      if (partner) {
        p = protos[id - 1];
        const Point3 d = random_direction(rng);
        p.translation = {p.translation.x + pair_shift * d.x, p.translation.y + pair_shift * d.y,
                         p.translation.z + pair_shift * d.z};
      } else {
        p.family = static_cast<CurveFamily>(rng.below(3));
        p.radius = rng.uniform(8.0, 18.0);
        switch (p.family) {
          case CurveFamily::kArc: p.span = rng.uniform(0.6 * kPi, 1.2 * kPi); p.torsion = 0.0; break;
          case CurveFamily::kUFiber: p.span = rng.uniform(0.8 * kPi, 1.1 * kPi); p.torsion = 0.0; break;
          case CurveFamily::kHelix: p.span = rng.uniform(1.0 * kPi, 2.0 * kPi); p.torsion = rng.uniform(1.0, 3.0); break;
        }
        p.rotation = random_rotation(rng);
        p.translation = {rng.uniform(-kBoxHalfWidth, kBoxHalfWidth), rng.uniform(-kBoxHalfWidth, kBoxHalfWidth),
                         rng.uniform(-kBoxHalfWidth, kBoxHalfWidth)};
      }
      p.id = static_cast<std::int32_t>(id);
      p.point_noise = cfg.point_noise;
      p.endpoint_jitter = cfg.endpoint_jitter;
      // A confusable partner is allowed to sit close to its twin only.
      if (far_enough(p.centroid(), partner ? id - 1 : centroids.size())) break;
    }
    centroids.push_back(p.centroid());
    protos.push_back(p);
  }
  return protos;
}

SampledStreamline sample_streamline(const ClusterPrototype& proto, SeededRng& rng) {
  const std::size_t count = kMinRawPoints + rng.below(kMaxRawPoints - kMinRawPoints + 1);
  const double len = proto.length();
  auto jitter = [&] {
    if (proto.endpoint_jitter <= 0.0) return 0.0;
    return std::clamp(rng.normal(0.0, proto.endpoint_jitter) / len, -0.25, 0.25);
  };
  const double u0 = jitter();
  const double u1 = 1.0 + jitter();

  SampledStreamline out;
  out.streamline.points.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double u = u0 + (u1 - u0) * static_cast<double>(k) / static_cast<double>(count - 1);
    Point3 p = proto.at(u);
    if (proto.point_noise > 0.0) {
      p.x += rng.normal(0.0, proto.point_noise);
      p.y += rng.normal(0.0, proto.point_noise);
      p.z += rng.normal(0.0, proto.point_noise);
    }
    out.streamline.points.push_back(p);
  }
  out.reversed = rng.uniform() < 0.5;
  if (out.reversed) std::reverse(out.streamline.points.begin(), out.streamline.points.end());
  return out;
}

ClusterPrototype perturb(const ClusterPrototype& proto, double scale, SeededRng& rng) {
  ClusterPrototype p = proto;
  const Point3 d = random_direction(rng);
  const double shift = scale * rng.uniform(1.0, 2.0);
  p.translation = {p.translation.x + shift * d.x, p.translation.y + shift * d.y, p.translation.z + shift * d.z};
  p.radius *= rng.uniform(0.7, 1.3);
  p.span *= rng.uniform(0.8, 1.2);
  p.rotation = compose(axis_angle(random_direction(rng), rng.uniform(0.2, 0.5)), p.rotation);
  return p;
}

SyntheticDataset generate(const GenConfig& cfg) {
  cfg.validate();
  SyntheticDataset ds;
  ds.prototypes = gen_prototypes(cfg);
  const auto outlier_label = static_cast<std::int32_t>(cfg.clusters);
  const std::size_t classes = cfg.clusters + 1;

  SeededRng sample_rng(SeededRng::derive(cfg.seed, 101));
  SeededRng split_rng(SeededRng::derive(cfg.seed, 102));

  StreamlineSet* splits[3] = {&ds.train, &ds.val, &ds.test};
  for (auto* s : splits) s->labels.emplace();

  auto emit_class = [&](std::int32_t label, std::vector<Streamline> members) {
    split_rng.shuffle(members.begin(), members.end());
    const std::size_t total = members.size();
    const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(total)));
    const auto n_val = std::min(total - n_train,
                                static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(total))));
    for (std::size_t i = 0; i < total; ++i) {
      StreamlineSet& dst = i < n_train ? ds.train : i < n_train + n_val ? ds.val : ds.test;
      dst.streamlines.push_back(std::move(members[i]));
      dst.labels->push_back(label);
    }
  };

  for (const auto& proto : ds.prototypes) {
    std::vector<Streamline> members;
    members.reserve(cfg.streamlines_per_cluster);
    for (std::size_t i = 0; i < cfg.streamlines_per_cluster; ++i) {
      members.push_back(sample_streamline(proto, sample_rng).streamline);
    }
    emit_class(proto.id, std::move(members));
  }
  {
    std::vector<Streamline> outliers;
    outliers.reserve(cfg.outlier_count());
    for (std::size_t i = 0; i < cfg.outlier_count(); ++i) {
      const auto& base = ds.prototypes[sample_rng.below(ds.prototypes.size())];
      outliers.push_back(sample_streamline(perturb(base, cfg.outlier_scale, sample_rng), sample_rng).streamline);
    }
    emit_class(outlier_label, std::move(outliers));
  }

  // Interleave classes within each split.
  for (auto* s : splits) {
    std::vector<std::size_t> order(s->size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    split_rng.shuffle(order.begin(), order.end());
    StreamlineSet shuffled;
    shuffled.labels.emplace();
    for (std::size_t i : order) {
      shuffled.streamlines.push_back(std::move(s->streamlines[i]));
      shuffled.labels->push_back((*s->labels)[i]);
    }
    *s = std::move(shuffled);
  }

  nlohmann::json pairs = nlohmann::json::array();
  for (std::size_t p = 0; p < cfg.confusable_pairs; ++p) pairs.push_back({2 * p, 2 * p + 1});
  nlohmann::json protos = nlohmann::json::array();
  for (const auto& p : ds.prototypes) protos.push_back(prototype_json(p));
  const std::string cfg_text = cfg.to_json().dump();
  const char* names[3] = {"train", "val", "test"};
  nlohmann::json split_json;
  for (int i = 0; i < 3; ++i) {
    split_json[names[i]] = {{"streamlines", std::string(names[i]) + ".slp"},
                            {"labels", std::string(names[i]) + "_labels.csv"},
                            {"count", splits[i]->size()},
                            {"per_class", class_counts(*splits[i], classes)}};
  }
  ds.manifest = {{"format", "supwma-synthetic-manifest"},
                 {"version", 1},
                 {"config", cfg.to_json()},
                 {"config_hash", fnv1a_hex(cfg_text)},
                 {"classes", classes},
                 {"outlier_label", outlier_label},
                 {"confusable_pairs", pairs},
                 {"splits", split_json},
                 {"prototypes", protos}};
  return ds;
}

std::filesystem::path gen_dataset(const GenConfig& cfg, const std::filesystem::path& out_dir) {
  const SyntheticDataset ds = generate(cfg);
  std::filesystem::create_directories(out_dir);
  const std::pair<const char*, const StreamlineSet*> parts[] = {{"train", &ds.train}, {"val", &ds.val}, {"test", &ds.test}};
  for (const auto& [name, set] : parts) {
    write_slp(*set, out_dir / (std::string(name) + ".slp"));
    write_labels(*set->labels, out_dir / (std::string(name) + "_labels.csv"));
  }
  const auto manifest = out_dir / "manifest.json";
  std::ofstream out(manifest, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + manifest.string());
  out << ds.manifest.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + manifest.string());
  return manifest;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace supwma
