#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "geometry.hpp"
#include "rng.hpp"

namespace supwma {

enum class CurveFamily { kArc, kUFiber, kHelix };

std::string to_string(CurveFamily f);

struct ClusterPrototype {
  std::int32_t id = 0;
  CurveFamily family = CurveFamily::kArc;
  double radius = 10.0;   // mm
  double span = 3.14;     // radians swept by the curved part
  double torsion = 0.0;   // mm of rise per radian (helix only)
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
  Point3 translation;
  double point_noise = 1.0;      // mm, per coordinate
  double endpoint_jitter = 1.0;  // mm along the curve, per end

  /// Noise-free curve point; u in [0,1] spans the nominal curve and values
  /// outside extend it smoothly.
  Point3 at(double u) const;
  /// Nominal length of the curve over u in [0,1].
  double length() const;
  Point3 centroid() const;
};

struct GenConfig {
  std::uint64_t seed = 1;
  std::size_t clusters = 20;
  std::size_t streamlines_per_cluster = 800;
  /// Fraction of the whole corpus carrying the outlier label.
  double outlier_fraction = 0.2;
  /// mm; outliers are displaced by 1-2x this from a random prototype.
  double outlier_scale = 8.0;
  std::size_t confusable_pairs = 2;
  double point_noise = 1.0;
  double endpoint_jitter = 1.0;
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  double test_fraction = 0.2;

  void validate() const;
  std::size_t outlier_count() const;
  nlohmann::json to_json() const;
  static GenConfig from_json(const nlohmann::json& j, GenConfig base);
  static GenConfig from_json(const nlohmann::json& j);
};

/// Cluster prototypes 0..C-1. Pairs (0,1), (2,3), ... up to confusable_pairs
/// share shape and rotation bitwise and differ only by a translation.
std::vector<ClusterPrototype> gen_prototypes(const GenConfig& cfg);

struct SampledStreamline {
  Streamline streamline;
  bool reversed = false;
};

/// 30-60 raw points along the prototype with Gaussian point noise and
/// endpoint jitter; half of the samples come out in reversed order.
SampledStreamline sample_streamline(const ClusterPrototype& proto, SeededRng& rng);

/// Random pose/shape perturbation of `proto` used for the outlier class.
ClusterPrototype perturb(const ClusterPrototype& proto, double scale, SeededRng& rng);

struct SyntheticDataset {
  StreamlineSet train;
  StreamlineSet val;
  StreamlineSet test;
  std::vector<ClusterPrototype> prototypes;
  nlohmann::json manifest;
};

SyntheticDataset generate(const GenConfig& cfg);

/// Writes {train,val,test}.slp, {train,val,test}_labels.csv and
/// manifest.json into `out_dir`; returns the manifest path.
std::filesystem::path gen_dataset(const GenConfig& cfg, const std::filesystem::path& out_dir);

/// FNV-1a 64-bit, as lowercase hex.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace supwma
