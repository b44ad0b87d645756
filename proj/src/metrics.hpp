#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

namespace supwma {

/// k x k counts, rows = true class, columns = predicted class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const noexcept { return k_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * k_ + predicted]; }
  void add(std::size_t truth, std::size_t predicted) { ++counts_[truth * k_ + predicted]; }

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t c) const;
  std::uint64_t col_sum(std::size_t c) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion(std::span<const std::int32_t> truth, std::span<const std::int32_t> predicted,
                          std::size_t classes);

/// trace / total; throws on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

struct MacroF1 {
  /// std::nullopt for classes absent from both truth and predictions.
  std::vector<std::optional<double>> per_class;
  double mean = 0.0;
  /// Population standard deviation over the included classes.
  double stddev = 0.0;
  std::vector<std::size_t> excluded;
};

MacroF1 macro_f1(const ConfusionMatrix& cm);

/// Fraction of the (deduplicated) expected cluster ids that received at
/// least `threshold` predicted streamlines.
double cluster_identification_rate(std::span<const std::int32_t> predicted,
                                   std::span<const std::int32_t> expected_clusters, std::size_t threshold = 20);

struct MetricsReport {
  std::size_t samples = 0;
  double accuracy = 0.0;
  MacroF1 f1;
  std::optional<double> cir;
  std::size_t cir_threshold = 20;
  ConfusionMatrix confusion{2};

  nlohmann::json to_json(bool include_confusion = false) const;
};

MetricsReport make_report(std::span<const std::int32_t> truth, std::span<const std::int32_t> predicted,
                          std::size_t classes);

}  // namespace supwma
