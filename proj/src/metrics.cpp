#include "metrics.hpp"

#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>

#include "error.hpp"
#include "log.hpp"

namespace supwma {

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t c = 0; c < k_; ++c) t += at(c, c);
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < k_; ++j) s += at(c, j);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < k_; ++i) s += at(i, c);
  return s;
}

ConfusionMatrix confusion(std::span<const std::int32_t> truth, std::span<const std::int32_t> predicted,
                          std::size_t classes) {
  require(truth.size() == predicted.size(), ErrorCode::kInvalidArgument,
          "confusion: truth and prediction lengths differ");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] >= 0 && static_cast<std::size_t>(truth[i]) < classes && predicted[i] >= 0 &&
                static_cast<std::size_t>(predicted[i]) < classes,
            ErrorCode::kInvalidArgument, "confusion: label out of range at " + std::to_string(i));
    cm.add(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]));
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  require(total > 0, ErrorCode::kInvalidArgument, "accuracy of an empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

MacroF1 macro_f1(const ConfusionMatrix& cm) {
  require(cm.classes() >= 2, ErrorCode::kInvalidArgument, "macro F1 needs at least 2 classes");
  MacroF1 out;
  out.per_class.resize(cm.classes());
  std::vector<double> included;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto tp = static_cast<double>(cm.at(c, c));
    const std::uint64_t rows = cm.row_sum(c);
    const std::uint64_t cols = cm.col_sum(c);
    if (rows == 0 && cols == 0) {
      out.excluded.push_back(c);
      continue;
    }
    double f1 = 0.0;
    if (rows > 0 && cols > 0) {
      const double precision = tp / static_cast<double>(cols);
      const double recall = tp / static_cast<double>(rows);
      if (precision + recall > 0.0) f1 = 2.0 * precision * recall / (precision + recall);
    }
    out.per_class[c] = f1;
    included.push_back(f1);
  }
  if (!out.excluded.empty()) {
    log().warn("macro F1: {} class(es) absent from truth and predictions, excluded from mean/std",
               out.excluded.size());
  }
  require(!included.empty(), ErrorCode::kInvalidArgument, "macro F1 of an empty confusion matrix");
  const double n = static_cast<double>(included.size());
  out.mean = std::accumulate(included.begin(), included.end(), 0.0) / n;
  double var = 0.0;
  for (double f : included) var += (f - out.mean) * (f - out.mean);
  out.stddev = std::sqrt(var / n);
  return out;
}

double cluster_identification_rate(std::span<const std::int32_t> predicted,
                                   std::span<const std::int32_t> expected_clusters, std::size_t threshold) {
  require(threshold >= 1, ErrorCode::kInvalidArgument, "CIR threshold must be >= 1");
  const std::set<std::int32_t> expected(expected_clusters.begin(), expected_clusters.end());
  require(!expected.empty(), ErrorCode::kInvalidArgument, "CIR needs a non-empty expected cluster set");
  std::unordered_map<std::int32_t, std::size_t> counts;
  for (std::int32_t p : predicted) ++counts[p];
  std::size_t found = 0;
  for (std::int32_t c : expected) {
    const auto it = counts.find(c);
    if (it != counts.end() && it->second >= threshold) ++found;
  }
  return static_cast<double>(found) / static_cast<double>(expected.size());
}

MetricsReport make_report(std::span<const std::int32_t> truth, std::span<const std::int32_t> predicted,
                          std::size_t classes) {
  require(!truth.empty(), ErrorCode::kInvalidArgument, "cannot evaluate an empty set");
  MetricsReport r;
  r.samples = truth.size();
  r.confusion = confusion(truth, predicted, classes);
  r.accuracy = accuracy(r.confusion);
  r.f1 = macro_f1(r.confusion);
  return r;
}

nlohmann::json MetricsReport::to_json(bool include_confusion) const {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& f : f1.per_class) per_class.push_back(f ? nlohmann::json(*f) : nlohmann::json(nullptr));
  nlohmann::json j = {{"samples", samples},
                      {"classes", confusion.classes()},
                      {"accuracy", accuracy},
                      {"macro_f1_mean", f1.mean},
                      {"macro_f1_std", f1.stddev},
                      {"per_class_f1", per_class},
                      {"excluded_classes", f1.excluded}};
  if (cir) {
    j["cir"] = *cir;
    j["cir_threshold"] = cir_threshold;
  }
  if (include_confusion) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < confusion.classes(); ++i) {
      std::vector<std::uint64_t> row(confusion.classes());
      for (std::size_t c = 0; c < confusion.classes(); ++c) row[c] = confusion.at(i, c);
      rows.push_back(row);
    }
    j["confusion"] = rows;
  }
  return j;
}

}  // namespace supwma
