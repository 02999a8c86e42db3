#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cogtree/types.hpp"

namespace cogtree {

/// True label is in the top-k of `scores` (ties broken toward the lower
/// class index, as everywhere else).
bool in_top_k(std::span<const double> scores, ClassIndex label, std::size_t k);

/// Fraction of samples whose label is in the top-k scores.
double recall_at_k(const ScoreMatrix& scores, std::span<const ClassIndex> labels, std::size_t k);

struct MeanRecall {
  double mean = 0.0;
  std::vector<std::optional<double>> per_class;  // nullopt: no evaluation samples
};

/// Unweighted mean of per-class recall over classes with >= 1 sample.
MeanRecall mean_recall_at_k(const ScoreMatrix& scores, std::span<const ClassIndex> labels,
                            std::size_t k);

struct ConfusionMatrix {
  std::size_t num_classes = 0;
  std::vector<std::uint64_t> counts;  // row-major [truth][predicted]

  std::uint64_t at(ClassIndex truth, ClassIndex predicted) const {
    return counts[truth * num_classes + predicted];
  }
  std::uint64_t row_sum(ClassIndex truth) const;
  std::uint64_t trace() const;
  std::uint64_t total() const;
};

ConfusionMatrix confusion_matrix(const ScoreMatrix& scores, std::span<const ClassIndex> labels);

struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<std::uint64_t> class_counts;  // evaluation samples per class
  std::vector<std::size_t> ks;
  std::vector<std::vector<std::optional<double>>> per_class;  // [k][class]
  std::vector<double> mean_recall;                            // [k]
  std::vector<double> overall_recall;                         // [k]
  std::vector<ClassIndex> excluded;  // classes without evaluation samples
  ConfusionMatrix confusion;
};

MetricsReport evaluate(const ScoreMatrix& scores, std::span<const ClassIndex> labels,
                       const LabelSpace& space, std::span<const std::size_t> ks);

std::string report_to_json(const MetricsReport& report);
/// Aligned table: class, n, then R@k per configured k; summary rows last.
std::string report_to_text(const MetricsReport& report);

/// Mean of per-class recall@k over the given class subset (classes with no
/// evaluation samples skipped).
double subset_mean_recall(const MetricsReport& report, std::size_t k_index,
                          std::span<const ClassIndex> classes);

}  // namespace cogtree
