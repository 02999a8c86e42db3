#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cogtree {

/// Dense 0-based class index. Names only matter for I/O.
using ClassIndex = std::size_t;

/// Ordered set of classes with their training sample counts n_i.
class LabelSpace {
 public:
  LabelSpace(std::vector<std::string> names, std::vector<std::uint64_t> counts);

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(ClassIndex i) const { return names_.at(i); }
  std::uint64_t count(ClassIndex i) const { return counts_.at(i); }
  std::span<const std::string> names() const noexcept { return names_; }
  std::span<const std::uint64_t> counts() const noexcept { return counts_; }

  std::optional<ClassIndex> find(std::string_view name) const;
  /// Throws unknown-label when `name` is not part of the space.
  ClassIndex index_of(std::string_view name) const;

  /// Same names, different counts.
  LabelSpace with_counts(std::vector<std::uint64_t> counts) const;

  friend bool operator==(const LabelSpace& a, const LabelSpace& b) {
    return a.names_ == b.names_ && a.counts_ == b.counts_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, ClassIndex> index_;
};

/// Raw per-class scores for one sample (logits, pre-softmax). Entries are
/// always finite.
class ScoreVector {
 public:
  explicit ScoreVector(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  operator std::span<const double>() const noexcept { return values_; }

 private:
  std::vector<double> values_;
};

/// Row-major batch of score vectors, one row per sample.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  ScoreMatrix() = default;
  ScoreMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
};

struct Prediction {
  ClassIndex ground_truth;
  ClassIndex predicted;
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct PredictionLog {
  std::vector<Prediction> rows;
  friend bool operator==(const PredictionLog&, const PredictionLog&) = default;
};

/// Throws label-out-of-range naming the first offending row.
void validate_log(const PredictionLog& log, const LabelSpace& space);

enum class Split { train, val, test };

const char* to_string(Split split) noexcept;
Split parse_split(std::string_view text);

struct Dataset {
  std::vector<std::vector<double>> features;
  std::vector<ClassIndex> labels;
  Split split = Split::train;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.empty() ? 0 : features.front().size(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Checks that features and labels agree in length, every feature vector has
/// the dimension of the first, every label is inside `space`, and the
/// dataset is non-empty. Errors name the first offending sample.
void validate_dataset(const Dataset& dataset, const LabelSpace& space);

/// Per-class sample histogram of `dataset`.
std::vector<std::uint64_t> class_histogram(const Dataset& dataset, std::size_t num_classes);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values) noexcept;

}  // namespace cogtree
