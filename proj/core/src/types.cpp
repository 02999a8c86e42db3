#include "cogtree/types.hpp"

#include <cmath>

#include "cogtree/error.hpp"

namespace cogtree {

LabelSpace::LabelSpace(std::vector<std::string> names, std::vector<std::uint64_t> counts)
    : names_(std::move(names)), counts_(std::move(counts)) {
  if (names_.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "a label space needs at least 2 classes");
  }
  if (counts_.size() != names_.size()) {
    throw Error(ErrorCode::invalid_argument, "counts and names differ in length");
  }
  index_.reserve(names_.size());
  for (ClassIndex i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw Error(ErrorCode::invalid_argument, "empty class name", i);
    if (!index_.emplace(names_[i], i).second) {
      throw Error(ErrorCode::invalid_argument, "duplicate class name '" + names_[i] + "'", i);
    }
  }
}

std::optional<ClassIndex> LabelSpace::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ClassIndex LabelSpace::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw Error(ErrorCode::unknown_label, "'" + std::string(name) + "'");
}

LabelSpace LabelSpace::with_counts(std::vector<std::uint64_t> counts) const {
  return LabelSpace(names_, std::move(counts));
}

ScoreVector::ScoreVector(std::vector<double> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(ErrorCode::invalid_argument, "non-finite score", i);
    }
  }
}

void validate_log(const PredictionLog& log, const LabelSpace& space) {
  for (std::size_t r = 0; r < log.rows.size(); ++r) {
    if (log.rows[r].ground_truth >= space.size() || log.rows[r].predicted >= space.size()) {
      throw Error(ErrorCode::label_out_of_range, "prediction log row", r);
    }
  }
}

const char* to_string(Split split) noexcept {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw Error(ErrorCode::invalid_argument, "unknown split '" + std::string(text) + "'");
}

void validate_dataset(const Dataset& dataset, const LabelSpace& space) {
  if (dataset.labels.empty() && dataset.features.empty()) {
    throw Error(ErrorCode::empty_dataset, "no samples");
  }
  if (dataset.features.size() != dataset.labels.size()) {
    throw Error(ErrorCode::dimension_mismatch, "feature and label counts differ",
                std::min(dataset.features.size(), dataset.labels.size()));
  }
  const std::size_t dim = dataset.features.front().size();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.features[i].size() != dim) {
      throw Error(ErrorCode::dimension_mismatch,
                  "expected dimension " + std::to_string(dim) + ", got " +
                      std::to_string(dataset.features[i].size()),
                  i);
    }
    if (dataset.labels[i] >= space.size()) {
      throw Error(ErrorCode::label_out_of_range,
                  "label " + std::to_string(dataset.labels[i]) + " in a " +
                      std::to_string(space.size()) + "-class space",
                  i);
    }
  }
}

std::vector<std::uint64_t> class_histogram(const Dataset& dataset, std::size_t num_classes) {
  std::vector<std::uint64_t> hist(num_classes, 0);
  for (ClassIndex label : dataset.labels) {
    if (label < num_classes) ++hist[label];
  }
  return hist;
}

std::size_t argmax(std::span<const double> values) noexcept {
  std::size_t best = 0;
  for (std::size_t j = 1; j < values.size(); ++j) {
    if (values[j] > values[best]) best = j;
  }
  return best;
}

}  // namespace cogtree
