#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "cogtree/types.hpp"

namespace cogtree {

/// Long-tailed, concept-structured Gaussian mixture. Each concept has one
/// frequent head class and `fine_per_concept` rare fine-grained classes whose
/// centroids sit close to the head's.
struct SynthSpec {
  std::size_t num_concepts = 6;
  std::size_t fine_per_concept = 4;
  std::size_t head_count = 1000;
  std::size_t tail_count = 20;
  std::size_t dim = 16;
  double sigma_sep = 4.0;
  double sigma_off = 1.0;
  double sigma_noise = 1.0;
  std::uint64_t seed = 0;
};

/// Throws invalid-spec when the spec cannot be generated.
void validate(const SynthSpec& spec);

struct SyntheticData {
  LabelSpace space;  // counts = training-split sizes
  Dataset train;
  Dataset val;
  Dataset test;
  std::vector<ClassIndex> planted_concept;  // head class of each class's concept
};

/// Classes are ordered concept by concept: head "c<k>", then "c<k>_f<j>".
/// Every class is split 70/15/15 with at least one validation and one test
/// sample; samples in each split are grouped by class.
SyntheticData generate_synthetic(const SynthSpec& spec);

struct LabeledDataset {
  Dataset dataset;
  LabelSpace space;  // classes in first-appearance order, counts = histogram
};

/// CSV with header `label,f0,...,f{d-1}`; features written with 17
/// significant digits so float64 values round-trip exactly.
LabeledDataset read_dataset_csv(const std::filesystem::path& path, Split split = Split::train);
Dataset read_dataset_csv(const std::filesystem::path& path, const LabelSpace& space,
                         Split split);
LabeledDataset read_dataset_csv(std::istream& in, Split split = Split::train);
Dataset read_dataset_csv(std::istream& in, const LabelSpace& space, Split split);

void write_dataset_csv(const Dataset& dataset, const LabelSpace& space,
                       const std::filesystem::path& path);
void write_dataset_csv(const Dataset& dataset, const LabelSpace& space, std::ostream& out);

/// CSV with header `ground_truth,predicted`, class names resolved in `space`.
PredictionLog read_prediction_log_csv(const std::filesystem::path& path, const LabelSpace& space);
PredictionLog read_prediction_log_csv(std::istream& in, const LabelSpace& space);
void write_prediction_log_csv(const PredictionLog& log, const LabelSpace& space,
                              const std::filesystem::path& path);
void write_prediction_log_csv(const PredictionLog& log, const LabelSpace& space, std::ostream& out);

/// Writes to a sibling temporary file then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace cogtree
