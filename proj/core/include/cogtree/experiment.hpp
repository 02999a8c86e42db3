#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cogtree/builder.hpp"
#include "cogtree/data.hpp"
#include "cogtree/eval.hpp"
#include "cogtree/losses.hpp"
#include "cogtree/model.hpp"

namespace cogtree {

/// Fully resolved experiment settings, sized for the synthetic benchmark.
struct ExperimentConfig {
  SynthSpec synth;
  std::string train_csv, val_csv, test_csv;  // all three set => CSV source

  ModelKind model = ModelKind::linear;
  std::size_t hidden = 32;
  Activation activation = Activation::tanh;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;

  LossKind phase1_loss = LossKind::ce;
  Split log_split = Split::val;
  TreeVariant variant = TreeVariant::standard;
  LossSpec phase2;  // tree filled in by the pipeline
  bool resample = false;

  std::vector<std::size_t> ks{1, 3, 5};
  std::uint64_t seed = 0;
};

void validate(const ExperimentConfig& config);

struct ExperimentData {
  LabelSpace space;
  Dataset train, val, test;
  std::string digest;
  std::vector<ClassIndex> planted_concept;  // synthetic source only
};

ExperimentData load_data(const ExperimentConfig& config);
std::string dataset_digest(const LabelSpace& space, std::span<const Dataset* const> splits);

/// Freshly initialised classifier; `purpose` selects the RNG stream.
Classifier fresh_model(const ExperimentConfig& config, std::size_t input_dim,
                       std::size_t num_classes, std::string_view purpose);

/// Plain argmax inference over leaf scores; the tree is never consulted.
MetricsReport evaluate_model(const Classifier& model, const Dataset& data, const LabelSpace& space,
                             std::span<const std::size_t> ks);

struct PhaseOutcome {
  Classifier model;
  TrainHistory history;
  MetricsReport report;
  std::vector<std::string> warnings;
};

PhaseOutcome train_phase(const ExperimentConfig& config, const ExperimentData& data,
                         const LossSpec& loss, bool resample, std::string_view init_purpose);

/// Tree of the requested variant from a biased model's predictions.
/// Cluster trees use the model's output-layer rows and as many clusters as
/// the standard tree has concepts.
TreeBuild build_tree_from_model(const Classifier& biased, const ExperimentData& data,
                                Split log_split, TreeVariant variant);

struct PipelineResult {
  PhaseOutcome biased;
  PredictionLog log;
  TreeBuild tree;
  PhaseOutcome debiased;
};

/// Phase 1: flat training with `phase1_loss`. Phase 2: fresh model trained
/// with `phase2` over the tree built from phase-1 predictions on
/// `log_split`. Both evaluated on the test split with equal budgets.
PipelineResult run_pipeline(const ExperimentConfig& config, const ExperimentData& data);

struct AblationEntry {
  std::string name;
  LossKind loss;
  TreeVariant variant = TreeVariant::standard;
  Aggregator aggregator = Aggregator::average;
  bool resample = false;
};

/// Loss terms, baselines, tree structures and aggregators.
std::vector<AblationEntry> default_ablation_grid();

struct AblationRow {
  AblationEntry entry;
  MetricsReport report;
};

std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const ExperimentData& data,
                                      const Classifier& biased,
                                      std::span<const AblationEntry> grid);

/// Classes whose training count is below the mean training count.
std::vector<ClassIndex> tail_classes(const LabelSpace& space);
std::vector<ClassIndex> head_classes(const LabelSpace& space);

std::string comparison_table(const PipelineResult& result, const LabelSpace& space);
std::string summary_csv(std::span<const AblationRow> rows, const LabelSpace& space);

}  // namespace cogtree
