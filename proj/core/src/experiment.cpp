#include "cogtree/experiment.hpp"

#include <cstdio>
#include <sstream>

#include "cogtree/digest.hpp"
#include "cogtree/error.hpp"

namespace cogtree {

void validate(const ExperimentConfig& c) {
  if (c.ks.empty()) throw Error(ErrorCode::invalid_config, "at least one K is required");
  for (std::size_t k : c.ks) {
    if (k < 1) throw Error(ErrorCode::invalid_config, "K values must be >= 1");
  }
  if (c.model == ModelKind::mlp1 && c.hidden == 0) {
    throw Error(ErrorCode::invalid_config, "mlp1 needs hidden > 0");
  }
  if (!(c.phase2.beta >= 0.0 && c.phase2.beta < 1.0)) {
    throw Error(ErrorCode::invalid_config, "beta must lie in [0, 1)");
  }
  if (!(c.phase2.lambda >= 0.0)) throw Error(ErrorCode::invalid_config, "lambda must be >= 0");
  if (!(c.phase2.gamma >= 0.0)) throw Error(ErrorCode::invalid_config, "gamma must be >= 0");
  const bool any_csv = !c.train_csv.empty() || !c.val_csv.empty() || !c.test_csv.empty();
  const bool all_csv = !c.train_csv.empty() && !c.val_csv.empty() && !c.test_csv.empty();
  if (any_csv && !all_csv) {
    throw Error(ErrorCode::invalid_config, "CSV source needs train, val and test paths");
  }
  TrainConfig t;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.learning_rate = c.learning_rate;
  validate(t);
}

std::string dataset_digest(const LabelSpace& space, std::span<const Dataset* const> splits) {
  Digest d;
  for (std::size_t c = 0; c < space.size(); ++c) {
    d.update(space.name(c));
    d.update(static_cast<std::uint64_t>(space.count(c)));
  }
  for (const Dataset* ds : splits) {
    d.update(to_string(ds->split));
    d.update(static_cast<std::uint64_t>(ds->size()));
    for (std::size_t i = 0; i < ds->size(); ++i) {
      d.update(static_cast<std::uint64_t>(ds->labels[i]));
      d.update(std::span<const double>(ds->features[i]));
    }
  }
  return d.hex();
}

ExperimentData load_data(const ExperimentConfig& config) {
  if (!config.train_csv.empty()) {
    LabeledDataset train = read_dataset_csv(std::filesystem::path(config.train_csv), Split::train);
    Dataset val = read_dataset_csv(std::filesystem::path(config.val_csv), train.space, Split::val);
    Dataset test = read_dataset_csv(std::filesystem::path(config.test_csv), train.space, Split::test);
    validate_dataset(val, train.space);
    validate_dataset(test, train.space);
    if (val.dim() != train.dataset.dim() || test.dim() != train.dataset.dim()) {
      throw Error(ErrorCode::inconsistent_dimension, "splits differ in feature dimension");
    }
    const Dataset* splits[] = {&train.dataset, &val, &test};
    std::string digest = dataset_digest(train.space, splits);
    return {std::move(train.space), std::move(train.dataset), std::move(val), std::move(test),
            std::move(digest), {}};
  }
  SynthSpec spec = config.synth;
  spec.seed = config.seed;
  SyntheticData s = generate_synthetic(spec);
  const Dataset* splits[] = {&s.train, &s.val, &s.test};
  std::string digest = dataset_digest(s.space, splits);
  return {std::move(s.space), std::move(s.train), std::move(s.val), std::move(s.test),
          std::move(digest), std::move(s.planted_concept)};
}

Classifier fresh_model(const ExperimentConfig& config, std::size_t input_dim,
                       std::size_t num_classes, std::string_view purpose) {
  Classifier m = config.model == ModelKind::linear
                     ? Classifier::linear(input_dim, num_classes)
                     : Classifier::mlp(input_dim, config.hidden, num_classes, config.activation);
  Rng rng = Rng::derive(config.seed, purpose);
  m.initialize(rng);
  return m;
}

MetricsReport evaluate_model(const Classifier& model, const Dataset& data, const LabelSpace& space,
                             std::span<const std::size_t> ks) {
  const ScoreMatrix scores = model.forward(data.features);
  return evaluate(scores, data.labels, space, ks);
}

PhaseOutcome train_phase(const ExperimentConfig& config, const ExperimentData& data,
                         const LossSpec& loss, bool resample, std::string_view init_purpose) {
  TrainConfig t;
  t.epochs = config.epochs;
  t.batch_size = config.batch_size;
  t.learning_rate = config.learning_rate;
  t.seed = config.seed;
  t.loss = loss;
  t.resample = resample;
  TrainResult r = train(fresh_model(config, data.train.dim(), data.space.size(), init_purpose),
                        data.train, data.space, t);
  MetricsReport report = evaluate_model(r.model, data.test, data.space, config.ks);
  return {std::move(r.model), std::move(r.history), std::move(report), std::move(r.warnings)};
}

namespace {

const Dataset& split_of(const ExperimentData& data, Split split) {
  switch (split) {
    case Split::train: return data.train;
    case Split::val: return data.val;
    case Split::test: return data.test;
  }
  return data.val;
}

}  // namespace

TreeBuild build_tree_from_model(const Classifier& biased, const ExperimentData& data,
                                Split log_split, TreeVariant variant) {
  const PredictionLog log = predict_log(biased, split_of(data, log_split));
  if (variant != TreeVariant::cluster) return build_cogtree(log, data.space, variant);
  TreeBuild standard = build_cogtree(log, data.space, TreeVariant::standard);
  const auto rows = biased.class_weight_rows();
  CogTree tree = cluster_tree(rows, data.space, standard.concepts.concepts.size());
  return {std::move(tree), std::move(standard.concepts), std::move(standard.warnings)};
}

PipelineResult run_pipeline(const ExperimentConfig& config, const ExperimentData& data) {
  validate(config);
  LossSpec phase1;
  phase1.kind = config.phase1_loss;
  phase1.beta = config.phase2.beta;
  phase1.gamma = config.phase2.gamma;
  if (requires_tree(phase1.kind)) {
    throw Error(ErrorCode::invalid_config, "phase-1 loss must be flat");
  }
  PhaseOutcome biased = train_phase(config, data, phase1, false, "phase1-init");
  PredictionLog log = predict_log(biased.model, split_of(data, config.log_split));
  TreeBuild tree = build_tree_from_model(biased.model, data, config.log_split, config.variant);

  LossSpec phase2 = config.phase2;
  phase2.tree = std::make_shared<const CogTree>(tree.tree);
  PhaseOutcome debiased = train_phase(config, data, phase2, config.resample, "phase2-init");
  return {std::move(biased), std::move(log), std::move(tree), std::move(debiased)};
}

std::vector<AblationEntry> default_ablation_grid() {
  using A = Aggregator;
  using V = TreeVariant;
  return {
      {"ce", LossKind::ce},
      {"focal", LossKind::focal},
      {"reweight", LossKind::cb},
      {"resample", LossKind::ce, V::standard, A::average, true},
      {"cb", LossKind::cb},
      {"tce", LossKind::tce},
      {"tcb", LossKind::tcb},
      {"cogtree", LossKind::cogtree},
      {"fuse-layer", LossKind::cogtree, V::fuse_layer},
      {"fuse-subtree", LossKind::cogtree, V::fuse_subtree},
      {"cluster-tree", LossKind::cogtree, V::cluster},
      {"cogtree-max", LossKind::cogtree, V::standard, A::max},
      {"cogtree-sum", LossKind::cogtree, V::standard, A::sum},
  };
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const ExperimentData& data,
                                      const Classifier& biased,
                                      std::span<const AblationEntry> grid) {
  validate(config);
  std::vector<std::pair<TreeVariant, std::shared_ptr<const CogTree>>> trees;
  auto tree_for = [&](TreeVariant v) {
    for (const auto& [variant, tree] : trees) {
      if (variant == v) return tree;
    }
    auto tree = std::make_shared<const CogTree>(
        build_tree_from_model(biased, data, config.log_split, v).tree);
    trees.emplace_back(v, tree);
    return tree;
  };

  std::vector<AblationRow> rows;
  for (const AblationEntry& e : grid) {
    LossSpec spec = config.phase2;
    spec.kind = e.loss;
    spec.aggregator = e.aggregator;
    spec.tree = requires_tree(e.loss) ? tree_for(e.variant) : nullptr;
    PhaseOutcome out = train_phase(config, data, spec, e.resample, "phase2-init");
    rows.push_back({e, std::move(out.report)});
  }
  return rows;
}

std::vector<ClassIndex> tail_classes(const LabelSpace& space) {
  double mean = 0.0;
  for (auto n : space.counts()) mean += static_cast<double>(n);
  mean /= static_cast<double>(space.size());
  std::vector<ClassIndex> out;
  for (ClassIndex c = 0; c < space.size(); ++c) {
    if (static_cast<double>(space.count(c)) < mean) out.push_back(c);
  }
  return out;
}

std::vector<ClassIndex> head_classes(const LabelSpace& space) {
  const auto tail = tail_classes(space);
  std::vector<ClassIndex> out;
  for (ClassIndex c = 0; c < space.size(); ++c) {
    if (std::find(tail.begin(), tail.end(), c) == tail.end()) out.push_back(c);
  }
  return out;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string comparison_table(const PipelineResult& result, const LabelSpace& space) {
  const auto head = head_classes(space);
  const auto tail = tail_classes(space);
  std::ostringstream os;
  const MetricsReport* reports[] = {&result.biased.report, &result.debiased.report};
  const char* names[] = {"phase1", "phase2"};
  os << "model   ";
  for (std::size_t k : reports[0]->ks) os << "   mR@" << k << "    R@" << k;
  os << "  head@1  tail@1\n";
  for (int i = 0; i < 2; ++i) {
    os << names[i] << "  ";
    for (std::size_t j = 0; j < reports[i]->ks.size(); ++j) {
      os << "  " << num(reports[i]->mean_recall[j]) << "  " << num(reports[i]->overall_recall[j]);
    }
    os << "  " << num(subset_mean_recall(*reports[i], 0, head)) << "  "
       << num(subset_mean_recall(*reports[i], 0, tail)) << '\n';
  }
  return os.str();
}

std::string summary_csv(std::span<const AblationRow> rows, const LabelSpace& space) {
  const auto head = head_classes(space);
  const auto tail = tail_classes(space);
  std::ostringstream os;
  os << "name,loss,variant,aggregator,resample";
  if (!rows.empty()) {
    for (std::size_t k : rows.front().report.ks) os << ",mR@" << k << ",R@" << k;
  }
  os << ",head_R@1,tail_R@1\n";
  for (const AblationRow& r : rows) {
    os << r.entry.name << ',' << to_string(r.entry.loss) << ','
       << (requires_tree(r.entry.loss) ? to_string(r.entry.variant) : "none") << ','
       << to_string(r.entry.aggregator) << ',' << (r.entry.resample ? 1 : 0);
    for (std::size_t j = 0; j < r.report.ks.size(); ++j) {
      os << ',' << num(r.report.mean_recall[j]) << ',' << num(r.report.overall_recall[j]);
    }
    os << ',' << num(subset_mean_recall(r.report, 0, head)) << ','
       << num(subset_mean_recall(r.report, 0, tail)) << '\n';
  }
  return os.str();
}

}  // namespace cogtree
