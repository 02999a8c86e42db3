// cogtree: experiment runner for concept-tree debiasing.
//
//   cogtree gen-data   --out DIR [synthetic options]
//   cogtree build-tree --train train.csv (--log log.csv | --checkpoint ck.json --predict-on val.csv)
//   cogtree train      --train train.csv --loss cogtree --tree tree.json --out DIR
//   cogtree eval       --train train.csv --checkpoint ck.json --data test.csv --out DIR
//   cogtree pipeline   [--config run.ini] [--ablate] --out DIR
//
// Every subcommand accepts --config FILE: INI with one section per
// subcommand, keys named like the long flags (the config.ini written next to
// each run is in this form). Command-line flags override the file. Exit codes:
// 0 success, 2 config error, 3 data error, 4 runtime error.

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "cogtree/builder.hpp"
#include "cogtree/data.hpp"
#include "cogtree/digest.hpp"
#include "cogtree/error.hpp"
#include "cogtree/eval.hpp"
#include "cogtree/experiment.hpp"
#include "cogtree/model.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace cogtree;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kDataError = 3, kRuntimeError = 4 };

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::invalid_spec:
    case ErrorCode::invalid_config:
    case ErrorCode::k_out_of_range:
      return kConfigError;
    case ErrorCode::dimension_mismatch:
    case ErrorCode::label_out_of_range:
    case ErrorCode::empty_dataset:
    case ErrorCode::empty_log:
    case ErrorCode::malformed_row:
    case ErrorCode::inconsistent_dimension:
    case ErrorCode::unknown_header:
    case ErrorCode::unknown_label:
    case ErrorCode::unknown_class:
    case ErrorCode::zero_count:
    case ErrorCode::io_error:
    case ErrorCode::parse_error:
      return kDataError;
    case ErrorCode::no_valid_host:
      return kRuntimeError;
  }
  return kRuntimeError;
}

// String-valued enum options are checked here so a typo is a config error.
template <typename T>
CLI::Option* add_choice(CLI::App* app, const std::string& name, std::string& target,
                        std::vector<std::string> choices, const std::string& help) {
  return app->add_option(name, target, help)
      ->check(CLI::IsMember(std::move(choices)))
      ->capture_default_str();
}

struct CommonOptions {
  std::uint64_t seed = 42;
  std::string out = "out";
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--seed", o.seed, "Master random seed")->capture_default_str();
  app->add_option("--out", o.out, "Output directory")->capture_default_str();
}

struct SynthOptions {
  SynthSpec spec;
};

void add_synth(CLI::App* app, SynthSpec& s) {
  app->add_option("--num-concepts", s.num_concepts, "Synthetic: number of concepts")->capture_default_str();
  app->add_option("--fine-per-concept", s.fine_per_concept, "Synthetic: fine classes per concept")->capture_default_str();
  app->add_option("--head-count", s.head_count, "Synthetic: samples per head class")->capture_default_str();
  app->add_option("--tail-count", s.tail_count, "Synthetic: samples per fine class")->capture_default_str();
  app->add_option("--dim", s.dim, "Synthetic: feature dimension")->capture_default_str();
  app->add_option("--sigma-sep", s.sigma_sep, "Synthetic: concept separation scale")->capture_default_str();
  app->add_option("--sigma-off", s.sigma_off, "Synthetic: intra-concept offset scale")->capture_default_str();
  app->add_option("--sigma-noise", s.sigma_noise, "Synthetic: per-coordinate noise")->capture_default_str();
}

struct TrainOptions {
  std::string model = "linear";
  std::size_t hidden = 32;
  std::string activation = "tanh";
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr = 0.1;
  std::string loss = "cogtree";
  double lambda = 1.0;
  double beta = 0.999;
  double gamma = 2.0;
  std::string aggregator = "average";
  bool normalize_weights = true;
  bool resample = false;
};

void add_train(CLI::App* app, TrainOptions& t, const std::string& default_loss) {
  t.loss = default_loss;
  add_choice<std::string>(app, "--model", t.model, {"linear", "mlp1"}, "Classifier kind");
  app->add_option("--hidden", t.hidden, "Hidden width for mlp1")->capture_default_str();
  add_choice<std::string>(app, "--activation", t.activation, {"tanh", "relu"}, "mlp1 nonlinearity");
  app->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
  app->add_option("--batch-size", t.batch_size, "Mini-batch size")->capture_default_str();
  app->add_option("--lr", t.lr, "SGD learning rate")->capture_default_str();
  add_choice<std::string>(app, "--loss", t.loss,
                          {"ce", "cb", "reweight", "focal", "tce", "tcb", "cogtree"}, "Loss");
  app->add_option("--lambda", t.lambda, "Weight of the tree term")->capture_default_str();
  app->add_option("--beta", t.beta, "Class-balance beta in [0,1)")->capture_default_str();
  app->add_option("--gamma", t.gamma, "Focal exponent")->capture_default_str();
  add_choice<std::string>(app, "--aggregator", t.aggregator, {"average", "max", "sum"},
                          "Internal-node aggregation");
  app->add_option("--normalize-weights", t.normalize_weights,
                  "Rescale class-balanced weights to sum to the class count (true/false)")
      ->capture_default_str();
  app->add_flag("--resample", t.resample, "Class-balanced resampling")->capture_default_str();
}

LossSpec loss_spec(const TrainOptions& t) {
  LossSpec s;
  s.kind = parse_loss_kind(t.loss);
  s.lambda = t.lambda;
  s.beta = t.beta;
  s.gamma = t.gamma;
  s.aggregator = parse_aggregator(t.aggregator);
  s.normalize_weights = t.normalize_weights;
  return s;
}

ExperimentConfig experiment_config(const CommonOptions& c, const SynthSpec& synth,
                                   const TrainOptions& t) {
  ExperimentConfig e;
  e.synth = synth;
  e.seed = c.seed;
  e.model = parse_model_kind(t.model);
  e.hidden = t.hidden;
  e.activation = parse_activation(t.activation);
  e.epochs = t.epochs;
  e.batch_size = t.batch_size;
  e.learning_rate = t.lr;
  e.phase2 = loss_spec(t);
  e.resample = t.resample;
  return e;
}

// Digest of inputs plus resolved settings; the output location is excluded so
// the same run written elsewhere digests identically.
std::string run_digest(const std::string& input_digest, const CLI::App& app) {
  std::istringstream config(app.config_to_str(true, false));
  Digest d;
  d.update(input_digest);
  for (std::string line; std::getline(config, line);) {
    if (!line.starts_with("out=")) d.update(line + "\n");
  }
  return d.hex();
}

// Provenance written into every output directory.
void write_provenance(const fs::path& out, const CLI::App& app, std::uint64_t seed,
                      const std::string& input_digest, const std::string& command) {
  const std::string config = "[" + app.get_name() + "]\n" + app.config_to_str(true, false);
  write_file_atomic(out / "config.ini", config);
  nlohmann::ordered_json m;
  m["version"] = 1;
  m["command"] = command;
  m["seed"] = seed;
  m["input_digest"] = input_digest;
  m["config_digest"] = run_digest("", app);
  write_file_atomic(out / "manifest.json", m.dump(2) + "\n");
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create '" + p.string() + "': " + ec.message());
}

std::string history_csv(const TrainHistory& h) {
  std::ostringstream os;
  os << "epoch,loss,train_accuracy\n";
  char buf[64];
  for (std::size_t i = 0; i < h.epoch_loss.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i + 1, h.epoch_loss[i], h.epoch_accuracy[i]);
    os << buf;
  }
  return os.str();
}

void print_warnings(std::span<const std::string> warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

void write_tree(const fs::path& out, const CogTree& tree) {
  write_file_atomic(out / "tree.json", tree_to_json(tree));
  write_file_atomic(out / "tree.dot", tree_to_dot(tree));
}

void write_metrics(const fs::path& out, const std::string& prefix, const MetricsReport& r) {
  write_file_atomic(out / (prefix + "metrics.json"), report_to_json(r));
  write_file_atomic(out / (prefix + "metrics.txt"), report_to_text(r));
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size()) {
      throw Error(ErrorCode::invalid_config, "bad K value '" + item + "'");
    }
    ks.push_back(v);
  }
  if (ks.empty()) throw Error(ErrorCode::invalid_config, "no K values");
  return ks;
}


}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept-tree debiasing for long-tailed classification"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "INI config file; command-line flags take precedence");
  app.option_defaults()->always_capture_default();

  // gen-data
  CommonOptions gen_common;
  SynthSpec gen_synth;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic long-tailed dataset as CSV");
  add_common(gen, gen_common);
  add_synth(gen, gen_synth);

  // build-tree
  CommonOptions bt_common;
  std::string bt_train, bt_log, bt_checkpoint, bt_predict_on, bt_variant = "standard";
  auto* bt = app.add_subcommand("build-tree", "Build a concept tree from biased predictions");
  add_common(bt, bt_common);
  bt->add_option("--train", bt_train, "Training CSV (defines classes and counts)")->required();
  bt->add_option("--log", bt_log, "Prediction log CSV (ground_truth,predicted)");
  bt->add_option("--checkpoint", bt_checkpoint, "Biased model checkpoint");
  bt->add_option("--predict-on", bt_predict_on, "Dataset CSV the biased model predicts on");
  add_choice<std::string>(bt, "--variant", bt_variant,
                          {"standard", "fuse_layer", "fuse-layer", "fuse_subtree", "fuse-subtree",
                           "flat", "cluster", "cluster-tree"},
                          "Tree variant");

  // train
  CommonOptions tr_common;
  TrainOptions tr_opts;
  std::string tr_train, tr_tree;
  auto* tr = app.add_subcommand("train", "Train a classifier under any loss");
  add_common(tr, tr_common);
  add_train(tr, tr_opts, "ce");
  tr->add_option("--train", tr_train, "Training CSV")->required();
  tr->add_option("--tree", tr_tree, "Tree JSON (required by tce/tcb/cogtree)");

  // eval
  CommonOptions ev_common;
  std::string ev_train, ev_checkpoint, ev_data;
  std::string ev_ks = "1,3,5";
  auto* ev = app.add_subcommand("eval", "Per-class and mean recall@K of a checkpoint");
  add_common(ev, ev_common);
  ev->add_option("--train", ev_train, "Training CSV (defines classes)")->required();
  ev->add_option("--checkpoint", ev_checkpoint, "Model checkpoint")->required();
  ev->add_option("--data", ev_data, "Evaluation CSV")->required();
  ev->add_option("--k", ev_ks, "Comma-separated K values")->capture_default_str();

  // pipeline
  CommonOptions pl_common;
  SynthSpec pl_synth;
  TrainOptions pl_opts;
  std::string pl_train, pl_val, pl_test, pl_variant = "standard", pl_log_split = "val",
                                          pl_phase1 = "ce";
  std::string pl_ks = "1,3,5";
  bool pl_ablate = false;
  auto* pl = app.add_subcommand("pipeline", "Two-phase run: biased model, tree, debiased model");
  add_common(pl, pl_common);
  add_synth(pl, pl_synth);
  add_train(pl, pl_opts, "cogtree");
  pl->add_option("--train", pl_train, "Training CSV (with --val and --test replaces synthetic data)");
  pl->add_option("--val", pl_val, "Validation CSV");
  pl->add_option("--test", pl_test, "Test CSV");
  add_choice<std::string>(pl, "--variant", pl_variant,
                          {"standard", "fuse_layer", "fuse-layer", "fuse_subtree", "fuse-subtree",
                           "flat", "cluster", "cluster-tree"},
                          "Tree variant");
  add_choice<std::string>(pl, "--log-split", pl_log_split, {"train", "val"},
                          "Split the biased model predicts on");
  add_choice<std::string>(pl, "--phase1-loss", pl_phase1, {"ce", "cb", "focal"},
                          "Loss of the biased phase-1 model");
  pl->add_option("--k", pl_ks, "Comma-separated K values")->capture_default_str();
  pl->add_flag("--ablate", pl_ablate, "Run the ablation grid into summary.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) {
      SynthSpec spec = gen_synth;
      spec.seed = gen_common.seed;
      const SyntheticData data = generate_synthetic(spec);
      const fs::path out = gen_common.out;
      ensure_dir(out);
      write_dataset_csv(data.train, data.space, out / "train.csv");
      write_dataset_csv(data.val, data.space, out / "val.csv");
      write_dataset_csv(data.test, data.space, out / "test.csv");
      const Dataset* splits[] = {&data.train, &data.val, &data.test};
      write_provenance(out, *gen, gen_common.seed, dataset_digest(data.space, splits), "gen-data");
      std::cout << "wrote " << data.train.size() << "/" << data.val.size() << "/"
                << data.test.size() << " samples over " << data.space.size() << " classes to "
                << out << '\n';
    } else if (*bt) {
      const LabeledDataset train_set = read_dataset_csv(fs::path(bt_train), Split::train);
      const TreeVariant variant = parse_tree_variant(bt_variant);
      PredictionLog log;
      std::optional<Classifier> model;
      if (!bt_log.empty()) {
        log = read_prediction_log_csv(fs::path(bt_log), train_set.space);
      } else if (!bt_checkpoint.empty() && !bt_predict_on.empty()) {
        model = checkpoint_from_json(read_file(bt_checkpoint)).model;
        const Dataset on = read_dataset_csv(fs::path(bt_predict_on), train_set.space, Split::val);
        log = predict_log(*model, on);
      } else {
        throw Error(ErrorCode::invalid_config,
                    "build-tree needs --log, or --checkpoint with --predict-on");
      }
      TreeBuild build = [&] {
        if (variant != TreeVariant::cluster) return build_cogtree(log, train_set.space, variant);
        if (!model) throw Error(ErrorCode::invalid_config, "cluster trees need --checkpoint");
        TreeBuild standard = build_cogtree(log, train_set.space, TreeVariant::standard);
        CogTree tree = cluster_tree(model->class_weight_rows(), train_set.space,
                                    standard.concepts.concepts.size());
        return TreeBuild{std::move(tree), std::move(standard.concepts), std::move(standard.warnings)};
      }();
      print_warnings(build.warnings);
      const fs::path out = bt_common.out;
      ensure_dir(out);
      write_tree(out, build.tree);
      write_provenance(out, *bt, bt_common.seed, log_digest(log), "build-tree");
      std::cout << "tree with " << build.tree.size() << " nodes, "
                << build.tree.node(0).children.size() << " top-level children -> " << out << '\n';
    } else if (*tr) {
      const LabeledDataset train_set = read_dataset_csv(fs::path(tr_train), Split::train);
      ExperimentConfig cfg = experiment_config(tr_common, SynthSpec{}, tr_opts);
      validate(cfg);
      LossSpec spec = cfg.phase2;
      if (!tr_tree.empty()) spec.tree = std::make_shared<const CogTree>(tree_from_json(read_file(tr_tree)));
      if (requires_tree(spec.kind) && !spec.tree) {
        throw Error(ErrorCode::invalid_config, "loss '" + tr_opts.loss + "' needs --tree");
      }
      TrainConfig t;
      t.epochs = cfg.epochs;
      t.batch_size = cfg.batch_size;
      t.learning_rate = cfg.learning_rate;
      t.seed = cfg.seed;
      t.loss = spec;
      t.resample = cfg.resample;
      TrainResult r = train(fresh_model(cfg, train_set.dataset.dim(), train_set.space.size(), "phase2-init"),
                            train_set.dataset, train_set.space, t);
      print_warnings(r.warnings);
      const fs::path out = tr_common.out;
      ensure_dir(out);
      const Dataset* splits[] = {&train_set.dataset};
      const std::string input = dataset_digest(train_set.space, splits) +
                                (spec.tree ? spec.tree->built_from() : std::string{});
      write_file_atomic(out / "checkpoint.json",
                        checkpoint_to_json({r.model, cfg.seed, run_digest(input, *tr)}));
      write_file_atomic(out / "history.csv", history_csv(r.history));
      write_provenance(out, *tr, cfg.seed, input, "train");
      std::cout << "final epoch loss " << r.history.epoch_loss.back() << " -> " << out << '\n';
    } else if (*ev) {
      const LabeledDataset train_set = read_dataset_csv(fs::path(ev_train), Split::train);
      const Checkpoint ck = checkpoint_from_json(read_file(ev_checkpoint));
      const Dataset data = read_dataset_csv(fs::path(ev_data), train_set.space, Split::test);
      const MetricsReport report = evaluate_model(ck.model, data, train_set.space, parse_ks(ev_ks));
      const fs::path out = ev_common.out;
      ensure_dir(out);
      write_metrics(out, "", report);
      const Dataset* splits[] = {&data};
      write_provenance(out, *ev, ev_common.seed,
                       dataset_digest(train_set.space, splits) + ck.config_digest, "eval");
      std::cout << report_to_text(report);
    } else if (*pl) {
      ExperimentConfig cfg = experiment_config(pl_common, pl_synth, pl_opts);
      cfg.train_csv = pl_train;
      cfg.val_csv = pl_val;
      cfg.test_csv = pl_test;
      cfg.variant = parse_tree_variant(pl_variant);
      cfg.log_split = parse_split(pl_log_split);
      cfg.phase1_loss = parse_loss_kind(pl_phase1);
      cfg.ks = parse_ks(pl_ks);
      validate(cfg);
      const ExperimentData data = load_data(cfg);
      const PipelineResult result = run_pipeline(cfg, data);
      print_warnings(result.tree.warnings);
      print_warnings(result.debiased.warnings);

      const fs::path out = pl_common.out;
      ensure_dir(out);
      const std::string digest = run_digest(data.digest, *pl);
      write_tree(out, result.tree.tree);
      write_prediction_log_csv(result.log, data.space, out / "prediction_log.csv");
      write_file_atomic(out / "phase1_checkpoint.json",
                        checkpoint_to_json({result.biased.model, cfg.seed, digest}));
      write_file_atomic(out / "checkpoint.json",
                        checkpoint_to_json({result.debiased.model, cfg.seed, digest}));
      write_metrics(out, "phase1_", result.biased.report);
      write_metrics(out, "", result.debiased.report);
      const std::string table = comparison_table(result, data.space);
      write_file_atomic(out / "comparison.txt", table);

      std::vector<AblationRow> rows;
      if (pl_ablate) {
        const auto grid = default_ablation_grid();
        rows = run_ablation(cfg, data, result.biased.model, grid);
      } else {
        AblationEntry biased{"phase1", cfg.phase1_loss};
        AblationEntry debiased{"phase2", cfg.phase2.kind, cfg.variant, cfg.phase2.aggregator,
                               cfg.resample};
        rows.push_back({biased, result.biased.report});
        rows.push_back({debiased, result.debiased.report});
      }
      const std::string summary = summary_csv(rows, data.space);
      write_file_atomic(out / "summary.csv", summary);
      write_provenance(out, *pl, cfg.seed, data.digest, "pipeline");
      std::cout << table;
      if (pl_ablate) std::cout << '\n' << summary;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
