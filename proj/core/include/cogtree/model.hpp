#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogtree/losses.hpp"
#include "cogtree/random.hpp"
#include "cogtree/types.hpp"

namespace cogtree {

enum class ModelKind { linear, mlp1 };
enum class Activation { tanh, relu };

const char* to_string(ModelKind kind) noexcept;
const char* to_string(Activation act) noexcept;
ModelKind parse_model_kind(std::string_view text);
Activation parse_activation(std::string_view text);

/// Linear or one-hidden-layer classifier emitting raw class scores.
///
/// Parameters live in one flat vector laid out as
///   linear: W (out x in, row-major), b (out)
///   mlp1:   W1 (hidden x in), b1 (hidden), W2 (out x hidden), b2 (out)
class Classifier {
 public:
  static Classifier linear(std::size_t input_dim, std::size_t num_classes);
  static Classifier mlp(std::size_t input_dim, std::size_t hidden, std::size_t num_classes,
                        Activation act = Activation::tanh);

  ModelKind kind() const noexcept { return kind_; }
  Activation activation() const noexcept { return act_; }
  std::size_t input_dim() const noexcept { return in_; }
  std::size_t hidden_dim() const noexcept { return hidden_; }
  std::size_t num_classes() const noexcept { return out_; }

  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }

  /// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
  void initialize(Rng& rng);

  ScoreVector score(std::span<const double> features) const;
  ScoreMatrix forward(std::span<const std::vector<double>> batch) const;

  /// Adds d(loss)/d(params) for one sample to `grad`, given d(loss)/d(scores).
  void accumulate_gradient(std::span<const double> features, std::span<const double> score_grad,
                           std::span<double> grad) const;

  /// Output-layer weight row of each class (last fully connected layer).
  std::vector<std::vector<double>> class_weight_rows() const;

  friend bool operator==(const Classifier&, const Classifier&) = default;

 private:
  Classifier(ModelKind kind, std::size_t in, std::size_t hidden, std::size_t out, Activation act);
  void check_input(std::span<const double> features) const;
  void hidden_forward(std::span<const double> x, std::vector<double>& pre,
                      std::vector<double>& post) const;

  ModelKind kind_;
  Activation act_;
  std::size_t in_;
  std::size_t hidden_;
  std::size_t out_;
  std::vector<double> params_;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  LossSpec loss = [] {
    LossSpec s;
    s.kind = LossKind::ce;
    return s;
  }();
  bool resample = false;
};

void validate(const TrainConfig& config);

struct TrainHistory {
  std::vector<double> epoch_loss;      // mean per-sample loss seen during the epoch
  std::vector<double> epoch_accuracy;  // training accuracy after the epoch
};

struct TrainResult {
  Classifier model;
  TrainHistory history;
  std::vector<std::string> warnings;
};

/// Plain mini-batch SGD (no momentum, constant rate) on the mean batch loss.
/// Epoch order comes from `Rng::derive(seed, "shuffle")`; with `resample`
/// set, each epoch instead draws a class-balanced schedule.
TrainResult train(Classifier model, const Dataset& data, const LabelSpace& space,
                  const TrainConfig& config);

/// Mean loss and its parameter gradient over a fixed batch.
double batch_loss_and_gradient(const Classifier& model, const Loss& loss, const Dataset& data,
                               std::span<const std::size_t> batch, std::span<double> grad);

/// (ground truth, argmax prediction) per sample.
PredictionLog predict_log(const Classifier& model, const Dataset& data);

/// One epoch of class-balanced, with-replacement sample indices: a class is
/// drawn uniformly, then a sample uniformly within it. Length = data size.
std::vector<std::size_t> resample_balanced(const Dataset& data, std::size_t num_classes, Rng& rng);
std::vector<std::size_t> resample_balanced(const Dataset& data, std::size_t num_classes,
                                           std::uint64_t seed);

struct Checkpoint {
  Classifier model;
  std::uint64_t seed = 0;
  std::string config_digest;
};

std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(std::string_view text);

}  // namespace cogtree
