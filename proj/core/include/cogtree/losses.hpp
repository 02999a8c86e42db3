#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogtree/tree.hpp"
#include "cogtree/types.hpp"

namespace cogtree {

enum class Aggregator { average, max, sum };
enum class LossKind { ce, cb, focal, tce, tcb, cogtree };

const char* to_string(Aggregator agg) noexcept;
const char* to_string(LossKind kind) noexcept;
Aggregator parse_aggregator(std::string_view text);
LossKind parse_loss_kind(std::string_view text);
bool requires_tree(LossKind kind) noexcept;

/// Class-balanced leaf weights w_i = (1 - beta) / (1 - beta^n_i).
struct ClassWeights {
  std::vector<double> w;
  double beta = 0.0;
};

/// Throws zero-count if any n_i is 0, invalid-argument unless 0 <= beta < 1.
ClassWeights class_balanced_weights(std::span<const std::uint64_t> counts, double beta);

/// w scaled so that sum(w) equals w.size(); ratios are unchanged.
ClassWeights normalized(ClassWeights weights);

/// Copies `counts` with zeros raised to 1, noting each floored class.
std::vector<std::uint64_t> floor_counts(std::span<const std::uint64_t> counts,
                                        std::vector<std::string>* warnings = nullptr);

/// Per-node values of a tree: leaves copy the per-class input, internal
/// nodes aggregate their children. The aggregator travels with the values so
/// score and weight aggregation cannot disagree.
struct NodeValues {
  std::vector<double> values;
  Aggregator aggregator = Aggregator::average;
};

NodeValues node_values(const CogTree& tree, std::span<const double> leaf_values, Aggregator agg);

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d score, one entry per class
};

LossResult loss_ce(std::span<const double> scores, ClassIndex target);
LossResult loss_cb(std::span<const double> scores, ClassIndex target, const ClassWeights& weights);
LossResult loss_focal(std::span<const double> scores, ClassIndex target, double gamma);

/// Tree-based class-balanced loss: the mean over the K levels of the
/// ground-truth path of the weighted softmax cross-entropy among the
/// children of S_{k-1}. Scores are aggregated with `node_weights.aggregator`.
/// A level with a single child contributes nothing but still counts in K.
LossResult loss_tcb(const CogTree& tree, std::span<const double> scores, ClassIndex target,
                    const NodeValues& node_weights);

/// L_CB + lambda * L_TCB.
LossResult loss_cogtree(const CogTree& tree, std::span<const double> scores, ClassIndex target,
                        const ClassWeights& weights, const NodeValues& node_weights, double lambda);

/// Central differences (f(p + eps e_j) - f(p - eps e_j)) / (2 eps).
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& fn,
                                     std::span<const double> scores, double eps);

struct LossSpec {
  LossKind kind = LossKind::cogtree;
  double lambda = 1.0;
  double beta = 0.999;
  double gamma = 2.0;
  Aggregator aggregator = Aggregator::average;
  /// Rescale class-balanced weights to sum to the class count before use
  /// (node weights are aggregated from the rescaled leaves).
  bool normalize_weights = true;
  std::shared_ptr<const CogTree> tree;
};

/// A LossSpec bound to a label space: weights and aggregated node weights
/// are computed once, then the object is a pure function of (scores, target).
///
/// TCE uses unit weights at every node. Zero training counts are floored at
/// 1 (see `warnings()`).
class Loss {
 public:
  Loss(LossSpec spec, std::span<const std::uint64_t> class_counts);

  LossResult operator()(std::span<const double> scores, ClassIndex target) const;

  const LossSpec& spec() const noexcept { return spec_; }
  const ClassWeights& class_weights() const noexcept { return weights_; }
  const NodeValues& node_weights() const noexcept { return node_weights_; }
  std::span<const std::string> warnings() const noexcept { return warnings_; }

 private:
  LossSpec spec_;
  std::size_t num_classes_;
  ClassWeights weights_;
  NodeValues node_weights_;
  std::vector<std::string> warnings_;
};

}  // namespace cogtree
