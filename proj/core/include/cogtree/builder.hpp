#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cogtree/tree.hpp"
#include "cogtree/types.hpp"

namespace cogtree {

/// Per-ground-truth-class histogram of predicted labels from a biased model.
class ConfusionStats {
 public:
  explicit ConfusionStats(std::size_t num_classes);

  std::size_t num_classes() const noexcept { return n_; }
  std::uint64_t at(ClassIndex truth, ClassIndex predicted) const { return counts_[truth * n_ + predicted]; }
  std::span<const std::uint64_t> row(ClassIndex truth) const { return {counts_.data() + truth * n_, n_}; }
  std::uint64_t total(ClassIndex truth) const { return totals_.at(truth); }
  bool observed(ClassIndex truth) const { return totals_.at(truth) > 0; }
  /// Classes that never occur as ground truth in the log.
  std::vector<ClassIndex> unobserved() const;

  void add(ClassIndex truth, ClassIndex predicted);

  /// Predicted classes ranked by descending frequency in P_truth. Ties go to
  /// the class with the larger training count, then the smaller index.
  /// Zero-frequency entries are omitted.
  std::vector<ClassIndex> ranked(ClassIndex truth, std::span<const std::uint64_t> train_counts) const;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> totals_;
};

/// Class -> concept class assignment.
struct ConceptMap {
  std::vector<ClassIndex> concept_of;
  std::vector<ClassIndex> concepts;  // sorted, distinct values of concept_of

  /// Classes assigned to `c` other than `c` itself.
  std::vector<ClassIndex> members(ClassIndex c) const;
  friend bool operator==(const ConceptMap&, const ConceptMap&) = default;
};

ConfusionStats collect_confusion(const PredictionLog& log, const LabelSpace& space);

/// Step 1: each class goes to the class it is most often predicted as.
/// Unobserved classes map to themselves.
ConceptMap induce_concepts(const ConfusionStats& stats, const LabelSpace& space);

/// Step 2: resolve the raw argmax map into T concept-centred subtrees.
///
/// - A class that some other class is induced into keeps the root role of
///   its own subtree even when its own argmax points elsewhere (warning).
/// - A concept left without leaves is relinked under the highest-ranked
///   class of its own prediction distribution that is a concept with leaves.
///   Singletons are processed by descending runner-up frequency, then class
///   index.
/// - A singleton whose distribution names no such concept (including
///   unobserved classes) attaches under the largest concept (warning).
///
/// Throws no-valid-host when no concept with leaves exists at all.
ConceptMap build_subtrees(const ConceptMap& map, const ConfusionStats& stats,
                          const LabelSpace& space, std::vector<std::string>* warnings = nullptr);

/// Relinking with an explicit singleton processing order. `build_subtrees`
/// calls this with its canonical order; exposed for order-sensitivity tests.
ConceptMap build_subtrees_in_order(const ConceptMap& map, const ConfusionStats& stats,
                                   const LabelSpace& space, std::span<const ClassIndex> order,
                                   std::vector<std::string>* warnings = nullptr);

/// Singletons of `map` (after root-role resolution) in canonical order.
std::vector<ClassIndex> singleton_order(const ConceptMap& map, const ConfusionStats& stats,
                                        const LabelSpace& space);

/// Step 3: root -> one concept_virtual per concept -> concept_leaf plus a
/// fine_virtual holding the concept's fine-grained classes.
CogTree aggregate_tree(const ConceptMap& map, const LabelSpace& space, std::string built_from = {});

/// Fine-layer and subtree-mixing ablations over the same concept map.
CogTree fuse_layer_tree(const ConceptMap& map, const LabelSpace& space, std::string built_from = {});
CogTree fuse_subtree_tree(const ConceptMap& map, const LabelSpace& space, std::string built_from = {});
/// Every class a direct child of the root.
CogTree flat_tree(const LabelSpace& space, std::string built_from = {});

struct TreeBuild {
  CogTree tree;
  ConceptMap concepts;
  std::vector<std::string> warnings;
};

/// Full pipeline from a prediction log. `variant` must not be `cluster`.
TreeBuild build_cogtree(const PredictionLog& log, const LabelSpace& space, TreeVariant variant);

std::string log_digest(const PredictionLog& log);

/// Average-linkage agglomerative clustering of per-class vectors cut at
/// `num_concepts` clusters; the member with the largest training count heads
/// each cluster. Same 4-layer shape as `aggregate_tree`.
CogTree cluster_tree(std::span<const std::vector<double>> class_vectors, const LabelSpace& space,
                     std::size_t num_concepts);

}  // namespace cogtree
