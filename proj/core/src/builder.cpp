#include "cogtree/builder.hpp"

#include <algorithm>
#include <numeric>

#include "cogtree/clustering.hpp"
#include "cogtree/digest.hpp"
#include "cogtree/error.hpp"

namespace cogtree {

ConfusionStats::ConfusionStats(std::size_t num_classes)
    : n_(num_classes), counts_(num_classes * num_classes, 0), totals_(num_classes, 0) {}

void ConfusionStats::add(ClassIndex truth, ClassIndex predicted) {
  if (truth >= n_ || predicted >= n_) {
    throw Error(ErrorCode::label_out_of_range, "confusion entry outside the label space");
  }
  ++counts_[truth * n_ + predicted];
  ++totals_[truth];
}

std::vector<ClassIndex> ConfusionStats::unobserved() const {
  std::vector<ClassIndex> out;
  for (ClassIndex i = 0; i < n_; ++i) {
    if (totals_[i] == 0) out.push_back(i);
  }
  return out;
}

std::vector<ClassIndex> ConfusionStats::ranked(ClassIndex truth,
                                               std::span<const std::uint64_t> train_counts) const {
  auto r = row(truth);
  std::vector<ClassIndex> out;
  for (ClassIndex j = 0; j < n_; ++j) {
    if (r[j] > 0) out.push_back(j);
  }
  std::sort(out.begin(), out.end(), [&](ClassIndex a, ClassIndex b) {
    if (r[a] != r[b]) return r[a] > r[b];
    if (train_counts[a] != train_counts[b]) return train_counts[a] > train_counts[b];
    return a < b;
  });
  return out;
}

std::vector<ClassIndex> ConceptMap::members(ClassIndex c) const {
  std::vector<ClassIndex> out;
  for (ClassIndex i = 0; i < concept_of.size(); ++i) {
    if (i != c && concept_of[i] == c) out.push_back(i);
  }
  return out;
}

namespace {

__extension__ using uint128 = unsigned __int128;

std::vector<ClassIndex> distinct_sorted(std::vector<ClassIndex> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

void warn(std::vector<std::string>* warnings, std::string message) {
  if (warnings) warnings->push_back(std::move(message));
}

// Root-role resolution of the raw argmax map. Classes that anyone else is
// induced into become roots; everyone else joins the root they point at or
// stays a singleton. Roots that end up without leaves are singletons too.
struct Resolution {
  std::vector<ClassIndex> concept_of;
  std::vector<std::size_t> leaf_count;
  std::vector<ClassIndex> singletons;  // ascending class index
};

Resolution resolve_roots(const ConceptMap& map, const LabelSpace& space,
                         std::vector<std::string>* warnings) {
  const std::size_t n = map.concept_of.size();
  if (n != space.size()) {
    throw Error(ErrorCode::invalid_argument, "concept map does not match the label space");
  }
  std::vector<bool> is_root(n, false);
  for (ClassIndex i = 0; i < n; ++i) {
    if (map.concept_of[i] >= n) throw Error(ErrorCode::label_out_of_range, "concept index", i);
    if (map.concept_of[i] != i) is_root[map.concept_of[i]] = true;
  }

  Resolution r;
  r.concept_of.resize(n);
  r.leaf_count.assign(n, 0);
  for (ClassIndex i = 0; i < n; ++i) {
    const ClassIndex target = map.concept_of[i];
    if (is_root[i]) {
      r.concept_of[i] = i;
      if (target != i) {
        warn(warnings, "class '" + space.name(i) + "' is most often predicted as '" +
                           space.name(target) + "' but heads its own concept");
      }
    } else if (target != i && is_root[target]) {
      r.concept_of[i] = target;
      ++r.leaf_count[target];
    } else {
      r.concept_of[i] = i;
    }
  }
  for (ClassIndex i = 0; i < n; ++i) {
    if (r.concept_of[i] == i && r.leaf_count[i] == 0) r.singletons.push_back(i);
  }
  return r;
}

}  // namespace

ConfusionStats collect_confusion(const PredictionLog& log, const LabelSpace& space) {
  if (log.rows.empty()) throw Error(ErrorCode::empty_log, "prediction log has no rows");
  validate_log(log, space);
  ConfusionStats stats(space.size());
  for (const Prediction& p : log.rows) stats.add(p.ground_truth, p.predicted);
  return stats;
}

ConceptMap induce_concepts(const ConfusionStats& stats, const LabelSpace& space) {
  if (stats.num_classes() != space.size()) {
    throw Error(ErrorCode::invalid_argument, "confusion stats do not match the label space");
  }
  ConceptMap map;
  map.concept_of.resize(space.size());
  for (ClassIndex i = 0; i < space.size(); ++i) {
    if (!stats.observed(i)) {
      map.concept_of[i] = i;
      continue;
    }
    map.concept_of[i] = stats.ranked(i, space.counts()).front();
  }
  map.concepts = distinct_sorted(map.concept_of);
  return map;
}

std::vector<ClassIndex> singleton_order(const ConceptMap& map, const ConfusionStats& stats,
                                        const LabelSpace& space) {
  Resolution r = resolve_roots(map, space, nullptr);
  struct Key {
    ClassIndex c;
    std::uint64_t runner_up;
    std::uint64_t total;
  };
  std::vector<Key> keys;
  for (ClassIndex s : r.singletons) {
    Key k{s, 0, 1};
    if (stats.observed(s)) {
      for (ClassIndex j : stats.ranked(s, space.counts())) {
        if (j != s) {
          k.runner_up = stats.at(s, j);
          k.total = stats.total(s);
          break;
        }
      }
    }
    keys.push_back(k);
  }
  // Relative frequencies compared exactly by cross-multiplication.
  std::stable_sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    const auto lhs = static_cast<uint128>(a.runner_up) * b.total;
    const auto rhs = static_cast<uint128>(b.runner_up) * a.total;
    if (lhs != rhs) return lhs > rhs;
    return a.c < b.c;
  });
  std::vector<ClassIndex> out;
  for (const Key& k : keys) out.push_back(k.c);
  return out;
}

ConceptMap build_subtrees_in_order(const ConceptMap& map, const ConfusionStats& stats,
                                   const LabelSpace& space, std::span<const ClassIndex> order,
                                   std::vector<std::string>* warnings) {
  if (stats.num_classes() != space.size()) {
    throw Error(ErrorCode::invalid_argument, "confusion stats do not match the label space");
  }
  Resolution r = resolve_roots(map, space, warnings);
  {
    std::vector<ClassIndex> sorted(order.begin(), order.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted != r.singletons) {
      throw Error(ErrorCode::invalid_argument, "order is not a permutation of the singletons");
    }
  }

  auto has_leaves = [&](ClassIndex c) { return r.concept_of[c] == c && r.leaf_count[c] > 0; };
  bool any_host = false;
  for (ClassIndex c = 0; c < space.size(); ++c) any_host = any_host || has_leaves(c);
  if (!any_host && !r.singletons.empty()) {
    throw Error(ErrorCode::no_valid_host, "no concept has any leaves to host isolated classes");
  }

  std::vector<ClassIndex> fallback;
  for (ClassIndex s : order) {
    bool linked = false;
    if (stats.observed(s)) {
      for (ClassIndex k : stats.ranked(s, space.counts())) {
        if (k != s && has_leaves(k)) {
          r.concept_of[s] = k;
          ++r.leaf_count[k];
          linked = true;
          break;
        }
      }
    }
    if (!linked) fallback.push_back(s);
  }

  for (ClassIndex s : fallback) {
    ClassIndex host = 0;
    bool found = false;
    for (ClassIndex c = 0; c < space.size(); ++c) {
      if (!has_leaves(c)) continue;
      if (!found || r.leaf_count[c] > r.leaf_count[host] ||
          (r.leaf_count[c] == r.leaf_count[host] && space.count(c) > space.count(host))) {
        host = c;
        found = true;
      }
    }
    r.concept_of[s] = host;
    ++r.leaf_count[host];
    warn(warnings, std::string(stats.observed(s) ? "isolated" : "unobserved") + " class '" +
                       space.name(s) + "' attached under the largest concept '" +
                       space.name(host) + "'");
  }

  ConceptMap out;
  out.concept_of = std::move(r.concept_of);
  out.concepts = distinct_sorted(out.concept_of);
  return out;
}

ConceptMap build_subtrees(const ConceptMap& map, const ConfusionStats& stats,
                          const LabelSpace& space, std::vector<std::string>* warnings) {
  const std::vector<ClassIndex> order = singleton_order(map, stats, space);
  return build_subtrees_in_order(map, stats, space, order, warnings);
}

namespace {

void check_relinked(const ConceptMap& map, const LabelSpace& space) {
  if (map.concept_of.size() != space.size()) {
    throw Error(ErrorCode::invalid_argument, "concept map does not match the label space");
  }
  for (ClassIndex i = 0; i < map.concept_of.size(); ++i) {
    const ClassIndex c = map.concept_of[i];
    if (c >= space.size() || map.concept_of[c] != c) {
      throw Error(ErrorCode::invalid_argument, "concept map is not resolved into subtrees", i);
    }
  }
}

std::vector<std::string> label_names(const LabelSpace& space) {
  return {space.names().begin(), space.names().end()};
}

}  // namespace

CogTree aggregate_tree(const ConceptMap& map, const LabelSpace& space, std::string built_from) {
  check_relinked(map, space);
  TreeAssembler t;
  const NodeId root = t.add_root();
  for (ClassIndex c : distinct_sorted(map.concept_of)) {
    const NodeId y1 = t.add_child(root, NodeKind::concept_virtual);
    t.add_child(y1, NodeKind::concept_leaf, c);
    const auto fine = map.members(c);
    if (!fine.empty()) {
      const NodeId fv = t.add_child(y1, NodeKind::fine_virtual);
      for (ClassIndex f : fine) t.add_child(fv, NodeKind::fine_leaf, f);
    }
  }
  return std::move(t).finish(TreeVariant::standard, label_names(space), std::move(built_from));
}

CogTree fuse_layer_tree(const ConceptMap& map, const LabelSpace& space, std::string built_from) {
  check_relinked(map, space);
  TreeAssembler t;
  const NodeId root = t.add_root();
  for (ClassIndex c : distinct_sorted(map.concept_of)) {
    const NodeId y1 = t.add_child(root, NodeKind::concept_virtual);
    t.add_child(y1, NodeKind::concept_leaf, c);
    for (ClassIndex f : map.members(c)) t.add_child(y1, NodeKind::fine_leaf, f);
  }
  return std::move(t).finish(TreeVariant::fuse_layer, label_names(space), std::move(built_from));
}

CogTree fuse_subtree_tree(const ConceptMap& map, const LabelSpace& space, std::string built_from) {
  check_relinked(map, space);
  TreeAssembler t;
  const NodeId root = t.add_root();
  std::vector<ClassIndex> fine;
  for (ClassIndex c : distinct_sorted(map.concept_of)) {
    t.add_child(root, NodeKind::concept_leaf, c);
    for (ClassIndex f : map.members(c)) fine.push_back(f);
  }
  std::sort(fine.begin(), fine.end());
  if (!fine.empty()) {
    const NodeId fv = t.add_child(root, NodeKind::fine_virtual);
    for (ClassIndex f : fine) t.add_child(fv, NodeKind::fine_leaf, f);
  }
  return std::move(t).finish(TreeVariant::fuse_subtree, label_names(space), std::move(built_from));
}

CogTree flat_tree(const LabelSpace& space, std::string built_from) {
  TreeAssembler t;
  const NodeId root = t.add_root();
  for (ClassIndex c = 0; c < space.size(); ++c) t.add_child(root, NodeKind::fine_leaf, c);
  return std::move(t).finish(TreeVariant::flat, label_names(space), std::move(built_from));
}

std::string log_digest(const PredictionLog& log) {
  Digest d;
  d.update(static_cast<std::uint64_t>(log.rows.size()));
  for (const Prediction& p : log.rows) {
    d.update(static_cast<std::uint64_t>(p.ground_truth));
    d.update(static_cast<std::uint64_t>(p.predicted));
  }
  return d.hex();
}

TreeBuild build_cogtree(const PredictionLog& log, const LabelSpace& space, TreeVariant variant) {
  if (variant == TreeVariant::cluster) {
    throw Error(ErrorCode::invalid_argument, "cluster trees are built from class vectors");
  }
  const ConfusionStats stats = collect_confusion(log, space);
  const std::string digest = log_digest(log);
  std::vector<std::string> warnings;
  if (variant == TreeVariant::flat) {
    ConceptMap identity;
    identity.concept_of.resize(space.size());
    std::iota(identity.concept_of.begin(), identity.concept_of.end(), ClassIndex{0});
    identity.concepts = identity.concept_of;
    return {flat_tree(space, digest), std::move(identity), std::move(warnings)};
  }
  const ConceptMap raw = induce_concepts(stats, space);
  ConceptMap map = build_subtrees(raw, stats, space, &warnings);
  CogTree tree = [&] {
    switch (variant) {
      case TreeVariant::fuse_layer: return fuse_layer_tree(map, space, digest);
      case TreeVariant::fuse_subtree: return fuse_subtree_tree(map, space, digest);
      default: return aggregate_tree(map, space, digest);
    }
  }();
  return {std::move(tree), std::move(map), std::move(warnings)};
}

CogTree cluster_tree(std::span<const std::vector<double>> class_vectors, const LabelSpace& space,
                     std::size_t num_concepts) {
  if (class_vectors.size() != space.size()) {
    throw Error(ErrorCode::invalid_argument, "need one vector per class");
  }
  if (num_concepts == 0 || num_concepts > space.size()) {
    throw Error(ErrorCode::invalid_argument,
                "num_concepts must be between 1 and the class count (" +
                    std::to_string(space.size()) + ")");
  }
  const auto clusters = average_linkage(class_vectors, num_concepts);
  ConceptMap map;
  map.concept_of.resize(space.size());
  for (const auto& members : clusters) {
    ClassIndex head = members.front();
    for (ClassIndex m : members) {
      if (space.count(m) > space.count(head)) head = m;
    }
    for (ClassIndex m : members) map.concept_of[m] = head;
  }
  map.concepts = distinct_sorted(map.concept_of);

  Digest d;
  for (const auto& v : class_vectors) d.update(std::span<const double>(v));
  d.update(static_cast<std::uint64_t>(num_concepts));
  CogTree standard = aggregate_tree(map, space);
  std::vector<TreeNode> nodes(standard.nodes().begin(), standard.nodes().end());
  return CogTree(TreeVariant::cluster, label_names(space), std::move(nodes), "cluster:" + d.hex());
}

}  // namespace cogtree
