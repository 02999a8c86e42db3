#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogtree/types.hpp"

namespace cogtree {

using NodeId = std::size_t;

enum class NodeKind { root, concept_virtual, concept_leaf, fine_virtual, fine_leaf };

enum class TreeVariant { standard, fuse_layer, fuse_subtree, flat, cluster };

const char* to_string(NodeKind kind) noexcept;
const char* to_string(TreeVariant variant) noexcept;
NodeKind parse_node_kind(std::string_view text);
TreeVariant parse_tree_variant(std::string_view text);

struct TreeNode {
  NodeId id = 0;
  NodeKind kind = NodeKind::root;
  std::size_t layer = 0;
  std::optional<ClassIndex> class_index;  // leaves only
  std::vector<NodeId> children;

  bool is_leaf() const noexcept { return children.empty(); }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Rooted label hierarchy whose leaves partition the classes.
///
/// Node ids are dense (`nodes[i].id == i`), node 0 is the root and every
/// child id is larger than its parent's, so iterating ids in reverse visits
/// children before parents. The constructor checks the structural
/// invariants shared by every variant (single root, dense ids, tree shape,
/// `layer == depth`, leaves carry exactly the classes, each once); the
/// per-variant layer/kind discipline is checked by `check_invariants`.
class CogTree {
 public:
  CogTree(TreeVariant variant, std::vector<std::string> labels, std::vector<TreeNode> nodes,
          std::string built_from = {});

  TreeVariant variant() const noexcept { return variant_; }
  std::span<const std::string> labels() const noexcept { return labels_; }
  std::span<const TreeNode> nodes() const noexcept { return nodes_; }
  const TreeNode& node(NodeId id) const { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t num_classes() const noexcept { return labels_.size(); }
  const std::string& built_from() const noexcept { return built_from_; }

  std::optional<NodeId> parent(NodeId id) const { return parents_.at(id); }
  NodeId leaf_of(ClassIndex c) const;

  /// Root-to-leaf node ids S_0..S_K for class `c`; throws unknown-class.
  std::span<const NodeId> path(ClassIndex c) const;
  /// K, the number of edges on the path of `c`.
  std::size_t depth(ClassIndex c) const { return path(c).size() - 1; }

  friend bool operator==(const CogTree& a, const CogTree& b) {
    return a.variant_ == b.variant_ && a.labels_ == b.labels_ && a.nodes_ == b.nodes_ &&
           a.built_from_ == b.built_from_;
  }

 private:
  TreeVariant variant_;
  std::vector<std::string> labels_;
  std::vector<TreeNode> nodes_;
  std::string built_from_;
  std::vector<std::optional<NodeId>> parents_;
  std::vector<NodeId> leaf_of_;
  std::vector<std::vector<NodeId>> paths_;
};

std::span<const NodeId> ground_truth_path(const CogTree& tree, ClassIndex c);

/// Variant-specific layer/kind discipline and path lengths. Returns one
/// message per violation; empty means the tree is well formed.
std::vector<std::string> check_invariants(const CogTree& tree);

/// Versioned JSON document; `tree_from_json(tree_to_json(t)) == t` and the
/// text is byte-stable under a second write.
std::string tree_to_json(const CogTree& tree);
CogTree tree_from_json(std::string_view text);

/// Graphviz rendering: shape by node kind, leaves labelled by class name.
std::string tree_to_dot(const CogTree& tree);

/// Builder helper: appends nodes in breadth-first order so ids satisfy the
/// CogTree ordering requirement.
class TreeAssembler {
 public:
  NodeId add_root();
  NodeId add_child(NodeId parent, NodeKind kind, std::optional<ClassIndex> c = std::nullopt);
  CogTree finish(TreeVariant variant, std::vector<std::string> labels,
                 std::string built_from = {}) &&;

 private:
  struct Pending {
    NodeKind kind;
    std::optional<ClassIndex> class_index;
    std::vector<std::size_t> children;
  };
  std::vector<Pending> pending_;
};

}  // namespace cogtree
