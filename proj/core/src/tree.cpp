#include "cogtree/tree.hpp"

#include <deque>
#include <sstream>

#include "cogtree/error.hpp"
#include "json.hpp"

namespace cogtree {

using json = nlohmann::ordered_json;

namespace {
constexpr int kTreeSchemaVersion = 1;
}

const char* to_string(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::root: return "root";
    case NodeKind::concept_virtual: return "concept_virtual";
    case NodeKind::concept_leaf: return "concept_leaf";
    case NodeKind::fine_virtual: return "fine_virtual";
    case NodeKind::fine_leaf: return "fine_leaf";
  }
  return "root";
}

const char* to_string(TreeVariant variant) noexcept {
  switch (variant) {
    case TreeVariant::standard: return "standard";
    case TreeVariant::fuse_layer: return "fuse_layer";
    case TreeVariant::fuse_subtree: return "fuse_subtree";
    case TreeVariant::flat: return "flat";
    case TreeVariant::cluster: return "cluster";
  }
  return "standard";
}

NodeKind parse_node_kind(std::string_view text) {
  for (auto k : {NodeKind::root, NodeKind::concept_virtual, NodeKind::concept_leaf,
                 NodeKind::fine_virtual, NodeKind::fine_leaf}) {
    if (text == to_string(k)) return k;
  }
  throw Error(ErrorCode::parse_error, "unknown node kind '" + std::string(text) + "'");
}

TreeVariant parse_tree_variant(std::string_view text) {
  for (auto v : {TreeVariant::standard, TreeVariant::fuse_layer, TreeVariant::fuse_subtree,
                 TreeVariant::flat, TreeVariant::cluster}) {
    if (text == to_string(v)) return v;
  }
  // Hyphenated spellings are accepted on the command line.
  if (text == "fuse-layer") return TreeVariant::fuse_layer;
  if (text == "fuse-subtree") return TreeVariant::fuse_subtree;
  if (text == "cluster-tree" || text == "cluster_tree") return TreeVariant::cluster;
  throw Error(ErrorCode::invalid_argument, "unknown tree variant '" + std::string(text) + "'");
}

CogTree::CogTree(TreeVariant variant, std::vector<std::string> labels,
                 std::vector<TreeNode> nodes, std::string built_from)
    : variant_(variant),
      labels_(std::move(labels)),
      nodes_(std::move(nodes)),
      built_from_(std::move(built_from)) {
  auto fail = [](const std::string& what, std::optional<std::size_t> at = std::nullopt) {
    throw Error(ErrorCode::invalid_argument, "malformed tree: " + what, at);
  };
  if (nodes_.empty()) fail("no nodes");
  if (labels_.empty()) fail("no labels");

  parents_.assign(nodes_.size(), std::nullopt);
  constexpr NodeId kNone = static_cast<NodeId>(-1);
  leaf_of_.assign(labels_.size(), kNone);

  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const TreeNode& n = nodes_[id];
    if (n.id != id) fail("node ids must be dense and ordered", id);
    for (NodeId child : n.children) {
      if (child <= id || child >= nodes_.size()) fail("child id must exceed parent id", id);
      if (parents_[child]) fail("node has two parents", child);
      parents_[child] = id;
    }
  }
  for (NodeId id = 1; id < nodes_.size(); ++id) {
    if (!parents_[id]) fail("unreachable node", id);
  }
  if (nodes_[0].kind != NodeKind::root) fail("node 0 must be the root");

  paths_.assign(labels_.size(), {});
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const TreeNode& n = nodes_[id];
    const std::size_t depth = parents_[id] ? nodes_[*parents_[id]].layer + 1 : 0;
    if (n.layer != depth) fail("layer differs from depth", id);
    if (id > 0 && n.kind == NodeKind::root) fail("second root", id);
    if (n.is_leaf()) {
      if (!n.class_index) fail("leaf without class", id);
      if (*n.class_index >= labels_.size()) fail("leaf class out of range", id);
      if (leaf_of_[*n.class_index] != kNone) fail("class appears in two leaves", id);
      leaf_of_[*n.class_index] = id;
    } else if (n.class_index) {
      fail("internal node carries a class", id);
    }
  }
  for (ClassIndex c = 0; c < labels_.size(); ++c) {
    if (leaf_of_[c] == kNone) fail("class missing from leaves", c);
    std::vector<NodeId> path;
    for (std::optional<NodeId> at = leaf_of_[c]; at; at = parents_[*at]) path.push_back(*at);
    paths_[c].assign(path.rbegin(), path.rend());
  }
}

NodeId CogTree::leaf_of(ClassIndex c) const {
  if (c >= leaf_of_.size()) throw Error(ErrorCode::unknown_class, "class not in tree", c);
  return leaf_of_[c];
}

std::span<const NodeId> CogTree::path(ClassIndex c) const {
  if (c >= paths_.size()) throw Error(ErrorCode::unknown_class, "class not in tree", c);
  return paths_[c];
}

std::span<const NodeId> ground_truth_path(const CogTree& tree, ClassIndex c) {
  return tree.path(c);
}

std::vector<std::string> check_invariants(const CogTree& tree) {
  std::vector<std::string> out;
  auto violation = [&](NodeId id, const std::string& what) {
    out.push_back("node " + std::to_string(id) + ": " + what);
  };
  auto expect = [&](const TreeNode& n, std::initializer_list<NodeKind> kinds, std::size_t layer) {
    bool ok = false;
    for (NodeKind k : kinds) ok = ok || n.kind == k;
    if (!ok) violation(n.id, std::string("unexpected kind ") + to_string(n.kind));
    if (n.layer != layer) violation(n.id, "unexpected layer " + std::to_string(n.layer));
  };

  const TreeNode& root = tree.node(0);
  if (root.children.empty()) violation(0, "root has no children");

  for (NodeId y1 : root.children) {
    const TreeNode& a = tree.node(y1);
    switch (tree.variant()) {
      case TreeVariant::flat:
        expect(a, {NodeKind::fine_leaf, NodeKind::concept_leaf}, 1);
        break;
      case TreeVariant::fuse_subtree:
        expect(a, {NodeKind::concept_leaf, NodeKind::fine_virtual}, 1);
        if (a.kind == NodeKind::fine_virtual) {
          if (a.children.empty()) violation(a.id, "fine_virtual without leaves");
          for (NodeId f : a.children) expect(tree.node(f), {NodeKind::fine_leaf}, 2);
        }
        break;
      case TreeVariant::fuse_layer: {
        expect(a, {NodeKind::concept_virtual}, 1);
        std::size_t concept_leaves = 0;
        for (NodeId b : a.children) {
          const TreeNode& n = tree.node(b);
          expect(n, {NodeKind::concept_leaf, NodeKind::fine_leaf}, 2);
          if (n.kind == NodeKind::concept_leaf) ++concept_leaves;
        }
        if (concept_leaves != 1) violation(a.id, "needs exactly one concept_leaf child");
        break;
      }
      case TreeVariant::standard:
      case TreeVariant::cluster: {
        expect(a, {NodeKind::concept_virtual}, 1);
        std::size_t concept_leaves = 0, fine_virtuals = 0;
        for (NodeId b : a.children) {
          const TreeNode& n = tree.node(b);
          expect(n, {NodeKind::concept_leaf, NodeKind::fine_virtual}, 2);
          if (n.kind == NodeKind::concept_leaf) ++concept_leaves;
          if (n.kind == NodeKind::fine_virtual) {
            ++fine_virtuals;
            if (n.children.empty()) violation(n.id, "fine_virtual without leaves");
            for (NodeId f : n.children) expect(tree.node(f), {NodeKind::fine_leaf}, 3);
          }
        }
        if (concept_leaves != 1) violation(a.id, "needs exactly one concept_leaf child");
        if (fine_virtuals > 1) violation(a.id, "more than one fine_virtual child");
        break;
      }
    }
  }

  for (ClassIndex c = 0; c < tree.num_classes(); ++c) {
    const std::size_t k = tree.depth(c);
    const NodeKind kind = tree.node(tree.leaf_of(c)).kind;
    bool ok = true;
    switch (tree.variant()) {
      case TreeVariant::flat: ok = k == 1; break;
      case TreeVariant::fuse_subtree:
        ok = (kind == NodeKind::concept_leaf && k == 1) || (kind == NodeKind::fine_leaf && k == 2);
        break;
      case TreeVariant::fuse_layer: ok = k == 2; break;
      case TreeVariant::standard:
      case TreeVariant::cluster:
        ok = (kind == NodeKind::concept_leaf && k == 2) || (kind == NodeKind::fine_leaf && k == 3);
        break;
    }
    if (!ok) out.push_back("class " + std::to_string(c) + ": path length " + std::to_string(k));
  }
  return out;
}

std::string tree_to_json(const CogTree& tree) {
  json doc;
  doc["version"] = kTreeSchemaVersion;
  doc["variant"] = to_string(tree.variant());
  doc["labels"] = json::array();
  for (const auto& l : tree.labels()) doc["labels"].push_back(l);
  doc["nodes"] = json::array();
  for (const TreeNode& n : tree.nodes()) {
    json node;
    node["id"] = n.id;
    node["kind"] = to_string(n.kind);
    node["layer"] = n.layer;
    if (n.class_index) node["class"] = *n.class_index;
    node["children"] = n.children;
    doc["nodes"].push_back(std::move(node));
  }
  doc["built_from"] = tree.built_from();
  return doc.dump(2) + "\n";
}

CogTree tree_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("version").get<int>() != kTreeSchemaVersion) {
      throw Error(ErrorCode::parse_error, "unsupported tree schema version");
    }
    std::vector<TreeNode> nodes;
    for (const json& n : doc.at("nodes")) {
      TreeNode node;
      node.id = n.at("id").get<NodeId>();
      node.kind = parse_node_kind(n.at("kind").get<std::string>());
      node.layer = n.at("layer").get<std::size_t>();
      if (n.contains("class")) node.class_index = n.at("class").get<ClassIndex>();
      node.children = n.at("children").get<std::vector<NodeId>>();
      nodes.push_back(std::move(node));
    }
    return CogTree(parse_tree_variant(doc.at("variant").get<std::string>()),
                   doc.at("labels").get<std::vector<std::string>>(), std::move(nodes),
                   doc.value("built_from", std::string{}));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("tree json: ") + e.what());
  }
}

std::string tree_to_dot(const CogTree& tree) {
  auto escape = [](const std::string& s) {
    std::string out;
    for (char ch : s) {
      if (ch == '"' || ch == '\\') out.push_back('\\');
      out.push_back(ch);
    }
    return out;
  };
  std::ostringstream os;
  os << "digraph cogtree {\n  rankdir=TB;\n";
  for (const TreeNode& n : tree.nodes()) {
    os << "  n" << n.id << " [";
    switch (n.kind) {
      case NodeKind::root: os << "shape=doublecircle, label=\"root\""; break;
      case NodeKind::concept_virtual:
        os << "shape=ellipse, style=dashed, label=\"concept " << n.id << "\"";
        break;
      case NodeKind::fine_virtual:
        os << "shape=ellipse, style=dotted, label=\"fine " << n.id << "\"";
        break;
      case NodeKind::concept_leaf:
        os << "shape=box, style=bold, label=\"" << escape(tree.labels()[*n.class_index]) << "\"";
        break;
      case NodeKind::fine_leaf:
        os << "shape=box, label=\"" << escape(tree.labels()[*n.class_index]) << "\"";
        break;
    }
    os << "];\n";
  }
  for (const TreeNode& n : tree.nodes()) {
    for (NodeId c : n.children) os << "  n" << n.id << " -> n" << c << ";\n";
  }
  os << "}\n";
  return os.str();
}

NodeId TreeAssembler::add_root() {
  if (!pending_.empty()) throw Error(ErrorCode::invalid_argument, "root already added");
  pending_.push_back({NodeKind::root, std::nullopt, {}});
  return 0;
}

NodeId TreeAssembler::add_child(NodeId parent, NodeKind kind, std::optional<ClassIndex> c) {
  if (parent >= pending_.size()) throw Error(ErrorCode::invalid_argument, "unknown parent");
  pending_.push_back({kind, c, {}});
  pending_[parent].children.push_back(pending_.size() - 1);
  return pending_.size() - 1;
}

CogTree TreeAssembler::finish(TreeVariant variant, std::vector<std::string> labels,
                              std::string built_from) && {
  if (pending_.empty()) throw Error(ErrorCode::invalid_argument, "empty tree");
  // Renumber breadth-first so that parents precede children.
  std::vector<NodeId> order;
  std::vector<std::size_t> depth(pending_.size(), 0);
  std::vector<NodeId> renumbered(pending_.size(), 0);
  std::deque<std::size_t> queue{0};
  while (!queue.empty()) {
    std::size_t at = queue.front();
    queue.pop_front();
    renumbered[at] = order.size();
    order.push_back(at);
    for (std::size_t c : pending_[at].children) {
      depth[c] = depth[at] + 1;
      queue.push_back(c);
    }
  }
  std::vector<TreeNode> nodes;
  nodes.reserve(order.size());
  for (NodeId id = 0; id < order.size(); ++id) {
    const Pending& p = pending_[order[id]];
    TreeNode n;
    n.id = id;
    n.kind = p.kind;
    n.layer = depth[order[id]];
    n.class_index = p.class_index;
    for (std::size_t c : p.children) n.children.push_back(renumbered[c]);
    nodes.push_back(std::move(n));
  }
  pending_.clear();
  return CogTree(variant, std::move(labels), std::move(nodes), std::move(built_from));
}

}  // namespace cogtree
