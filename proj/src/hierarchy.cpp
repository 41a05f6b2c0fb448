#include "pen/hierarchy.hpp"

#include <algorithm>
#include <deque>

#include "pen/error.hpp"

namespace pen {

PartHierarchy PartHierarchy::build(const std::vector<NodeSpec>& specs) {
  if (specs.empty()) throw InputError("hierarchy has no nodes");
  const auto n = static_cast<std::uint32_t>(specs.size());

  PartHierarchy tree;
  tree.nodes_.resize(n);
  std::optional<std::uint32_t> root;
  for (std::uint32_t i = 0; i < n; ++i) {
    Node& node = tree.nodes_[i];
    node.id = NodeId{i};
    node.name = specs[i].name;
    node.geometry = specs[i].geometry;
    if (!specs[i].parent) {
      if (root) throw InputError("hierarchy has more than one root (nodes " +
                                 std::to_string(*root) + " and " + std::to_string(i) + ")");
      root = i;
      continue;
    }
    const std::uint32_t p = *specs[i].parent;
    if (p >= n) throw InputError("node " + std::to_string(i) + " has out-of-range parent " +
                                 std::to_string(p));
    if (p == i) throw InputError("node " + std::to_string(i) + " is its own parent");
    node.parent = NodeId{p};
  }
  if (!root) throw InputError("hierarchy has no root");
  tree.root_ = NodeId{*root};
  for (std::uint32_t i = 0; i < n; ++i) {
    if (tree.nodes_[i].parent) tree.nodes_[tree.nodes_[i].parent->index].children.push_back(NodeId{i});
  }

  // Breadth-first from the root; anything left unvisited sits on a cycle.
  tree.depth_.assign(n, 0);
  std::vector<bool> seen(n, false);
  std::deque<std::uint32_t> queue{*root};
  seen[*root] = true;
  std::uint32_t visited = 0;
  while (!queue.empty()) {
    const std::uint32_t u = queue.front();
    queue.pop_front();
    ++visited;
    for (NodeId c : tree.nodes_[u].children) {
      tree.depth_[c.index] = tree.depth_[u] + 1;
      tree.height_ = std::max(tree.height_, tree.depth_[c.index]);
      seen[c.index] = true;
      queue.push_back(c.index);
    }
  }
  if (visited != n) throw InputError("hierarchy contains a cycle or disconnected nodes");

  for (const Node& node : tree.nodes_) {
    if (node.children.empty() && !node.geometry)
      throw InputError("leaf node " + std::to_string(node.id.index) + " ('" + node.name +
                       "') has no geometry");
    if (!node.children.empty() && node.geometry)
      throw InputError("group node " + std::to_string(node.id.index) + " ('" + node.name +
                       "') carries geometry");
    if (node.is_leaf()) ++tree.num_leaves_;
  }
  return tree;
}

void PartHierarchy::check(NodeId id) const {
  if (id.index >= nodes_.size())
    throw InputError("node id " + std::to_string(id.index) + " out of range (tree has " +
                     std::to_string(nodes_.size()) + " nodes)");
}

const Node& PartHierarchy::node(NodeId id) const {
  check(id);
  return nodes_[id.index];
}

std::uint32_t PartHierarchy::depth(NodeId id) const {
  check(id);
  return depth_[id.index];
}

std::vector<NodeId> PartHierarchy::leaves() const {
  std::vector<NodeId> out;
  out.reserve(num_leaves_);
  for (const Node& node : nodes_)
    if (node.is_leaf()) out.push_back(node.id);
  return out;
}

std::vector<NodeId> PartHierarchy::leaf_descendants(NodeId id) const {
  check(id);
  std::vector<NodeId> out;
  std::vector<NodeId> stack{id};
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    const Node& node = nodes_[u.index];
    if (node.is_leaf()) out.push_back(u);
    for (NodeId c : node.children) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool PartHierarchy::is_ancestor_or_self(NodeId ancestor, NodeId id) const {
  check(ancestor);
  check(id);
  while (depth_[id.index] > depth_[ancestor.index]) id = *nodes_[id.index].parent;
  return id == ancestor;
}

std::vector<NodeId> PartHierarchy::path_to_root(NodeId id) const {
  check(id);
  std::vector<NodeId> path{id};
  while (nodes_[id.index].parent) {
    id = *nodes_[id.index].parent;
    path.push_back(id);
  }
  return path;
}

NodeId lca(const PartHierarchy& tree, NodeId a, NodeId b) {
  tree.check(a);
  tree.check(b);
  const auto& nodes = tree.nodes();
  const auto up = [&](NodeId x) { return *nodes[x.index].parent; };
  while (tree.depth(a) > tree.depth(b)) a = up(a);
  while (tree.depth(b) > tree.depth(a)) b = up(b);
  while (a != b) {
    a = up(a);
    b = up(b);
  }
  return a;
}

std::uint32_t tree_distance(const PartHierarchy& tree, NodeId a, NodeId b) {
  const NodeId c = lca(tree, a, b);
  return tree.depth(a) + tree.depth(b) - 2 * tree.depth(c);
}

std::vector<NodeId> parts_at_depth(const PartHierarchy& tree, std::uint32_t d) {
  std::vector<NodeId> out;
  for (const Node& node : tree.nodes()) {
    const std::uint32_t nd = tree.depth(node.id);
    if (nd == d || (nd < d && node.is_leaf())) out.push_back(node.id);
  }
  return out;
}

}  // namespace pen
