#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pen {

/// Dense index of a node inside its owning PartHierarchy.
struct NodeId {
  std::uint32_t index = 0;
  auto operator<=>(const NodeId&) const = default;
};

/// Geometry handle carried by a leaf. The meaning of the id is owned by the
/// record that holds the hierarchy (a triangle range in ShapeRecord).
using GeometryId = std::uint32_t;

struct Node {
  NodeId id;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;
  std::string name;
  std::optional<GeometryId> geometry;  // set exactly for leaves

  bool is_leaf() const { return geometry.has_value(); }
};

/// Flat description of one node used to assemble a hierarchy. Parents may
/// appear after their children; `PartHierarchy::build` sorts it out.
struct NodeSpec {
  std::optional<std::uint32_t> parent;
  std::string name;
  std::optional<GeometryId> geometry;
};

/// Rooted, immutable tree of named group and leaf nodes.
///
/// Leaves carry a geometry reference and have no children; groups have at
/// least one child and no geometry. Children are kept in the order their
/// specs were given.
class PartHierarchy {
 public:
  /// Validates and assembles a tree. Throws InputError when the specs do not
  /// describe exactly one rooted tree satisfying the leaf/group invariants.
  static PartHierarchy build(const std::vector<NodeSpec>& specs);

  std::size_t size() const { return nodes_.size(); }
  NodeId root() const { return root_; }
  const Node& node(NodeId id) const;
  const std::vector<Node>& nodes() const { return nodes_; }

  std::uint32_t depth(NodeId id) const;
  /// Maximum node depth; 0 for a single-node tree.
  std::uint32_t height() const { return height_; }

  /// All leaves, in index order.
  std::vector<NodeId> leaves() const;
  std::size_t num_leaves() const { return num_leaves_; }

  /// Leaves in the subtree rooted at `id` (including `id` if it is a leaf),
  /// in index order.
  std::vector<NodeId> leaf_descendants(NodeId id) const;

  bool is_ancestor_or_self(NodeId ancestor, NodeId node) const;

  /// Path from `id` up to and including the root.
  std::vector<NodeId> path_to_root(NodeId id) const;

  /// Throws InputError if `id` does not belong to this tree.
  void check(NodeId id) const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> depth_;
  NodeId root_;
  std::uint32_t height_ = 0;
  std::size_t num_leaves_ = 0;
};

/// Deepest common ancestor-or-self of `a` and `b`.
NodeId lca(const PartHierarchy& tree, NodeId a, NodeId b);

/// Number of edges on the path between `a` and `b`.
std::uint32_t tree_distance(const PartHierarchy& tree, NodeId a, NodeId b);

inline std::vector<NodeId> leaves(const PartHierarchy& tree) { return tree.leaves(); }

/// Frontier cut at depth `d`: nodes at depth exactly `d` plus leaves shallower
/// than `d`, in index order.
std::vector<NodeId> parts_at_depth(const PartHierarchy& tree, std::uint32_t d);

}  // namespace pen
