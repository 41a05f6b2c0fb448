#pragma once
// Shared helpers and independent oracles for the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "pen/dataset.hpp"
#include "pen/hierarchy.hpp"
#include "pen/network.hpp"

#ifndef PEN_FIXTURES
#define PEN_FIXTURES "tests/fixtures"
#endif

namespace pen::test {

inline std::string fixture(const std::string& rel) { return std::string(PEN_FIXTURES) + "/" + rel; }

/// Random rooted tree on `nodes` nodes: node i > 0 hangs below a uniformly
/// chosen earlier node; nodes without children become leaves.
inline PartHierarchy random_tree(std::size_t nodes, std::mt19937_64& rng) {
  std::vector<int> parent(nodes, -1);
  std::vector<int> kids(nodes, 0);
  for (std::size_t i = 1; i < nodes; ++i) {
    parent[i] = std::uniform_int_distribution<int>(0, static_cast<int>(i) - 1)(rng);
    ++kids[parent[i]];
  }
  std::vector<NodeSpec> specs(nodes);
  GeometryId g = 0;
  for (std::size_t i = 0; i < nodes; ++i) {
    if (parent[i] >= 0) specs[i].parent = static_cast<std::uint32_t>(parent[i]);
    specs[i].name = "n" + std::to_string(i);
    if (kids[i] == 0) specs[i].geometry = g++;
  }
  return PartHierarchy::build(specs);
}

/// Root with `n` leaf children.
inline PartHierarchy flat_tree(std::size_t n) {
  std::vector<NodeSpec> specs(n + 1);
  specs[0].name = "root";
  for (std::size_t i = 1; i <= n; ++i) {
    specs[i].parent = 0;
    specs[i].name = "leaf" + std::to_string(i);
    specs[i].geometry = static_cast<GeometryId>(i - 1);
  }
  return PartHierarchy::build(specs);
}

/// Undirected adjacency from parent links.
inline std::vector<std::vector<std::uint32_t>> adjacency(const PartHierarchy& t) {
  std::vector<std::vector<std::uint32_t>> adj(t.size());
  for (const Node& n : t.nodes())
    if (n.parent) {
      adj[n.id.index].push_back(n.parent->index);
      adj[n.parent->index].push_back(n.id.index);
    }
  return adj;
}

/// Hop counts from `src` by breadth-first search.
inline std::vector<std::uint32_t> bfs_distances(const std::vector<std::vector<std::uint32_t>>& adj,
                                                std::uint32_t src) {
  std::vector<std::uint32_t> dist(adj.size(), UINT32_MAX);
  std::deque<std::uint32_t> q{src};
  dist[src] = 0;
  while (!q.empty()) {
    const std::uint32_t u = q.front();
    q.pop_front();
    for (std::uint32_t v : adj[u])
      if (dist[v] == UINT32_MAX) {
        dist[v] = dist[u] + 1;
        q.push_back(v);
      }
  }
  return dist;
}

/// Lowest common ancestor by marking all ancestors of `a`, then climbing from `b`.
inline std::uint32_t naive_lca(const PartHierarchy& t, std::uint32_t a, std::uint32_t b) {
  std::vector<bool> mark(t.size(), false);
  for (std::optional<NodeId> x = NodeId{a}; x; x = t.node(*x).parent) mark[x->index] = true;
  for (std::optional<NodeId> x = NodeId{b}; x; x = t.node(*x).parent)
    if (mark[x->index]) return x->index;
  return UINT32_MAX;
}

/// Small widths so finite differences stay cheap; every layer type is present.
inline ArchConfig tiny_arch() {
  ArchConfig a;
  a.point_widths = {6, 5};
  a.lift_widths = {7, 9};
  a.decoder_widths = {8, 4};
  a.head_hidden = 5;
  a.ae_hidden = {6};
  return a;
}

/// Small enough to train in seconds, large enough to overfit a few shapes.
inline ArchConfig small_arch() {
  ArchConfig a;
  a.point_widths = {32, 32};
  a.lift_widths = {64, 128};
  a.decoder_widths = {64, 32};
  a.head_hidden = 32;
  a.ae_hidden = {64};
  return a;
}

/// Flattened copy of every parameter.
template <typename T>
std::vector<T> flatten(const PenParams<T>& p) {
  std::vector<T> out;
  for (const auto& t : tensors(p)) out.insert(out.end(), t.tensor->data(), t.tensor->data() + t.tensor->size());
  return out;
}

struct GradCheck {
  double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  std::size_t checked = 0;
  std::size_t excluded = 0;  // coordinates near a kink or tie
};

/// Central differences over `coords` coordinates of `x`, compared against
/// `analytic`. A coordinate whose estimates at h and h/2 disagree by more
/// than 1e-2 of their size (or 1e-7 absolute) straddles a kink and is skipped.
inline GradCheck finite_difference_check(std::vector<double*> coords, const std::vector<double>& analytic,
                                         const std::function<double()>& loss, double h = 1e-5) {
  GradCheck r;
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    double* x = coords[i];
    const double x0 = *x;
    const auto central = [&](double step) {
      *x = x0 + step;
      const double up = loss();
      *x = x0 - step;
      const double down = loss();
      *x = x0;
      return (up - down) / (2 * step);
    };
    const double g1 = central(h), g2 = central(h / 2);
    if (std::abs(g1 - g2) > std::max(1e-2 * std::max(std::abs(g1), std::abs(g2)), 1e-7)) {
      ++r.excluded;
      continue;
    }
    diff += (g1 - analytic[i]) * (g1 - analytic[i]);
    na += analytic[i] * analytic[i];
    nn += g1 * g1;
    ++r.checked;
  }
  const double denom = std::sqrt(std::max(na, nn));
  r.rel_error = denom > 0 ? std::sqrt(diff) / denom : 0.0;
  return r;
}

/// Collects `per_tensor` random coordinates from every tensor of `p` and the
/// matching entries of `g`.
inline void sample_coords(PenParams<double>& p, const PenParams<double>& g, std::size_t per_tensor,
                          std::mt19937_64& rng, std::vector<double*>& coords, std::vector<double>& analytic) {
  auto pt = tensors(p);
  auto gt = tensors(g);
  for (std::size_t t = 0; t < pt.size(); ++t) {
    const auto n = pt[t].tensor->size();
    if (n == 0) continue;
    for (std::size_t k = 0; k < per_tensor; ++k) {
      const auto i = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
      coords.push_back(pt[t].tensor->data() + i);
      analytic.push_back(gt[t].tensor->data()[i]);
    }
  }
}

}  // namespace pen::test
