#pragma once
// Statistical checks of the triplet samplers against exact oracles.

#include <boost/math/distributions/chi_squared.hpp>
#include <map>

#include "pen/triplets.hpp"
#include "support.hpp"

namespace pen::test {

/// `per_leaf` points per leaf, labelled by the leaf's node index.
inline std::vector<std::int32_t> leaf_labels(const PartHierarchy& t, std::size_t per_leaf) {
  std::vector<std::int32_t> ids;
  for (NodeId l : t.leaves())
    for (std::size_t i = 0; i < per_leaf; ++i) ids.push_back(static_cast<std::int32_t>(l.index));
  return ids;
}

/// L1 distance between the empirical (positive leaf, negative leaf)
/// frequencies of `n` hierarchy-strategy draws and the 1/BFS-distance
/// distribution over unordered leaf pairs.
inline double hierarchy_pair_l1(const PartHierarchy& t, std::size_t n, std::uint64_t seed) {
  using Key = std::pair<std::uint32_t, std::uint32_t>;
  const auto key = [](std::uint32_t a, std::uint32_t b) { return Key{std::min(a, b), std::max(a, b)}; };
  const auto ids = leaf_labels(t, 3);
  const auto adj = adjacency(t);
  std::map<Key, double> exact;
  double z = 0;
  const auto lv = t.leaves();
  for (std::size_t i = 0; i < lv.size(); ++i) {
    const auto dist = bfs_distances(adj, lv[i].index);
    for (std::size_t j = i + 1; j < lv.size(); ++j) {
      exact[key(lv[i].index, lv[j].index)] = 1.0 / dist[lv[j].index];
      z += 1.0 / dist[lv[j].index];
    }
  }
  Rng rng(seed);
  std::map<Key, double> freq;
  for (const auto& tr : sample_hierarchy_triplets(t, ids, n, rng))
    freq[key(static_cast<std::uint32_t>(ids[tr.positive]), static_cast<std::uint32_t>(ids[tr.negative]))] +=
        1.0 / static_cast<double>(n);
  double l1 = 0;
  for (const auto& [k, f] : freq)
    if (!exact.count(k)) l1 += f;  // a pair the oracle does not allow
  for (const auto& [k, w] : exact) l1 += std::abs(w / z - freq[k]);
  return l1;
}

/// p-value of a two-sample chi-square test on the ordered (positive leaf,
/// negative leaf) table of both strategies over a flat tree.
inline double flat_tree_strategy_pvalue(std::size_t leaves, std::size_t n, std::uint64_t seed) {
  const auto t = flat_tree(leaves);
  const auto ids = leaf_labels(t, 5);
  std::map<std::pair<std::int32_t, std::int32_t>, std::array<double, 2>> counts;
  Rng r1(seed), r2(seed + 1);
  for (const auto& tr : sample_hierarchy_triplets(t, ids, n, r1)) counts[{ids[tr.positive], ids[tr.negative]}][0] += 1;
  for (const auto& tr : sample_leaf_triplets(t, ids, n, r2)) counts[{ids[tr.positive], ids[tr.negative]}][1] += 1;
  double chi2 = 0;
  for (auto& [k, c] : counts) {
    const double expected = (c[0] + c[1]) / 2;
    chi2 += (c[0] - expected) * (c[0] - expected) / expected + (c[1] - expected) * (c[1] - expected) / expected;
  }
  const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, chi2));
}

}  // namespace pen::test
