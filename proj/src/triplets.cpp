#include "pen/triplets.hpp"

#include <algorithm>
#include <map>

#include "pen/error.hpp"

namespace pen {

const char* to_string(SamplingStrategy s) { return s == SamplingStrategy::kLeaf ? "leaf" : "hierarchy"; }

SamplingStrategy parse_strategy(const std::string& name) {
  if (name == "leaf") return SamplingStrategy::kLeaf;
  if (name == "hierarchy") return SamplingStrategy::kHierarchy;
  throw ConfigError("unknown sampling strategy '" + name + "' (expected leaf or hierarchy)");
}

PairDistribution pair_weights(const PartHierarchy& tree, const std::vector<NodeId>& populated_leaves) {
  std::vector<NodeId> leaves = populated_leaves;
  std::sort(leaves.begin(), leaves.end());
  leaves.erase(std::unique(leaves.begin(), leaves.end()), leaves.end());
  if (leaves.size() < 2)
    throw SamplingError("pair distribution needs at least 2 populated leaves, got " +
                        std::to_string(leaves.size()));
  PairDistribution dist;
  dist.entries.reserve(leaves.size() * (leaves.size() - 1) / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < leaves.size(); ++i)
    for (std::size_t j = i + 1; j < leaves.size(); ++j) {
      const std::uint32_t d = tree_distance(tree, leaves[i], leaves[j]);
      const double w = 1.0 / static_cast<double>(d);
      dist.entries.push_back({leaves[i], leaves[j], d, w});
      total += w;
    }
  for (LeafPair& p : dist.entries) p.probability /= total;
  return dist;
}

TripletSampler::TripletSampler(const PartHierarchy& tree, std::span<const std::int32_t> leaf_ids) {
  std::map<std::int32_t, std::vector<std::uint32_t>> by_leaf;
  for (std::size_t i = 0; i < leaf_ids.size(); ++i) {
    const std::int32_t l = leaf_ids[i];
    if (l < 0) continue;
    if (!tree.node(NodeId{static_cast<std::uint32_t>(l)}).is_leaf())
      throw SamplingError("point " + std::to_string(i) + " references non-leaf node " + std::to_string(l));
    by_leaf[l].push_back(static_cast<std::uint32_t>(i));
  }
  for (auto& [leaf, pts] : by_leaf) {
    if (pts.size() >= 2) qualifying_.push_back(populated_.size());
    populated_.push_back(NodeId{static_cast<std::uint32_t>(leaf)});
    members_.push_back(std::move(pts));
  }
  if (populated_.size() < 2)
    throw SamplingError("shape has " + std::to_string(populated_.size()) + " populated leaves; need 2");
  if (qualifying_.empty()) throw SamplingError("no leaf has two points to form a positive pair");

  dist_ = pair_weights(tree, populated_);
  std::map<NodeId, std::size_t> slot;
  for (std::size_t i = 0; i < populated_.size(); ++i) slot[populated_[i]] = i;
  double acc = 0.0;
  for (const LeafPair& p : dist_.entries) {
    const std::size_t a = slot[p.first], b = slot[p.second];
    if (members_[a].size() < 2 && members_[b].size() < 2) continue;
    acc += p.probability;
    pair_slots_.emplace_back(a, b);
    pair_cdf_.push_back(acc);
  }
}

Triplet TripletSampler::draw(std::size_t pos_leaf, std::size_t neg_leaf, Rng& rng) const {
  const auto& pos = members_[pos_leaf];
  const auto& neg = members_[neg_leaf];
  std::uniform_int_distribution<std::size_t> pick_a(0, pos.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_b(0, pos.size() - 2);
  std::uniform_int_distribution<std::size_t> pick_c(0, neg.size() - 1);
  const std::size_t a = pick_a(rng);
  std::size_t b = pick_b(rng);
  if (b >= a) ++b;
  return {pos[a], pos[b], neg[pick_c(rng)]};
}

std::vector<Triplet> TripletSampler::sample(SamplingStrategy strategy, std::size_t k, Rng& rng) const {
  std::vector<Triplet> out;
  out.reserve(k);
  if (strategy == SamplingStrategy::kLeaf) {
    std::uniform_int_distribution<std::size_t> pick_pos(0, qualifying_.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_neg(0, populated_.size() - 2);
    for (std::size_t t = 0; t < k; ++t) {
      const std::size_t p = qualifying_[pick_pos(rng)];
      std::size_t n = pick_neg(rng);
      if (n >= p) ++n;
      out.push_back(draw(p, n, rng));
    }
    return out;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const double total = pair_cdf_.back();
  for (std::size_t t = 0; t < k; ++t) {
    const double r = unit(rng) * total;
    const std::size_t idx = std::min<std::size_t>(
        std::upper_bound(pair_cdf_.begin(), pair_cdf_.end(), r) - pair_cdf_.begin(), pair_cdf_.size() - 1);
    auto [a, b] = pair_slots_[idx];
    const bool a_ok = members_[a].size() >= 2, b_ok = members_[b].size() >= 2;
    const bool swap = a_ok && b_ok ? coin(rng) : !a_ok;
    if (swap) std::swap(a, b);
    out.push_back(draw(a, b, rng));
  }
  return out;
}

std::vector<Triplet> sample_hierarchy_triplets(const PartHierarchy& tree, std::span<const std::int32_t> leaf_ids,
                                               std::size_t k, Rng& rng) {
  return TripletSampler(tree, leaf_ids).sample(SamplingStrategy::kHierarchy, k, rng);
}

std::vector<Triplet> sample_leaf_triplets(const PartHierarchy& tree, std::span<const std::int32_t> leaf_ids,
                                          std::size_t k, Rng& rng) {
  return TripletSampler(tree, leaf_ids).sample(SamplingStrategy::kLeaf, k, rng);
}

std::string triplets_to_csv(const std::string& shape_id, const std::vector<Triplet>& triplets) {
  std::string out = "shape_id,anchor,positive,negative\n";
  for (const Triplet& t : triplets)
    out += shape_id + ',' + std::to_string(t.anchor) + ',' + std::to_string(t.positive) + ',' +
           std::to_string(t.negative) + '\n';
  return out;
}

}  // namespace pen
