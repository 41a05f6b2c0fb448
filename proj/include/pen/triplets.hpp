#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pen/geometry.hpp"
#include "pen/hierarchy.hpp"

namespace pen {

/// Point indices into one shape's cloud: anchor and positive share a leaf,
/// the negative comes from a different leaf.
struct Triplet {
  std::uint32_t anchor = 0;
  std::uint32_t positive = 0;
  std::uint32_t negative = 0;
  bool operator==(const Triplet&) const = default;
};

struct LeafPair {
  NodeId first, second;  // first < second
  std::uint32_t distance = 0;
  double probability = 0.0;
};

/// Exact distribution over unordered pairs of distinct leaves with
/// probability proportional to 1 / tree_distance.
struct PairDistribution {
  std::vector<LeafPair> entries;
};

/// Throws SamplingError with fewer than two leaves.
PairDistribution pair_weights(const PartHierarchy& tree, const std::vector<NodeId>& populated_leaves);

enum class SamplingStrategy { kLeaf, kHierarchy };
const char* to_string(SamplingStrategy s);
SamplingStrategy parse_strategy(const std::string& name);

inline constexpr std::size_t kDefaultTripletsPerShape = 512;

/// Per-shape sampling state: points grouped by leaf plus the inverse-CDF table
/// of the pair distribution. Leaves with a single point act only as negative
/// sources.
class TripletSampler {
 public:
  /// `leaf_ids` holds the leaf NodeId index of every point of the cloud.
  TripletSampler(const PartHierarchy& tree, std::span<const std::int32_t> leaf_ids);

  std::vector<Triplet> sample(SamplingStrategy strategy, std::size_t k, Rng& rng) const;
  const PairDistribution& distribution() const { return dist_; }
  const std::vector<NodeId>& populated_leaves() const { return populated_; }

 private:
  Triplet draw(std::size_t pos_leaf, std::size_t neg_leaf, Rng& rng) const;

  std::vector<NodeId> populated_;                     // leaves with >= 1 point
  std::vector<std::vector<std::uint32_t>> members_;   // parallel to populated_
  std::vector<std::size_t> qualifying_;               // indices into populated_ with >= 2 points
  PairDistribution dist_;
  std::vector<std::pair<std::size_t, std::size_t>> pair_slots_;  // populated_ indices per usable pair
  std::vector<double> pair_cdf_;
};

std::vector<Triplet> sample_hierarchy_triplets(const PartHierarchy& tree,
                                               std::span<const std::int32_t> leaf_ids,
                                               std::size_t k, Rng& rng);
std::vector<Triplet> sample_leaf_triplets(const PartHierarchy& tree,
                                          std::span<const std::int32_t> leaf_ids, std::size_t k,
                                          Rng& rng);

/// `shape_id,anchor,positive,negative` rows with a header line.
std::string triplets_to_csv(const std::string& shape_id, const std::vector<Triplet>& triplets);

}  // namespace pen
