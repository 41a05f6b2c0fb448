#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pen/geometry.hpp"
#include "pen/hierarchy.hpp"

namespace pen {

/// A mined or generated shape: mesh, part hierarchy and per-triangle leaf
/// assignment (inside the mesh). Per-point tag and semantic labels live on the
/// sampled PointCloud.
struct ShapeRecord {
  std::string shape_id;
  std::string category;
  TriangleMesh mesh;
  PartHierarchy hierarchy;

  /// Every leaf owns at least one triangle and every triangle belongs to a
  /// leaf. Throws InputError otherwise.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Native JSON shape format

/// Parses the native shape JSON. Throws SchemaError on any violation.
ShapeRecord parse_json_shape(std::string_view bytes);
/// Canonical serialisation: triangles grouped by leaf in node order, compact
/// JSON, trailing newline.
std::string write_json_shape(const ShapeRecord& record);

ShapeRecord load_shape_file(const std::string& path);
void save_shape_file(const ShapeRecord& record, const std::string& path);

// ---------------------------------------------------------------------------
// Part-count filter

inline constexpr std::size_t kMinLeaves = 2;
inline constexpr std::size_t kMaxLeaves = 500;

enum class FilterReason { kKept, kTooFew, kTooMany, kNoGrouping };
const char* to_string(FilterReason reason);

struct FilterDecision {
  bool keep = false;
  FilterReason reason = FilterReason::kKept;
};

FilterDecision filter_shape(std::size_t num_leaves, std::uint32_t height);
inline FilterDecision filter_shape(const ShapeRecord& record) {
  return filter_shape(record.hierarchy.num_leaves(), record.hierarchy.height());
}

// ---------------------------------------------------------------------------
// Tags

struct TagExtractionConfig {
  std::map<std::string, std::string> synonyms;  // raw (lowercase) -> canonical
  std::vector<std::string> stop_patterns = default_stop_patterns();
  std::size_t max_tags = 10;
  std::size_t min_token_length = 3;

  static std::vector<std::string> default_stop_patterns();
};

struct TagVocabulary {
  std::string category;
  std::vector<std::string> tags;                 // canonical, most frequent first
  std::map<std::string, std::string> synonym_map;
  std::vector<std::size_t> shape_counts;         // document frequency per tag

  /// Index of the first tag the (raw) node name matches, if any.
  std::optional<std::int32_t> match(std::string_view name) const;
};

std::string ascii_lower(std::string_view s);

/// Document-frequency top-k of canonical name tokens over one category.
TagVocabulary extract_tags(const std::vector<const ShapeRecord*>& corpus, const std::string& category,
                           const TagExtractionConfig& cfg);

/// Tag per point: the tag of the deepest node on the point's leaf-to-root path
/// whose name matches a vocabulary entry, or kNone.
std::vector<std::int32_t> label_points_with_tags(const PointCloud& cloud, const ShapeRecord& record,
                                                 const TagVocabulary& vocab);

inline constexpr double kTagSufficiencyThreshold = 0.01;

struct TagSufficiency {
  bool sufficient = false;
  double coverage = 0.0;  // mean tagged-point fraction over shapes
};
TagSufficiency tag_sufficiency(const std::vector<std::vector<std::int32_t>>& per_shape_tags);
TagSufficiency tag_sufficiency_from_coverage(double coverage);

// ---------------------------------------------------------------------------
// Splits

struct DatasetSplit {
  std::vector<std::string> train, validation, test;
};

/// Seeded shuffle then 75/15/10 with validation and test rounded to nearest;
/// the remainder goes to train. Each part is nonempty.
DatasetSplit split_dataset(std::vector<std::string> shape_ids, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Sampled shapes (the unit the trainer consumes)

struct ShapeSample {
  std::string shape_id;
  std::string category;
  PartHierarchy hierarchy;
  PointCloud cloud;  // normalised; leaf ids always set, tags/labels may be kNone
};

/// Samples `n` surface points, normalises them and tags them with `vocab`
/// when given.
ShapeSample make_sample(const ShapeRecord& record, std::size_t n, Rng& rng, const TagVocabulary* vocab = nullptr);

std::string write_vocabulary_json(const TagVocabulary& vocab);
TagVocabulary parse_vocabulary_json(std::string_view bytes);
std::string write_split_json(const DatasetSplit& split);
DatasetSplit parse_split_json(std::string_view bytes);
std::map<std::string, std::string> parse_synonym_json(std::string_view bytes);

std::string read_file(const std::string& path);
/// Writes via a temporary sibling and rename.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace pen
