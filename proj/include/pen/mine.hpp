#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "pen/dataset.hpp"

namespace pen {

struct MineOptions {
  std::string input_dir;
  std::string out_dir;
  std::string synonyms_dir;  // <dir>/<category>.json; defaults to <input>/synonyms when present
  std::string icp_target;    // optional PLY cloud in the canonical pose
  std::size_t points = kStoredCloudSize;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
};

struct MineSummary {
  std::size_t files = 0;
  std::size_t parsed = 0;
  std::size_t skipped = 0;
  std::size_t kept = 0;
  std::size_t too_few = 0;
  std::size_t too_many = 0;
  std::size_t no_grouping = 0;
  nlohmann::ordered_json json;  // what summary.json holds
};

/// Parses every .dae and .json shape below `input_dir` (sorted by path;
/// manifest files and the synonyms directory are ignored), filters them,
/// samples and optionally ICP-aligns clouds, mines tag vocabularies and
/// splits each category. Files that fail to parse are logged to `log` and
/// skipped. Writes shapes/, clouds/, tags/, split.json and summary.json under
/// `out_dir`. Throws InputError when fewer than 3 shapes parse.
MineSummary mine_corpus(const MineOptions& opts, std::ostream* log = nullptr);

/// A mined dataset read back from disk.
struct MinedDataset {
  DatasetSplit split;
  std::map<std::string, ShapeSample> shapes;  // by shape id
  std::map<std::string, TagVocabulary> vocabularies;
  std::map<std::string, int> num_labels;  // per category, 1 + largest semantic label (0 if unlabelled)

  /// The samples for `ids` restricted to `categories` (all when empty).
  std::vector<ShapeSample> select(const std::vector<std::string>& ids,
                                  const std::set<std::string>& categories = {}) const;
  std::set<std::string> categories() const;
};

MinedDataset load_mined(const std::string& dir);

}  // namespace pen
