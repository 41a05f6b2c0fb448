#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "pen/dataset.hpp"

namespace pen {

/// Axis-aligned box primitive.
struct Box {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half = Eigen::Vector3d::Constant(0.5);
};

/// One instantiated semantic part: its label and the boxes that make it up.
struct Component {
  std::int32_t label = 0;
  std::vector<Box> boxes;
};

struct Archetype {
  std::string category;
  std::vector<std::string> labels;                  // semantic label names, index = label id
  std::vector<std::vector<std::string>> name_pool;  // per label: raw names a designer might use
  std::map<std::string, std::string> synonyms;      // raw -> canonical for the pools above

  /// Instantiates the parts with jittered proportions (or the archetype's
  /// mean proportions when `jitter` is false).
  std::vector<Component> instantiate(Rng& rng, bool jitter) const;
};

/// Built-in archetypes: "chair" (back/seat/leg/armrest), "table" (top/leg),
/// "airplane" (body/wing/tail/engine). Throws ConfigError for other names.
const Archetype& archetype(const std::string& name);
std::vector<std::string> archetype_names();

struct HierarchyNoise {
  bool jitter = true;        // random proportions
  bool split = true;         // split semantic parts into 1..max_split leaves
  int max_split = 4;
  bool group = true;         // 1..max_group_levels levels of intermediate groups
  int max_group_levels = 3;
  double p_wrong_tag = 0.0;  // a tagged leaf takes a name from another part's pool
  bool straddle = false;     // occasionally merge leaves across semantic parts
};

/// Draws one shape; triangles carry semantic labels. Leaf names come from the
/// archetype's name pool with probability `p_tag`, otherwise from a junk pool.
ShapeRecord generate_shape(const Archetype& arch, const std::string& shape_id, double p_tag,
                           const HierarchyNoise& noise, Rng& rng);

struct SynthCategory {
  std::string archetype;
  std::size_t count = 50;
  double p_tag = 0.0;
};

struct SynthConfig {
  std::uint64_t seed = 0;
  std::vector<SynthCategory> categories;
  HierarchyNoise noise;

  static SynthConfig defaults();  // chair (tagged), table, airplane; 50 each
  void validate() const;
};

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

struct CorpusEntry {
  std::string shape_id;
  std::string category;
  std::string path;  // relative to the corpus root
};

/// Writes `shapes/<category>/<id>.json`, `synonyms/<category>.json` and a
/// `manifest.json` listing the config and every file. Byte-identical for
/// identical configs. Throws IoError naming the path on failure.
std::vector<CorpusEntry> generate_corpus(const SynthConfig& cfg, const std::string& out_dir);

/// Generates the same shapes in memory (no files).
std::vector<ShapeRecord> generate_records(const SynthConfig& cfg);

}  // namespace pen
