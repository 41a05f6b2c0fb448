#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "pen/error.hpp"
#include "pen/synth.hpp"
#include "support.hpp"

using namespace pen;
namespace fs = std::filesystem;

namespace {

// Semantic labels of the triangles under each leaf.
std::map<std::uint32_t, std::set<std::int32_t>> leaf_labels(const ShapeRecord& r) {
  std::map<std::uint32_t, std::set<std::int32_t>> out;
  for (std::size_t t = 0; t < r.mesh.num_triangles(); ++t)
    out[r.mesh.triangle_leaf[t].index].insert(r.mesh.triangle_label[t]);
  return out;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) {
      std::ifstream in(e.path(), std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      out[fs::relative(e.path(), root).string()] = ss.str();
    }
  return out;
}

}  // namespace

TEST_CASE("identity configuration: leaves are the semantic parts") {
  HierarchyNoise off;
  off.jitter = false;
  off.split = false;
  off.group = false;
  for (const auto& name : archetype_names()) {
    const Archetype& a = archetype(name);
    Rng rng(1);
    const auto parts = a.instantiate(rng, false);
    const ShapeRecord r = generate_shape(a, name + "_0", 0.0, off, rng);
    CHECK(r.hierarchy.num_leaves() == parts.size());
    CHECK(r.hierarchy.height() == 1);
    const auto labels = leaf_labels(r);
    CHECK(labels.size() == parts.size());
    std::multiset<std::int32_t> per_leaf, per_part;
    for (const auto& [leaf, ls] : labels) {
      CHECK(ls.size() == 1);
      per_leaf.insert(*ls.begin());
    }
    for (const auto& c : parts) per_part.insert(c.label);
    CHECK(per_leaf == per_part);
  }
  CHECK_THROWS_AS(archetype("sofa"), ConfigError);
}

TEST_CASE("hierarchies vary and respect the structural bounds") {
  const HierarchyNoise noise;
  for (const auto& name : archetype_names()) {
    Rng rng(2);
    std::set<std::size_t> leaf_counts;
    for (int i = 0; i < 100; ++i) {
      const ShapeRecord r = generate_shape(archetype(name), name + std::to_string(i), 0.5, noise, rng);
      leaf_counts.insert(r.hierarchy.num_leaves());
      CHECK(r.hierarchy.height() >= 1);
      CHECK(r.hierarchy.height() <= 5);
      CHECK(filter_shape(r).keep);
      // leaves never straddle semantic parts
      bool refine = true;
      for (const auto& [leaf, ls] : leaf_labels(r)) refine = refine && ls.size() == 1;
      CHECK(refine);
      CHECK_NOTHROW(r.validate());
    }
    CHECK(leaf_counts.size() >= 2);
  }
}

TEST_CASE("tag coverage tracks p_tag") {
  SynthConfig cfg;
  cfg.seed = 5;
  cfg.categories = {{"chair", 200, 0.1}};
  const auto records = generate_records(cfg);
  std::vector<const ShapeRecord*> ptrs;
  for (const auto& r : records) ptrs.push_back(&r);
  TagExtractionConfig tc;
  tc.synonyms = archetype("chair").synonyms;
  const auto vocab = extract_tags(ptrs, "chair", tc);
  std::vector<std::vector<std::int32_t>> tags;
  Rng rng(6);
  for (const auto& r : records) tags.push_back(make_sample(r, 2000, rng, &vocab).cloud.tag_id);
  const double cov = tag_sufficiency(tags).coverage;
  INFO("coverage " << cov);
  CHECK(cov >= 0.05);
  CHECK(cov <= 0.2);
}

TEST_CASE("corpus generation is byte deterministic") {
  SynthConfig cfg = SynthConfig::defaults();
  for (auto& c : cfg.categories) c.count = 50;
  const fs::path base = fs::temp_directory_path() / "pen_synth_test";
  fs::remove_all(base);
  const auto a = generate_corpus(cfg, (base / "a").string());
  generate_corpus(cfg, (base / "b").string());
  CHECK(a.size() == 150);
  const auto ta = read_tree(base / "a"), tb = read_tree(base / "b");
  CHECK(ta == tb);
  std::size_t shape_files = 0;
  for (const auto& [rel, bytes] : ta) shape_files += rel.rfind("shapes/", 0) == 0;
  CHECK(shape_files == 150);
  CHECK(ta.count("manifest.json") == 1);
  for (const auto& e : a) {
    const auto r = parse_json_shape(ta.at(e.path));
    CHECK(r.shape_id == e.shape_id);
    CHECK(filter_shape(r).keep);
  }
  cfg.seed = 1;
  generate_corpus(cfg, (base / "c").string());
  CHECK(read_tree(base / "c") != ta);
  fs::remove_all(base);

  SynthConfig bad = cfg;
  bad.categories[0].count = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  // a file where the output directory should be
  std::ofstream(fs::temp_directory_path() / "pen_synth_blocker") << "x";
  try {
    generate_corpus(cfg, (fs::temp_directory_path() / "pen_synth_blocker" / "out").string());
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("pen_synth_blocker") != std::string::npos);
  }
  fs::remove(fs::temp_directory_path() / "pen_synth_blocker");
}

TEST_CASE("synth config JSON") {
  const SynthConfig cfg = SynthConfig::defaults();
  nlohmann::json j = cfg;
  const SynthConfig back = j.get<SynthConfig>();
  CHECK(nlohmann::json(back) == j);
}
