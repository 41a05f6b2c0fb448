#include "pen/mine.hpp"

#include <algorithm>
#include <filesystem>
#include <ostream>

#include "pen/collada.hpp"
#include "pen/error.hpp"
#include "pen/ply.hpp"
#include "pen/seed.hpp"

namespace pen {

namespace fs = std::filesystem;

namespace {

bool ignored(const fs::path& rel) {
  const std::string name = rel.filename().string();
  if (name == "manifest.json" || name == "run_manifest.json" || name == "summary.json") return true;
  for (const auto& part : rel)
    if (part == "synonyms") return true;
  return false;
}

void mkdirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory '" + p.string() + "': " + ec.message());
}

std::string category_of(const fs::path& rel) {
  return rel.has_parent_path() ? rel.parent_path().filename().string() : std::string("uncategorized");
}

}  // namespace

MineSummary mine_corpus(const MineOptions& opts, std::ostream* log) {
  if (!fs::is_directory(opts.input_dir)) throw InputError("input directory '" + opts.input_dir + "' not found");
  if (opts.points == 0) throw ConfigError("points per cloud must be positive");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(opts.input_dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), opts.input_dir);
    const std::string ext = ascii_lower(rel.extension().string());
    if ((ext == ".dae" || ext == ".json") && !ignored(rel)) files.push_back(rel);
  }
  std::sort(files.begin(), files.end());

  MineSummary sum;
  sum.files = files.size();
  nlohmann::ordered_json skipped = nlohmann::ordered_json::array();
  std::vector<ShapeRecord> records;
  std::set<std::string> ids;
  for (const fs::path& rel : files) {
    const std::string path = (fs::path(opts.input_dir) / rel).string();
    try {
      const std::string bytes = read_file(path);
      ShapeRecord r = ascii_lower(rel.extension().string()) == ".dae"
                          ? parse_collada(bytes, rel.stem().string(), category_of(rel))
                          : parse_json_shape(bytes);
      if (!ids.insert(r.shape_id).second) throw InputError("duplicate shape id '" + r.shape_id + "'");
      records.push_back(std::move(r));
    } catch (const Error& e) {
      skipped.push_back({{"file", rel.generic_string()}, {"error", e.kind()}, {"message", e.what()}});
      if (log) *log << "skip " << rel.generic_string() << ": " << e.kind() << ": " << e.what() << "\n";
    }
  }
  sum.parsed = records.size();
  sum.skipped = skipped.size();
  if (records.size() < 3)
    throw InputError("need at least 3 parseable shapes, found " + std::to_string(records.size()));

  nlohmann::ordered_json discarded = nlohmann::ordered_json::array();
  std::map<std::string, std::vector<const ShapeRecord*>> by_cat;
  for (const ShapeRecord& r : records) {
    const FilterDecision d = filter_shape(r);
    switch (d.reason) {
      case FilterReason::kKept: ++sum.kept; break;
      case FilterReason::kTooFew: ++sum.too_few; break;
      case FilterReason::kTooMany: ++sum.too_many; break;
      case FilterReason::kNoGrouping: ++sum.no_grouping; break;
    }
    if (d.keep)
      by_cat[r.category].push_back(&r);
    else
      discarded.push_back({{"shape_id", r.shape_id}, {"reason", to_string(d.reason)}});
  }

  std::optional<PointCloud> target;
  if (!opts.icp_target.empty()) target = normalize_cloud(parse_cloud_ply(read_file(opts.icp_target)));
  std::string syn_dir = opts.synonyms_dir;
  if (syn_dir.empty() && fs::is_directory(fs::path(opts.input_dir) / "synonyms"))
    syn_dir = (fs::path(opts.input_dir) / "synonyms").string();

  const fs::path out(opts.out_dir);
  mkdirs(out / "tags");
  DatasetSplit all;
  nlohmann::ordered_json cats = nlohmann::ordered_json::array();
  for (const auto& [category, shapes] : by_cat) {
    TagExtractionConfig tcfg;
    if (!syn_dir.empty() && fs::exists(fs::path(syn_dir) / (category + ".json")))
      tcfg.synonyms = parse_synonym_json(read_file((fs::path(syn_dir) / (category + ".json")).string()));
    const TagVocabulary vocab = extract_tags(shapes, category, tcfg);
    write_file_atomic((out / "tags" / (category + ".json")).string(), write_vocabulary_json(vocab));

    mkdirs(out / "shapes" / category);
    mkdirs(out / "clouds" / category);
    std::vector<std::vector<std::int32_t>> tags;
    double icp_residual = 0.0;
    for (const ShapeRecord* r : shapes) {
      Rng rng(derive_seed(opts.seed, {fnv1a64(r->shape_id)}));
      ShapeSample s = make_sample(*r, opts.points, rng, &vocab);
      if (target) {
        const IcpResult icp = icp_align(s.cloud, *target);
        s.cloud.points = icp.transform.apply(s.cloud.points);
        s.cloud = normalize_cloud(s.cloud);
        icp_residual += icp.residual;
      }
      tags.push_back(s.cloud.tag_id);
      save_shape_file(*r, (out / "shapes" / category / (r->shape_id + ".json")).string());
      write_file_atomic((out / "clouds" / category / (r->shape_id + ".ply")).string(), write_cloud_ply(s.cloud));
    }
    const TagSufficiency suff = tag_sufficiency(tags);

    std::vector<std::string> cat_ids;
    for (const ShapeRecord* r : shapes) cat_ids.push_back(r->shape_id);
    DatasetSplit split;
    const bool splittable = cat_ids.size() >= 3;
    if (splittable)
      split = split_dataset(cat_ids, derive_seed(opts.split_seed, {fnv1a64(category)}));
    else
      split.train = cat_ids;
    all.train.insert(all.train.end(), split.train.begin(), split.train.end());
    all.validation.insert(all.validation.end(), split.validation.begin(), split.validation.end());
    all.test.insert(all.test.end(), split.test.begin(), split.test.end());

    nlohmann::ordered_json c;
    c["category"] = category;
    c["kept"] = shapes.size();
    c["tags"] = vocab.tags;
    c["tag_shape_counts"] = vocab.shape_counts;
    c["coverage"] = suff.coverage;
    c["sufficient"] = suff.sufficient;
    c["split"] = {{"train", split.train.size()}, {"validation", split.validation.size()}, {"test", split.test.size()}};
    if (!splittable) c["split_note"] = "fewer than 3 shapes; all assigned to train";
    if (target) c["mean_icp_residual"] = icp_residual / static_cast<double>(shapes.size());
    cats.push_back(std::move(c));
  }
  write_file_atomic((out / "split.json").string(), write_split_json(all));

  auto& j = sum.json;
  j["files"] = sum.files;
  j["parsed"] = sum.parsed;
  j["skipped"] = skipped;
  j["filter"] = {{"kept", sum.kept}, {"too_few", sum.too_few}, {"too_many", sum.too_many},
                 {"no_grouping", sum.no_grouping}};
  j["discarded"] = discarded;
  j["categories"] = cats;
  j["points_per_cloud"] = opts.points;
  write_file_atomic((out / "summary.json").string(), j.dump(2) + "\n");
  return sum;
}

std::vector<ShapeSample> MinedDataset::select(const std::vector<std::string>& ids,
                                              const std::set<std::string>& cats) const {
  std::vector<ShapeSample> out;
  for (const auto& id : ids) {
    auto it = shapes.find(id);
    if (it == shapes.end()) throw InputError("split names unknown shape '" + id + "'");
    if (cats.empty() || cats.count(it->second.category)) out.push_back(it->second);
  }
  return out;
}

std::set<std::string> MinedDataset::categories() const {
  std::set<std::string> out;
  for (const auto& [id, s] : shapes) out.insert(s.category);
  return out;
}

MinedDataset load_mined(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::exists(root / "split.json")) throw InputError("'" + dir + "' is not a mined dataset (no split.json)");
  MinedDataset d;
  d.split = parse_split_json(read_file((root / "split.json").string()));
  if (fs::is_directory(root / "tags"))
    for (const auto& e : fs::directory_iterator(root / "tags")) {
      TagVocabulary v = parse_vocabulary_json(read_file(e.path().string()));
      d.vocabularies[v.category] = std::move(v);
    }
  std::vector<fs::path> shape_files;
  for (const auto& e : fs::recursive_directory_iterator(root / "shapes"))
    if (e.is_regular_file() && e.path().extension() == ".json") shape_files.push_back(e.path());
  std::sort(shape_files.begin(), shape_files.end());
  for (const fs::path& p : shape_files) {
    const ShapeRecord r = load_shape_file(p.string());
    const fs::path ply = root / "clouds" / r.category / (r.shape_id + ".ply");
    ShapeSample s;
    s.shape_id = r.shape_id;
    s.category = r.category;
    s.hierarchy = r.hierarchy;
    s.cloud = parse_cloud_ply(read_file(ply.string()));
    int& labels = d.num_labels[r.category];
    for (std::int32_t l : s.cloud.semantic_label) labels = std::max(labels, l + 1);
    for (std::int32_t l : s.cloud.leaf_id)
      if (l < 0 || static_cast<std::size_t>(l) >= r.hierarchy.size() ||
          !r.hierarchy.node(NodeId{static_cast<std::uint32_t>(l)}).is_leaf())
        throw SchemaError("cloud " + ply.string() + " references a node that is not a leaf");
    d.shapes.emplace(s.shape_id, std::move(s));
  }
  return d;
}

}  // namespace pen
