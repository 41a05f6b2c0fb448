#include "pen/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include "json.hpp"
#include <numeric>
#include <set>
#include <sstream>

#include "pen/error.hpp"

namespace pen {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

void ShapeRecord::validate() const {
  mesh.validate();
  std::vector<std::size_t> owned(hierarchy.size(), 0);
  for (NodeId leaf : mesh.triangle_leaf) {
    if (leaf.index >= hierarchy.size() || !hierarchy.node(leaf).is_leaf())
      throw InputError("shape '" + shape_id + "': triangle assigned to non-leaf node " +
                       std::to_string(leaf.index));
    ++owned[leaf.index];
  }
  for (NodeId leaf : hierarchy.leaves())
    if (owned[leaf.index] == 0)
      throw InputError("shape '" + shape_id + "': leaf " + std::to_string(leaf.index) + " ('" +
                       hierarchy.node(leaf).name + "') owns no triangles");
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void schema_fail(const std::string& what) { throw SchemaError("shape json: " + what); }

const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_fail(std::string("missing field '") + key + "'");
  return *it;
}

std::uint32_t as_index(const json& v, const std::string& what) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0 ||
      v.get<std::int64_t>() > std::numeric_limits<std::uint32_t>::max())
    schema_fail(what + " must be a non-negative integer");
  return v.get<std::uint32_t>();
}

}  // namespace

ShapeRecord parse_json_shape(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("shape json: ") + e.what());
  }
  if (!doc.is_object()) schema_fail("document is not an object");

  ShapeRecord rec;
  const json& sid = require(doc, "shape_id");
  const json& cat = require(doc, "category");
  if (!sid.is_string() || !cat.is_string()) schema_fail("shape_id and category must be strings");
  rec.shape_id = sid.get<std::string>();
  rec.category = cat.get<std::string>();

  const json& verts = require(doc, "vertices");
  if (!verts.is_array()) schema_fail("vertices must be an array");
  rec.mesh.vertices.reserve(verts.size());
  for (const json& v : verts) {
    if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number())
      schema_fail("each vertex must be [x,y,z]");
    rec.mesh.vertices.emplace_back(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
  }
  const json& tris = require(doc, "triangles");
  if (!tris.is_array()) schema_fail("triangles must be an array");
  for (const json& t : tris) {
    if (!t.is_array() || t.size() != 3) schema_fail("each triangle must be [i,j,k]");
    std::array<std::uint32_t, 3> idx{};
    for (int k = 0; k < 3; ++k) {
      idx[k] = as_index(t[k], "triangle index");
      if (idx[k] >= rec.mesh.vertices.size()) schema_fail("triangle index out of range");
    }
    rec.mesh.triangles.push_back(idx);
  }

  const json& nodes = require(doc, "nodes");
  if (!nodes.is_array() || nodes.empty()) schema_fail("nodes must be a nonempty array");
  const std::size_t n = nodes.size();
  std::vector<NodeSpec> specs(n);
  std::vector<bool> defined(n, false);
  std::vector<std::optional<std::vector<std::uint32_t>>> declared_children(n);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> ranges(n, {0, 0});
  const std::uint32_t unassigned = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> tri_owner(rec.mesh.triangles.size(), unassigned);

  for (const json& node : nodes) {
    if (!node.is_object()) schema_fail("each node must be an object");
    const std::uint32_t id = as_index(require(node, "id"), "node id");
    if (id >= n) schema_fail("node id " + std::to_string(id) + " not dense in 0.." + std::to_string(n - 1));
    if (defined[id]) schema_fail("duplicate node id " + std::to_string(id));
    defined[id] = true;
    NodeSpec& spec = specs[id];
    const json& parent = require(node, "parent");
    if (!parent.is_null()) spec.parent = as_index(parent, "node parent");
    const json& name = require(node, "name");
    if (!name.is_string()) schema_fail("node name must be a string");
    spec.name = name.get<std::string>();
    const json& kind = require(node, "kind");
    if (kind == "leaf") {
      const json& range = require(node, "tri_range");
      if (!range.is_array() || range.size() != 2) schema_fail("tri_range must be [begin,end)");
      const std::uint32_t b = as_index(range[0], "tri_range");
      const std::uint32_t e = as_index(range[1], "tri_range");
      if (b >= e || e > rec.mesh.triangles.size())
        schema_fail("node " + std::to_string(id) + " has empty or out-of-range tri_range");
      ranges[id] = {b, e};
      for (std::uint32_t t = b; t < e; ++t) {
        if (tri_owner[t] != unassigned) schema_fail("triangle " + std::to_string(t) + " owned by two leaves");
        tri_owner[t] = id;
      }
    } else if (kind == "group") {
      const json& children = require(node, "children");
      if (!children.is_array() || children.empty()) schema_fail("group node needs nonempty children");
      std::vector<std::uint32_t> c;
      for (const json& ch : children) c.push_back(as_index(ch, "child id"));
      declared_children[id] = std::move(c);
    } else {
      schema_fail("node kind must be 'leaf' or 'group'");
    }
  }
  for (std::uint32_t t = 0; t < tri_owner.size(); ++t)
    if (tri_owner[t] == unassigned) schema_fail("triangle " + std::to_string(t) + " belongs to no leaf");

  // Leaves get geometry ids in tri_range order.
  std::vector<std::uint32_t> leaf_order;
  for (std::uint32_t i = 0; i < n; ++i)
    if (!declared_children[i]) leaf_order.push_back(i);
  std::sort(leaf_order.begin(), leaf_order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return ranges[a].first < ranges[b].first; });
  for (std::uint32_t g = 0; g < leaf_order.size(); ++g) specs[leaf_order[g]].geometry = g;

  try {
    rec.hierarchy = PartHierarchy::build(specs);
  } catch (const InputError& e) {
    schema_fail(e.what());
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!declared_children[i]) continue;
    std::vector<std::uint32_t> actual;
    for (NodeId c : rec.hierarchy.node(NodeId{i}).children) actual.push_back(c.index);
    std::vector<std::uint32_t> declared = *declared_children[i];
    std::sort(actual.begin(), actual.end());
    std::sort(declared.begin(), declared.end());
    if (actual != declared) schema_fail("children of node " + std::to_string(i) + " disagree with parent links");
  }
  rec.mesh.triangle_leaf.resize(tri_owner.size());
  for (std::size_t t = 0; t < tri_owner.size(); ++t) rec.mesh.triangle_leaf[t] = NodeId{tri_owner[t]};

  if (auto it = doc.find("semantic_labels"); it != doc.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != rec.mesh.triangles.size())
      schema_fail("semantic_labels must hold one integer per triangle");
    for (const json& l : *it) {
      if (!l.is_number_integer()) schema_fail("semantic label must be an integer");
      rec.mesh.triangle_label.push_back(l.get<std::int32_t>());
    }
  }
  return rec;
}

std::string write_json_shape(const ShapeRecord& record) {
  record.validate();
  const PartHierarchy& tree = record.hierarchy;
  std::vector<std::vector<std::uint32_t>> by_leaf(tree.size());
  for (std::uint32_t t = 0; t < record.mesh.triangle_leaf.size(); ++t)
    by_leaf[record.mesh.triangle_leaf[t].index].push_back(t);

  ojson doc;
  doc["shape_id"] = record.shape_id;
  doc["category"] = record.category;
  ojson verts = ojson::array();
  for (const auto& v : record.mesh.vertices) verts.push_back({v.x(), v.y(), v.z()});
  doc["vertices"] = std::move(verts);

  ojson tris = ojson::array();
  ojson labels = ojson::array();
  ojson nodes = ojson::array();
  std::uint32_t cursor = 0;
  for (const Node& node : tree.nodes()) {
    ojson j;
    j["id"] = node.id.index;
    j["parent"] = node.parent ? ojson(node.parent->index) : ojson(nullptr);
    j["name"] = node.name;
    if (node.is_leaf()) {
      j["kind"] = "leaf";
      const std::uint32_t begin = cursor;
      for (std::uint32_t t : by_leaf[node.id.index]) {
        const auto& tri = record.mesh.triangles[t];
        tris.push_back({tri[0], tri[1], tri[2]});
        if (!record.mesh.triangle_label.empty()) labels.push_back(record.mesh.triangle_label[t]);
        ++cursor;
      }
      j["tri_range"] = {begin, cursor};
    } else {
      j["kind"] = "group";
      ojson children = ojson::array();
      for (NodeId c : node.children) children.push_back(c.index);
      j["children"] = std::move(children);
    }
    nodes.push_back(std::move(j));
  }
  doc["triangles"] = std::move(tris);
  doc["nodes"] = std::move(nodes);
  if (!record.mesh.triangle_label.empty()) doc["semantic_labels"] = std::move(labels);
  return doc.dump() + "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

ShapeSample make_sample(const ShapeRecord& record, std::size_t n, Rng& rng, const TagVocabulary* vocab) {
  ShapeSample s;
  s.shape_id = record.shape_id;
  s.category = record.category;
  s.hierarchy = record.hierarchy;
  s.cloud = normalize_cloud(sample_surface(record.mesh, n, rng));
  if (vocab) s.cloud.tag_id = label_points_with_tags(s.cloud, record, *vocab);
  return s;
}

ShapeRecord load_shape_file(const std::string& path) { return parse_json_shape(read_file(path)); }

void save_shape_file(const ShapeRecord& record, const std::string& path) {
  write_file_atomic(path, write_json_shape(record));
}

// ---------------------------------------------------------------------------

const char* to_string(FilterReason reason) {
  switch (reason) {
    case FilterReason::kKept: return "kept";
    case FilterReason::kTooFew: return "too-few";
    case FilterReason::kTooMany: return "too-many";
    case FilterReason::kNoGrouping: return "no-grouping";
  }
  return "?";
}

FilterDecision filter_shape(std::size_t num_leaves, std::uint32_t height) {
  if (num_leaves < kMinLeaves) return {false, FilterReason::kTooFew};
  if (num_leaves > kMaxLeaves) return {false, FilterReason::kTooMany};
  if (height < 1) return {false, FilterReason::kNoGrouping};
  return {true, FilterReason::kKept};
}

// ---------------------------------------------------------------------------

std::vector<std::string> TagExtractionConfig::default_stop_patterns() {
  return {"mesh",     "geometry", "group",  "node",  "object", "default", "component",
          "instance", "polygon",  "model",  "shape", "untitled", "scene", "root",
          "part",     "layer",    "material", "copy", "face",  "skp"};
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

namespace {

std::vector<std::string> alpha_tokens(std::string_view name, std::size_t min_len) {
  std::vector<std::string> out;
  const std::string lower = ascii_lower(name);
  std::size_t i = 0;
  while (i < lower.size()) {
    while (i < lower.size() && !std::isalpha(static_cast<unsigned char>(lower[i]))) ++i;
    std::size_t j = i;
    while (j < lower.size() && std::isalpha(static_cast<unsigned char>(lower[j]))) ++j;
    if (j - i >= min_len) out.push_back(lower.substr(i, j - i));
    i = j;
  }
  return out;
}

bool name_matches(const std::string& lower_name, const std::string& tag,
                  const std::map<std::string, std::string>& synonyms) {
  if (lower_name.find(tag) != std::string::npos) return true;
  for (const auto& [raw, canonical] : synonyms)
    if (canonical == tag && lower_name.find(raw) != std::string::npos) return true;
  return false;
}

}  // namespace

std::optional<std::int32_t> TagVocabulary::match(std::string_view name) const {
  const std::string lower = ascii_lower(name);
  for (std::size_t t = 0; t < tags.size(); ++t)
    if (name_matches(lower, tags[t], synonym_map)) return static_cast<std::int32_t>(t);
  return std::nullopt;
}

TagVocabulary extract_tags(const std::vector<const ShapeRecord*>& corpus, const std::string& category,
                           const TagExtractionConfig& cfg) {
  if (corpus.empty()) throw InputError("tag extraction needs a nonempty corpus");
  std::map<std::string, std::string> synonyms;
  for (const auto& [raw, canonical] : cfg.synonyms) synonyms[ascii_lower(raw)] = ascii_lower(canonical);

  const auto stopped = [&](const std::string& token) {
    return std::any_of(cfg.stop_patterns.begin(), cfg.stop_patterns.end(),
                       [&](const std::string& p) { return token.find(ascii_lower(p)) != std::string::npos; });
  };

  // Candidates: canonicalised alphabetic tokens of all node names.
  std::set<std::string> candidates;
  std::vector<std::vector<std::string>> lower_names(corpus.size());
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    if (corpus[s]->category != category)
      throw InputError("shape '" + corpus[s]->shape_id + "' is not in category '" + category + "'");
    for (const Node& node : corpus[s]->hierarchy.nodes()) {
      lower_names[s].push_back(ascii_lower(node.name));
      for (std::string token : alpha_tokens(node.name, cfg.min_token_length)) {
        if (auto it = synonyms.find(token); it != synonyms.end()) token = it->second;
        if (!stopped(token)) candidates.insert(token);
      }
    }
  }

  std::vector<std::pair<std::string, std::size_t>> counted;
  for (const std::string& tag : candidates) {
    std::size_t count = 0;
    for (const auto& names : lower_names)
      if (std::any_of(names.begin(), names.end(),
                      [&](const std::string& nm) { return name_matches(nm, tag, synonyms); }))
        ++count;
    counted.emplace_back(tag, count);
  }
  std::sort(counted.begin(), counted.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  TagVocabulary vocab;
  vocab.category = category;
  for (std::size_t i = 0; i < counted.size() && i < cfg.max_tags; ++i) {
    vocab.tags.push_back(counted[i].first);
    vocab.shape_counts.push_back(counted[i].second);
  }
  for (const auto& [raw, canonical] : synonyms)
    if (std::find(vocab.tags.begin(), vocab.tags.end(), canonical) != vocab.tags.end())
      vocab.synonym_map[raw] = canonical;
  return vocab;
}

std::vector<std::int32_t> label_points_with_tags(const PointCloud& cloud, const ShapeRecord& record,
                                                 const TagVocabulary& vocab) {
  const PartHierarchy& tree = record.hierarchy;
  std::vector<std::int32_t> node_tag(tree.size(), kNone);
  for (const Node& node : tree.nodes())
    if (auto t = vocab.match(node.name)) node_tag[node.id.index] = *t;

  // Per leaf: walk upward, the first match is the deepest.
  std::vector<std::int32_t> leaf_tag(tree.size(), kNone);
  for (NodeId leaf : tree.leaves())
    for (NodeId n : tree.path_to_root(leaf))
      if (node_tag[n.index] != kNone) {
        leaf_tag[leaf.index] = node_tag[n.index];
        break;
      }

  std::vector<std::int32_t> out(cloud.size(), kNone);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::int32_t leaf = cloud.leaf_id[i];
    if (leaf >= 0 && static_cast<std::size_t>(leaf) < tree.size()) out[i] = leaf_tag[leaf];
  }
  return out;
}

TagSufficiency tag_sufficiency_from_coverage(double coverage) {
  return {coverage > kTagSufficiencyThreshold, coverage};
}

TagSufficiency tag_sufficiency(const std::vector<std::vector<std::int32_t>>& per_shape_tags) {
  double sum = 0.0;
  std::size_t shapes = 0;
  for (const auto& tags : per_shape_tags) {
    if (tags.empty()) continue;
    const auto tagged = std::count_if(tags.begin(), tags.end(), [](std::int32_t t) { return t != kNone; });
    sum += static_cast<double>(tagged) / static_cast<double>(tags.size());
    ++shapes;
  }
  return tag_sufficiency_from_coverage(shapes ? sum / static_cast<double>(shapes) : 0.0);
}

// ---------------------------------------------------------------------------

DatasetSplit split_dataset(std::vector<std::string> shape_ids, std::uint64_t seed) {
  const std::size_t n = shape_ids.size();
  if (n < 3) throw InputError("splitting needs at least 3 shapes, got " + std::to_string(n));
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(shape_ids[i], shape_ids[pick(rng)]);
  }
  const auto nearest = [&](double frac) {
    return static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
  };
  std::size_t n_val = std::max<std::size_t>(1, nearest(0.15));
  std::size_t n_test = std::max<std::size_t>(1, nearest(0.10));
  while (n_val + n_test > n - 1) (n_val > n_test ? n_val : n_test) -= 1;

  DatasetSplit split;
  const std::size_t n_train = n - n_val - n_test;
  split.train.assign(shape_ids.begin(), shape_ids.begin() + n_train);
  split.validation.assign(shape_ids.begin() + n_train, shape_ids.begin() + n_train + n_val);
  split.test.assign(shape_ids.begin() + n_train + n_val, shape_ids.end());
  return split;
}

std::string write_vocabulary_json(const TagVocabulary& vocab) {
  ojson doc;
  doc["category"] = vocab.category;
  doc["tags"] = vocab.tags;
  doc["shape_counts"] = vocab.shape_counts;
  ojson syn = ojson::object();
  for (const auto& [raw, canonical] : vocab.synonym_map) syn[raw] = canonical;
  doc["synonym_map"] = std::move(syn);
  return doc.dump(2) + "\n";
}

TagVocabulary parse_vocabulary_json(std::string_view bytes) {
  try {
    const json doc = json::parse(bytes);
    TagVocabulary v;
    v.category = doc.at("category").get<std::string>();
    v.tags = doc.at("tags").get<std::vector<std::string>>();
    if (doc.contains("shape_counts")) v.shape_counts = doc["shape_counts"].get<std::vector<std::size_t>>();
    if (doc.contains("synonym_map"))
      v.synonym_map = doc["synonym_map"].get<std::map<std::string, std::string>>();
    std::set<std::string> distinct(v.tags.begin(), v.tags.end());
    if (distinct.size() != v.tags.size()) throw SchemaError("vocabulary tags are not distinct");
    for (const auto& [raw, canonical] : v.synonym_map)
      if (!distinct.count(canonical)) throw SchemaError("synonym '" + raw + "' maps outside the tag set");
    return v;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("vocabulary json: ") + e.what());
  }
}

std::string write_split_json(const DatasetSplit& split) {
  ojson doc;
  doc["train"] = split.train;
  doc["validation"] = split.validation;
  doc["test"] = split.test;
  return doc.dump(2) + "\n";
}

DatasetSplit parse_split_json(std::string_view bytes) {
  try {
    const json doc = json::parse(bytes);
    DatasetSplit s;
    s.train = doc.at("train").get<std::vector<std::string>>();
    s.validation = doc.at("validation").get<std::vector<std::string>>();
    s.test = doc.at("test").get<std::vector<std::string>>();
    return s;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("split json: ") + e.what());
  }
}

std::map<std::string, std::string> parse_synonym_json(std::string_view bytes) {
  try {
    const json doc = json::parse(bytes);
    if (!doc.is_object()) throw SchemaError("synonym map must be a JSON object");
    std::map<std::string, std::string> out;
    for (const auto& [raw, canonical] : doc.items())
      out[ascii_lower(raw)] = ascii_lower(canonical.get<std::string>());
    return out;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("synonym json: ") + e.what());
  }
}

}  // namespace pen
