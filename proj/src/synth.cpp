#include "pen/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <set>

#include "pen/error.hpp"
#include "pen/seed.hpp"

namespace pen {

namespace {

struct Draw {
  Rng& rng;
  bool jitter;

  double uniform(double lo, double hi) {
    if (!jitter) return 0.5 * (lo + hi);
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  bool chance(double p) {
    if (!jitter) return p >= 0.5;
    return std::bernoulli_distribution(p)(rng);
  }
  int integer(int lo, int hi) {  // inclusive
    if (!jitter) return (lo + hi) / 2;
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  }
};

Box box(double cx, double cy, double cz, double hx, double hy, double hz) {
  return Box{Eigen::Vector3d(cx, cy, cz), Eigen::Vector3d(hx, hy, hz)};
}

void four_legs(std::vector<Box>& out, Draw& d, double w, double depth, double h, double thick, double max_inset) {
  const double lt = d.uniform(0.05, 0.12);
  const double inset = d.uniform(0.0, max_inset);
  const double x = w / 2 - lt / 2 - inset, z = depth / 2 - lt / 2 - inset;
  for (int sx : {-1, 1})
    for (int sz : {-1, 1}) out.push_back(box(sx * x, (h - thick) / 2, sz * z, lt / 2, (h - thick) / 2, lt / 2));
}

std::vector<Component> make_chair(Draw& d) {
  const double w = d.uniform(0.8, 1.2), depth = d.uniform(0.8, 1.2);
  const double h = d.uniform(0.8, 1.1), t = d.uniform(0.06, 0.16);
  Component back{0, {}}, seat{1, {}}, legs{2, {}}, arms{3, {}};
  seat.boxes.push_back(box(0, h - t / 2, 0, w / 2, t / 2, depth / 2));

  if (d.chance(0.2)) {
    const double bottom = 0.08;
    legs.boxes.push_back(box(0, bottom + (h - t - bottom) / 2, 0, 0.05, (h - t - bottom) / 2, 0.05));
    legs.boxes.push_back(box(0, 0.04, 0, w * 0.45, 0.04, 0.05));
    legs.boxes.push_back(box(0, 0.04, 0, 0.05, 0.04, depth * 0.45));
  } else {
    four_legs(legs.boxes, d, w, depth, h, t, 0.08);
  }

  const double bh = d.uniform(0.6, 1.1), bt = d.uniform(0.05, 0.12), bw = w * d.uniform(0.8, 1.0);
  const double bz = -depth / 2 + bt / 2;
  if (d.chance(0.3)) {
    const double rail = d.uniform(0.1, 0.2);
    back.boxes.push_back(box(0, h + bh - rail / 2, bz, bw / 2, rail / 2, bt / 2));
    const int n = d.integer(2, 4);
    const double slat = bw / (2.0 * n);
    for (int i = 0; i < n; ++i)
      back.boxes.push_back(box(-bw / 2 + (i + 0.5) * bw / n, h + (bh - rail) / 2, bz, slat / 2, (bh - rail) / 2,
                               bt * 0.4));
  } else {
    back.boxes.push_back(box(0, h + bh / 2, bz, bw / 2, bh / 2, bt / 2));
  }

  std::vector<Component> out{back, seat, legs};
  if (d.chance(0.5)) {
    const double ah = d.uniform(0.18, 0.3), aw = d.uniform(0.05, 0.1), ad = depth * d.uniform(0.6, 0.9);
    for (int s : {-1, 1}) {
      const double x = s * (w / 2 + aw / 2);
      arms.boxes.push_back(box(x, h + ah, -depth / 2 + ad / 2, aw / 2, 0.03, ad / 2));
      arms.boxes.push_back(box(x, h + ah / 2, -depth / 2 + ad - 0.04, 0.03, ah / 2, 0.03));
    }
    out.push_back(arms);
  }
  return out;
}

std::vector<Component> make_table(Draw& d) {
  const double w = d.uniform(1.2, 2.0), depth = d.uniform(0.7, 1.2);
  const double h = d.uniform(0.7, 1.0), t = d.uniform(0.04, 0.1);
  Component top{0, {}}, legs{1, {}};
  top.boxes.push_back(box(0, h - t / 2, 0, w / 2, t / 2, depth / 2));
  if (d.chance(0.25)) {
    const double base = 0.06;
    legs.boxes.push_back(box(0, base + (h - t - base) / 2, 0, 0.08, (h - t - base) / 2, 0.08));
    legs.boxes.push_back(box(0, base / 2, 0, w * 0.25, base / 2, depth * 0.3));
  } else {
    const double inset = d.uniform(0.0, 0.1);
    four_legs(legs.boxes, d, w, depth, h, t, inset);
    if (d.chance(0.4)) {
      const double y = h - t - 0.04;
      legs.boxes.push_back(box(0, y, depth / 2 - inset - 0.05, w / 2 - inset - 0.1, 0.04, 0.015));
      legs.boxes.push_back(box(0, y, -(depth / 2 - inset - 0.05), w / 2 - inset - 0.1, 0.04, 0.015));
    }
  }
  return {top, legs};
}

std::vector<Component> make_airplane(Draw& d) {
  const double len = d.uniform(2.5, 3.5), r = d.uniform(0.12, 0.22);
  Component body{0, {}}, wings{1, {}}, tail{2, {}}, engines{3, {}};
  body.boxes.push_back(box(0, 0, 0, r, r, len / 2));
  body.boxes.push_back(box(0, -r * 0.2, len / 2 + 0.15, r * 0.6, r * 0.6, 0.15));

  const double span = d.uniform(1.0, 1.8), chord = d.uniform(0.35, 0.7);
  const double wz = d.uniform(-0.05, 0.25) * len, wy = d.uniform(-0.5, 0.3) * r;
  for (int s : {-1, 1}) wings.boxes.push_back(box(s * (r + span / 2), wy, wz, span / 2, 0.03, chord / 2));

  const double fh = d.uniform(0.3, 0.6), fc = d.uniform(0.25, 0.45), ss = d.uniform(0.3, 0.6);
  const double tz = -len / 2 + fc / 2;
  tail.boxes.push_back(box(0, r + fh / 2, tz, 0.02, fh / 2, fc / 2));
  if (d.chance(0.2)) {
    for (int s : {-1, 1}) tail.boxes.push_back(box(s * ss / 2, r + fh, tz, ss / 2, 0.02, fc * 0.4));
  } else {
    for (int s : {-1, 1}) tail.boxes.push_back(box(s * (r + ss / 2), r * 0.3, tz, ss / 2, 0.02, fc * 0.4));
  }

  std::vector<Component> out{body, wings, tail};
  const double pick = d.jitter ? d.uniform(0.0, 1.0) : 0.5;
  std::vector<double> along;
  if (pick >= 0.7) along = {0.3, 0.65};
  else if (pick >= 0.2) along = {0.35};
  for (double f : along)
    for (int s : {-1, 1}) engines.boxes.push_back(box(s * (r + span * f), wy - 0.12, wz + 0.1, 0.08, 0.08, 0.25));
  if (!engines.boxes.empty()) out.push_back(engines);
  return out;
}

Archetype chair_archetype() {
  Archetype a;
  a.category = "chair";
  a.labels = {"back", "seat", "leg", "armrest"};
  a.name_pool = {{"back", "backrest"}, {"seat", "cushion"}, {"leg", "legs", "foot"}, {"armrest", "arm"}};
  a.synonyms = {{"backrest", "back"}, {"cushion", "seat"}, {"legs", "leg"}, {"foot", "leg"}, {"arm", "armrest"}};
  return a;
}

Archetype table_archetype() {
  Archetype a;
  a.category = "table";
  a.labels = {"top", "leg"};
  a.name_pool = {{"top", "tabletop", "board"}, {"leg", "legs", "support"}};
  a.synonyms = {{"tabletop", "top"}, {"board", "top"}, {"legs", "leg"}, {"support", "leg"}};
  return a;
}

Archetype airplane_archetype() {
  Archetype a;
  a.category = "airplane";
  a.labels = {"body", "wing", "tail", "engine"};
  a.name_pool = {{"body", "fuselage", "hull"}, {"wing", "wings"}, {"tail", "stabilizer", "fin"},
                 {"engine", "turbine", "jet"}};
  a.synonyms = {{"fuselage", "body"},  {"hull", "body"}, {"wings", "wing"},    {"stabilizer", "tail"},
                {"fin", "tail"},       {"turbine", "engine"}, {"jet", "engine"}};
  return a;
}

// Every token of these names contains a default stop pattern, so they never
// become tags.
const char* const kJunkPatterns[] = {"mesh%d",      "Mesh_%d",     "group%d",   "Group_%d",     "object%d",
                                     "Object.%03d", "node_%d",     "component%d", "Component#%d", "instance_%d",
                                     "geometry%d",  "untitled_%d", "shape%d",   "model_%d",     "defaultMesh%d"};

std::string junk_name(Rng& rng) {
  const std::size_t n = sizeof(kJunkPatterns) / sizeof(kJunkPatterns[0]);
  const char* pat = kJunkPatterns[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)];
  char buf[64];
  std::snprintf(buf, sizeof(buf), pat, std::uniform_int_distribution<int>(0, 999)(rng));
  return buf;
}

std::string decorate(const std::string& base, Rng& rng) {
  std::string s = base;
  switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
    case 0:
      break;
    case 1:
      s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
      break;
    case 2:
      s += "_" + std::to_string(std::uniform_int_distribution<int>(1, 9)(rng));
      break;
    default:
      s += std::to_string(std::uniform_int_distribution<int>(0, 99)(rng));
      break;
  }
  return s;
}

struct LeafDraft {
  std::int32_t component;
  std::vector<Box> boxes;
  std::vector<std::int32_t> labels;  // per box
};

struct TreeDraft {
  std::string name;
  std::vector<int> children;
  int leaf = -1;  // index into the leaf drafts
};

double volume(const Box& b) { return 8.0 * b.half.prod(); }

/// Splits a component into k leaves: cut the biggest box along its longest
/// axis until there are at least k pieces, then deal pieces into k groups.
std::vector<LeafDraft> split_component(const Component& c, int ci, int k, Draw& d, Rng& rng) {
  std::vector<Box> pieces = c.boxes;
  while (static_cast<int>(pieces.size()) < k) {
    auto it = std::max_element(pieces.begin(), pieces.end(),
                               [](const Box& a, const Box& b) { return volume(a) < volume(b); });
    Box b = *it;
    Eigen::Index axis = 0;
    b.half.maxCoeff(&axis);
    const double f = d.uniform(0.3, 0.7);
    const double lo = b.center[axis] - b.half[axis], len = 2 * b.half[axis];
    Box first = b, second = b;
    first.half[axis] = f * len / 2;
    first.center[axis] = lo + f * len / 2;
    second.half[axis] = (1 - f) * len / 2;
    second.center[axis] = lo + f * len + (1 - f) * len / 2;
    *it = first;
    pieces.insert(it + 1, second);
  }
  if (d.jitter) std::shuffle(pieces.begin(), pieces.end(), rng);
  // k - 1 distinct cut positions in 1..n-1.
  const int n = static_cast<int>(pieces.size());
  std::vector<int> cuts(static_cast<std::size_t>(n - 1));
  std::iota(cuts.begin(), cuts.end(), 1);
  if (d.jitter) std::shuffle(cuts.begin(), cuts.end(), rng);
  cuts.resize(static_cast<std::size_t>(k - 1));
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(n);
  std::vector<LeafDraft> out;
  int begin = 0;
  for (int end : cuts) {
    LeafDraft leaf{ci, {}, {}};
    for (int i = begin; i < end; ++i) {
      leaf.boxes.push_back(pieces[static_cast<std::size_t>(i)]);
      leaf.labels.push_back(c.label);
    }
    out.push_back(std::move(leaf));
    begin = end;
  }
  return out;
}

void append_box(TriangleMesh& mesh, const Box& b, NodeId leaf, std::int32_t label) {
  const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
  for (int i = 0; i < 8; ++i)
    mesh.vertices.push_back(b.center + Eigen::Vector3d((i & 1) ? b.half.x() : -b.half.x(),
                                                       (i & 2) ? b.half.y() : -b.half.y(),
                                                       (i & 4) ? b.half.z() : -b.half.z()));
  static constexpr std::uint32_t quads[6][4] = {{0, 2, 6, 4}, {1, 5, 7, 3}, {0, 4, 5, 1},
                                                {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 6, 7, 5}};
  for (const auto& q : quads) {
    mesh.triangles.push_back({base + q[0], base + q[1], base + q[2]});
    mesh.triangles.push_back({base + q[0], base + q[2], base + q[3]});
    for (int t = 0; t < 2; ++t) {
      mesh.triangle_leaf.push_back(leaf);
      mesh.triangle_label.push_back(label);
    }
  }
}

}  // namespace

std::vector<Component> Archetype::instantiate(Rng& rng, bool jitter) const {
  Draw d{rng, jitter};
  if (category == "chair") return make_chair(d);
  if (category == "table") return make_table(d);
  if (category == "airplane") return make_airplane(d);
  throw ConfigError("no generator for archetype '" + category + "'");
}

const Archetype& archetype(const std::string& name) {
  static const Archetype chair = chair_archetype(), table = table_archetype(), airplane = airplane_archetype();
  if (name == "chair") return chair;
  if (name == "table") return table;
  if (name == "airplane") return airplane;
  throw ConfigError("unknown archetype '" + name + "' (expected chair, table or airplane)");
}

std::vector<std::string> archetype_names() { return {"chair", "table", "airplane"}; }

ShapeRecord generate_shape(const Archetype& arch, const std::string& shape_id, double p_tag,
                           const HierarchyNoise& noise, Rng& rng) {
  Draw d{rng, noise.jitter};
  const std::vector<Component> comps = arch.instantiate(rng, noise.jitter);

  std::vector<LeafDraft> leaves;
  for (std::size_t ci = 0; ci < comps.size(); ++ci) {
    const int k = noise.split ? std::uniform_int_distribution<int>(1, std::max(1, noise.max_split))(rng) : 1;
    for (auto& l : split_component(comps[ci], static_cast<int>(ci), k, d, rng)) leaves.push_back(std::move(l));
  }
  if (noise.straddle && leaves.size() > 2 && std::bernoulli_distribution(0.3)(rng)) {
    // Merge one leaf into a leaf of a different part.
    const std::size_t a = std::uniform_int_distribution<std::size_t>(0, leaves.size() - 1)(rng);
    for (std::size_t b = 0; b < leaves.size(); ++b)
      if (leaves[b].component != leaves[a].component) {
        leaves[b].boxes.insert(leaves[b].boxes.end(), leaves[a].boxes.begin(), leaves[a].boxes.end());
        leaves[b].labels.insert(leaves[b].labels.end(), leaves[a].labels.begin(), leaves[a].labels.end());
        leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(a));
        break;
      }
  }

  // Tree drafts: leaves first, groups appended as they are formed.
  std::vector<TreeDraft> drafts;
  std::vector<int> current;
  std::vector<int> comp_of;  // per draft
  std::bernoulli_distribution tag(p_tag), wrong(noise.p_wrong_tag);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    std::string name;
    if (tag(rng)) {
      std::size_t label = static_cast<std::size_t>(comps[static_cast<std::size_t>(leaves[i].component)].label);
      if (arch.labels.size() > 1 && wrong(rng)) {
        std::size_t other = std::uniform_int_distribution<std::size_t>(0, arch.labels.size() - 2)(rng);
        label = other >= label ? other + 1 : other;
      }
      const auto& pool = arch.name_pool[label];
      name = decorate(pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)], rng);
    } else {
      name = junk_name(rng);
    }
    drafts.push_back({name, {}, static_cast<int>(i)});
    comp_of.push_back(leaves[i].component);
    current.push_back(static_cast<int>(i));
  }
  const auto make_group = [&](const std::vector<int>& members) {
    drafts.push_back({junk_name(rng), members, -1});
    comp_of.push_back(comp_of[static_cast<std::size_t>(members.front())]);
    return static_cast<int>(drafts.size()) - 1;
  };

  const int levels = noise.group ? std::uniform_int_distribution<int>(1, std::max(1, noise.max_group_levels))(rng) : 0;
  for (int level = 0; level < levels; ++level) {
    std::vector<int> next;
    if (level == 0) {
      // Designers usually group the pieces of one part together.
      std::vector<int> rest;
      for (std::size_t ci = 0; ci < comps.size(); ++ci) {
        std::vector<int> members;
        for (int n : current)
          if (comp_of[static_cast<std::size_t>(n)] == static_cast<int>(ci)) members.push_back(n);
        if (members.size() > 1 && std::bernoulli_distribution(0.75)(rng))
          next.push_back(make_group(members));
        else
          rest.insert(rest.end(), members.begin(), members.end());
      }
      next.insert(next.end(), rest.begin(), rest.end());
    } else {
      std::shuffle(current.begin(), current.end(), rng);
      for (std::size_t i = 0; i < current.size();) {
        const std::size_t size =
            std::min(current.size() - i, static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 3)(rng)));
        if (size == 1 || size == current.size()) {
          next.insert(next.end(), current.begin() + static_cast<std::ptrdiff_t>(i),
                      current.begin() + static_cast<std::ptrdiff_t>(i + size));
        } else {
          next.push_back(make_group(std::vector<int>(current.begin() + static_cast<std::ptrdiff_t>(i),
                                                     current.begin() + static_cast<std::ptrdiff_t>(i + size))));
        }
        i += size;
      }
    }
    current = std::move(next);
  }
  int root;
  if (current.size() == 1 && drafts[static_cast<std::size_t>(current[0])].leaf < 0) {
    root = current[0];
  } else {
    root = make_group(current);
  }

  // Pre-order emission: node ids and geometry ids follow the traversal.
  ShapeRecord rec;
  rec.shape_id = shape_id;
  rec.category = arch.category;
  std::vector<NodeSpec> specs;
  std::vector<int> stack{root};
  std::vector<std::optional<std::uint32_t>> parent_of(drafts.size());
  std::vector<std::pair<std::uint32_t, int>> leaf_nodes;  // node id, leaf draft
  GeometryId next_geometry = 0;
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    const TreeDraft& t = drafts[static_cast<std::size_t>(n)];
    const auto id = static_cast<std::uint32_t>(specs.size());
    NodeSpec spec{parent_of[static_cast<std::size_t>(n)], t.name, std::nullopt};
    if (t.leaf >= 0) {
      spec.geometry = next_geometry++;
      leaf_nodes.emplace_back(id, t.leaf);
    }
    specs.push_back(spec);
    for (auto it = t.children.rbegin(); it != t.children.rend(); ++it) {
      parent_of[static_cast<std::size_t>(*it)] = id;
      stack.push_back(*it);
    }
  }
  rec.hierarchy = PartHierarchy::build(specs);
  for (const auto& [node, li] : leaf_nodes) {
    const LeafDraft& leaf = leaves[static_cast<std::size_t>(li)];
    for (std::size_t b = 0; b < leaf.boxes.size(); ++b) append_box(rec.mesh, leaf.boxes[b], NodeId{node}, leaf.labels[b]);
  }
  rec.validate();
  return rec;
}

SynthConfig SynthConfig::defaults() {
  SynthConfig c;
  c.categories = {{"chair", 50, 0.35}, {"table", 50, 0.0}, {"airplane", 50, 0.0}};
  return c;
}

void SynthConfig::validate() const {
  if (categories.empty()) throw ConfigError("synth config lists no categories");
  std::set<std::string> seen;
  for (const auto& c : categories) {
    archetype(c.archetype);
    if (!seen.insert(c.archetype).second) throw ConfigError("category '" + c.archetype + "' listed twice");
    if (c.count < 3) throw ConfigError("category '" + c.archetype + "' needs at least 3 shapes");
    if (c.p_tag < 0.0 || c.p_tag > 1.0) throw ConfigError("p_tag must lie in [0, 1]");
  }
  if (noise.max_split < 1 || noise.max_split > 4) throw ConfigError("max_split must lie in [1, 4]");
  if (noise.max_group_levels < 1 || noise.max_group_levels > 3)
    throw ConfigError("max_group_levels must lie in [1, 3]");
  if (noise.p_wrong_tag < 0.0 || noise.p_wrong_tag > 1.0) throw ConfigError("p_wrong_tag must lie in [0, 1]");
}

void to_json(nlohmann::json& j, const SynthConfig& c) {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& k : c.categories) cats.push_back({{"archetype", k.archetype}, {"count", k.count}, {"p_tag", k.p_tag}});
  j = nlohmann::json{{"seed", c.seed},
                     {"categories", cats},
                     {"noise",
                      {{"jitter", c.noise.jitter},
                       {"split", c.noise.split},
                       {"max_split", c.noise.max_split},
                       {"group", c.noise.group},
                       {"max_group_levels", c.noise.max_group_levels},
                       {"p_wrong_tag", c.noise.p_wrong_tag},
                       {"straddle", c.noise.straddle}}}};
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
  try {
    c = SynthConfig::defaults();
    c.seed = j.value("seed", c.seed);
    if (j.contains("categories")) {
      c.categories.clear();
      for (const auto& k : j.at("categories"))
        c.categories.push_back({k.at("archetype").get<std::string>(), k.value("count", std::size_t{50}),
                                k.value("p_tag", 0.0)});
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      c.noise.jitter = n.value("jitter", c.noise.jitter);
      c.noise.split = n.value("split", c.noise.split);
      c.noise.max_split = n.value("max_split", c.noise.max_split);
      c.noise.group = n.value("group", c.noise.group);
      c.noise.max_group_levels = n.value("max_group_levels", c.noise.max_group_levels);
      c.noise.p_wrong_tag = n.value("p_wrong_tag", c.noise.p_wrong_tag);
      c.noise.straddle = n.value("straddle", c.noise.straddle);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
}

std::vector<ShapeRecord> generate_records(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<ShapeRecord> out;
  for (std::size_t ci = 0; ci < cfg.categories.size(); ++ci) {
    const SynthCategory& cat = cfg.categories[ci];
    const Archetype& arch = archetype(cat.archetype);
    for (std::size_t i = 0; i < cat.count; ++i) {
      Rng rng(derive_seed(cfg.seed, {ci, i}));
      char id[96];
      std::snprintf(id, sizeof(id), "%s_%04zu", cat.archetype.c_str(), i);
      out.push_back(generate_shape(arch, id, cat.p_tag, cfg.noise, rng));
    }
  }
  return out;
}

std::vector<CorpusEntry> generate_corpus(const SynthConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const std::vector<ShapeRecord> records = generate_records(cfg);
  const auto mkdirs = [](const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create directory '" + p.string() + "': " + ec.message());
  };
  std::vector<CorpusEntry> entries;
  nlohmann::ordered_json shapes = nlohmann::ordered_json::array();
  for (const ShapeRecord& r : records) {
    const std::string rel = "shapes/" + r.category + "/" + r.shape_id + ".json";
    mkdirs(fs::path(out_dir) / "shapes" / r.category);
    save_shape_file(r, (fs::path(out_dir) / rel).string());
    entries.push_back({r.shape_id, r.category, rel});
    shapes.push_back({{"shape_id", r.shape_id},
                      {"category", r.category},
                      {"path", rel},
                      {"num_leaves", r.hierarchy.num_leaves()},
                      {"height", r.hierarchy.height()}});
  }
  mkdirs(fs::path(out_dir) / "synonyms");
  nlohmann::ordered_json categories = nlohmann::ordered_json::object();
  for (const auto& c : cfg.categories) {
    const Archetype& a = archetype(c.archetype);
    nlohmann::ordered_json syn(a.synonyms);
    const std::string rel = "synonyms/" + c.archetype + ".json";
    write_file_atomic((fs::path(out_dir) / rel).string(), syn.dump(2) + "\n");
    categories[c.archetype] = {{"labels", a.labels}, {"synonyms", rel}, {"count", c.count}, {"p_tag", c.p_tag}};
  }
  nlohmann::json cj = cfg;
  nlohmann::ordered_json manifest;
  manifest["format_version"] = 1;
  manifest["seed"] = cfg.seed;
  manifest["config"] = nlohmann::ordered_json::parse(cj.dump());
  manifest["categories"] = categories;
  manifest["shapes"] = shapes;
  write_file_atomic((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  return entries;
}

}  // namespace pen
