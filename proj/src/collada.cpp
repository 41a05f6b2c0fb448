#include "pen/collada.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <boost/property_tree/detail/rapidxml.hpp>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "pen/error.hpp"

namespace pen {

namespace pt = boost::property_tree;

namespace {

using Affine = Eigen::Matrix4d;

std::string attr(const pt::ptree& node, const char* key) {
  return node.get<std::string>(std::string("<xmlattr>.") + key, "");
}

std::string strip_hash(const std::string& url) {
  return !url.empty() && url.front() == '#' ? url.substr(1) : url;
}

std::vector<double> parse_numbers(const std::string& text, const std::string& where) {
  std::vector<double> out;
  std::istringstream in(text);
  double v;
  while (in >> v) out.push_back(v);
  if (!in.eof()) throw ParseError("non-numeric data in " + where);
  return out;
}

std::vector<std::uint32_t> parse_indices(const std::string& text, const std::string& where) {
  std::vector<std::uint32_t> out;
  std::istringstream in(text);
  long long v;
  while (in >> v) {
    if (v < 0) throw ParseError("negative index in " + where);
    out.push_back(static_cast<std::uint32_t>(v));
  }
  if (!in.eof()) throw ParseError("non-integer data in " + where);
  return out;
}

struct Triangles {
  std::vector<Eigen::Vector3d> positions;
  std::vector<std::array<std::uint32_t, 3>> faces;
};

class Document {
 public:
  explicit Document(const pt::ptree& root) : root_(root) {
    if (auto lib = root_.get_child_optional("library_geometries"))
      for (const auto& [tag, g] : *lib)
        if (tag == "geometry") geometries_[attr(g, "id")] = &g;
  }

  const Triangles& geometry(const std::string& url) {
    const std::string id = strip_hash(url);
    if (auto it = cache_.find(id); it != cache_.end()) return it->second;
    auto it = geometries_.find(id);
    if (it == geometries_.end()) throw ReferenceError("geometry '" + url + "' is referenced but not defined");
    return cache_.emplace(id, read_geometry(id, *it->second)).first->second;
  }

  const pt::ptree& visual_scene() const {
    std::string wanted;
    if (auto scene = root_.get_child_optional("scene"))
      if (auto inst = scene->get_child_optional("instance_visual_scene"))
        wanted = strip_hash(attr(*inst, "url"));
    auto lib = root_.get_child_optional("library_visual_scenes");
    if (!lib) throw ReferenceError("document has no library_visual_scenes");
    const pt::ptree* first = nullptr;
    for (const auto& [tag, vs] : *lib) {
      if (tag != "visual_scene") continue;
      if (!first) first = &vs;
      if (!wanted.empty() && attr(vs, "id") == wanted) return vs;
    }
    if (!wanted.empty()) throw ReferenceError("visual scene '#" + wanted + "' is referenced but not defined");
    if (!first) throw ReferenceError("document has no visual_scene");
    return *first;
  }

 private:
  static Triangles read_geometry(const std::string& id, const pt::ptree& geom) {
    auto mesh = geom.get_child_optional("mesh");
    if (!mesh) throw UnsupportedPrimitiveError("geometry '" + id + "' has no <mesh> (e.g. spline or brep)");

    std::map<std::string, std::vector<Eigen::Vector3d>> sources;
    std::map<std::string, std::string> vertices_to_source;
    for (const auto& [tag, child] : *mesh) {
      if (tag == "source") {
        const std::string sid = attr(child, "id");
        auto arr = child.get_child_optional("float_array");
        if (!arr) continue;
        const std::vector<double> values = parse_numbers(arr->data(), "source '" + sid + "'");
        std::size_t stride = 3;
        if (auto acc = child.get_child_optional("technique_common.accessor"))
          stride = acc->get<std::size_t>("<xmlattr>.stride", 3);
        if (stride < 3) continue;  // not a 3-D position source
        std::vector<Eigen::Vector3d> pts;
        for (std::size_t i = 0; i + 2 < values.size(); i += stride)
          pts.emplace_back(values[i], values[i + 1], values[i + 2]);
        sources[sid] = std::move(pts);
      } else if (tag == "vertices") {
        for (const auto& [itag, input] : child)
          if (itag == "input" && attr(input, "semantic") == "POSITION")
            vertices_to_source[attr(child, "id")] = strip_hash(attr(input, "source"));
      }
    }

    Triangles out;
    std::map<std::string, std::uint32_t> source_base;
    const auto positions_of = [&](const std::string& ref) -> std::uint32_t {
      std::string src = strip_hash(ref);
      if (auto v = vertices_to_source.find(src); v != vertices_to_source.end()) src = v->second;
      auto s = sources.find(src);
      if (s == sources.end()) throw ReferenceError("geometry '" + id + "' references undefined source '" + ref + "'");
      if (auto b = source_base.find(src); b != source_base.end()) return b->second;
      const auto base = static_cast<std::uint32_t>(out.positions.size());
      out.positions.insert(out.positions.end(), s->second.begin(), s->second.end());
      source_base[src] = base;
      return base;
    };

    for (const auto& [tag, prim] : *mesh) {
      if (tag == "source" || tag == "vertices" || tag == "extra" || tag == "<xmlattr>") continue;
      if (tag != "triangles" && tag != "polylist")
        throw UnsupportedPrimitiveError("geometry '" + id + "' uses unsupported primitive <" + tag + ">");

      std::size_t stride = 0;
      std::optional<std::size_t> vertex_offset;
      std::string vertex_source;
      for (const auto& [itag, input] : prim) {
        if (itag != "input") continue;
        const std::size_t off = input.get<std::size_t>("<xmlattr>.offset", 0);
        stride = std::max(stride, off + 1);
        const std::string sem = attr(input, "semantic");
        if (sem == "VERTEX" || (sem == "POSITION" && !vertex_offset)) {
          vertex_offset = off;
          vertex_source = attr(input, "source");
        }
      }
      if (!vertex_offset) throw ReferenceError("primitive in geometry '" + id + "' has no VERTEX/POSITION input");
      const std::uint32_t base = positions_of(vertex_source);
      const std::size_t limit = out.positions.size();

      const std::vector<std::uint32_t> p = parse_indices(prim.get<std::string>("p", ""), "<p> of '" + id + "'");
      if (tag == "polylist") {
        const auto vcount = parse_indices(prim.get<std::string>("vcount", ""), "<vcount> of '" + id + "'");
        for (std::uint32_t c : vcount)
          if (c != 3)
            throw UnsupportedPrimitiveError("geometry '" + id + "' uses <polylist> with " + std::to_string(c) +
                                            "-sided polygons");
      }
      if (p.size() % (3 * stride) != 0)
        throw ParseError("triangle index list of '" + id + "' is not a multiple of 3 vertices");
      for (std::size_t i = 0; i < p.size(); i += 3 * stride) {
        std::array<std::uint32_t, 3> face{};
        for (int k = 0; k < 3; ++k) {
          face[k] = base + p[i + k * stride + *vertex_offset];
          if (face[k] >= limit) throw ReferenceError("vertex index out of range in geometry '" + id + "'");
        }
        out.faces.push_back(face);
      }
    }
    return out;
  }

  const pt::ptree& root_;
  std::map<std::string, const pt::ptree*> geometries_;
  std::map<std::string, Triangles> cache_;
};

Affine parse_transform(const std::string& tag, const pt::ptree& element) {
  const std::vector<double> v = parse_numbers(element.data(), "<" + tag + ">");
  Affine m = Affine::Identity();
  const auto need = [&](std::size_t n) {
    if (v.size() != n) throw ParseError("<" + tag + "> needs " + std::to_string(n) + " values");
  };
  if (tag == "matrix") {
    need(16);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) m(r, c) = v[4 * r + c];
  } else if (tag == "translate") {
    need(3);
    m.block<3, 1>(0, 3) = Eigen::Vector3d(v[0], v[1], v[2]);
  } else if (tag == "scale") {
    need(3);
    m.diagonal().head<3>() = Eigen::Vector3d(v[0], v[1], v[2]);
  } else if (tag == "rotate") {
    need(4);
    const Eigen::Vector3d axis(v[0], v[1], v[2]);
    if (axis.norm() > 0)
      m.block<3, 3>(0, 0) = Eigen::AngleAxisd(v[3] * std::numbers::pi / 180.0, axis.normalized()).toRotationMatrix();
  }
  return m;
}

struct Pending {
  std::string name;
  std::vector<Pending> children;
  std::optional<Triangles> leaf;  // transformed geometry
};

Triangles instance(const Triangles& g, const Affine& m) {
  Triangles out = g;
  for (auto& p : out.positions) p = (m * p.homogeneous()).head<3>();
  return out;
}

std::optional<Pending> convert(const pt::ptree& node, const Affine& parent, Document& doc) {
  Affine local = parent;
  std::vector<std::pair<std::string, Triangles>> geoms;
  std::vector<Pending> kids;
  for (const auto& [tag, child] : node) {
    if (tag == "matrix" || tag == "translate" || tag == "rotate" || tag == "scale") {
      local = local * parse_transform(tag, child);
    } else if (tag == "instance_geometry") {
      const std::string url = attr(child, "url");
      const Triangles& g = doc.geometry(url);
      if (g.faces.empty()) continue;
      std::string gname = attr(child, "name");
      if (gname.empty()) gname = strip_hash(url);
      geoms.emplace_back(std::move(gname), instance(g, local));
    } else if (tag == "node") {
      if (auto k = convert(child, local, doc)) kids.push_back(std::move(*k));
    }
  }
  Pending out;
  out.name = attr(node, "name");
  if (out.name.empty()) out.name = attr(node, "id");
  if (geoms.size() == 1 && kids.empty()) {
    out.leaf = std::move(geoms.front().second);
    return out;
  }
  for (auto& [gname, tris] : geoms) {
    Pending leaf;
    leaf.name = gname;
    leaf.leaf = std::move(tris);
    out.children.push_back(std::move(leaf));
  }
  for (auto& k : kids) out.children.push_back(std::move(k));
  if (out.children.empty()) return std::nullopt;
  return out;
}

void flatten(const Pending& p, std::optional<std::uint32_t> parent, std::vector<NodeSpec>& specs,
             TriangleMesh& mesh) {
  const auto id = static_cast<std::uint32_t>(specs.size());
  specs.push_back(NodeSpec{parent, p.name, std::nullopt});
  if (p.leaf) {
    const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.insert(mesh.vertices.end(), p.leaf->positions.begin(), p.leaf->positions.end());
    for (const auto& f : p.leaf->faces) {
      mesh.triangles.push_back({base + f[0], base + f[1], base + f[2]});
      mesh.triangle_leaf.push_back(NodeId{id});
    }
    std::uint32_t leaves = 0;
    for (const auto& s : specs) leaves += s.geometry.has_value();
    specs[id].geometry = leaves;
    return;
  }
  for (const auto& c : p.children) flatten(c, id, specs, mesh);
}

// property_tree's reader does not check that closing tags match.
void check_well_formed(std::string_view bytes) {
  namespace rx = pt::detail::rapidxml;
  std::string buf(bytes);
  buf.push_back('\0');
  rx::xml_document<char> doc;
  try {
    doc.parse<rx::parse_validate_closing_tags | rx::parse_non_destructive>(buf.data());
  } catch (const rx::parse_error& e) {
    const char* where = e.where<char>();
    const auto line = 1 + std::count<const char*>(buf.data(), where ? where : buf.data(), '\n');
    throw ParseError("malformed XML at line " + std::to_string(line) + ": " + e.what());
  }
}

}  // namespace

ShapeRecord parse_collada(std::string_view bytes, std::string shape_id, std::string category) {
  check_well_formed(bytes);
  pt::ptree tree;
  try {
    std::istringstream in{std::string(bytes)};
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("malformed XML at line " + std::to_string(e.line()) + ": " + e.message());
  }
  auto collada = tree.get_child_optional("COLLADA");
  if (!collada) throw ParseError("missing <COLLADA> root element");

  Document doc(*collada);
  const pt::ptree& scene = doc.visual_scene();
  std::vector<Pending> tops;
  for (const auto& [tag, node] : scene)
    if (tag == "node")
      if (auto p = convert(node, Affine::Identity(), doc)) tops.push_back(std::move(*p));
  if (tops.empty()) throw InputError("COLLADA scene contains no triangle geometry");

  Pending root;
  if (tops.size() == 1) {
    root = std::move(tops.front());
  } else {
    root.name = attr(scene, "name");
    if (root.name.empty()) root.name = attr(scene, "id");
    root.children = std::move(tops);
  }

  ShapeRecord rec;
  rec.shape_id = std::move(shape_id);
  rec.category = std::move(category);
  std::vector<NodeSpec> specs;
  flatten(root, std::nullopt, specs, rec.mesh);
  rec.hierarchy = PartHierarchy::build(specs);
  rec.validate();
  return rec;
}

}  // namespace pen
