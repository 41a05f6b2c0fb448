#include "pen/ply.hpp"

#include <charconv>
#include <sstream>
#include <vector>

#include "pen/error.hpp"

namespace pen {

namespace {

void append_float(std::string& out, double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), static_cast<float>(v));
  out.append(buf, r.ptr);
}

}  // namespace

std::string write_cloud_ply(const PointCloud& cloud) {
  cloud.validate();
  std::string out =
      "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
      "\nproperty float x\nproperty float y\nproperty float z\n"
      "property int leaf_id\nproperty int tag_id\nproperty int label\nend_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    for (int k = 0; k < 3; ++k) {
      append_float(out, cloud.points(k, c));
      out += ' ';
    }
    out += std::to_string(cloud.leaf_id[i]) + ' ' + std::to_string(cloud.tag_id[i]) + ' ' +
           std::to_string(cloud.semantic_label[i]) + '\n';
  }
  return out;
}

std::string write_embedding_ply(const PointCloud& cloud, const Eigen::MatrixXd& embedding,
                                const Eigen::Matrix<std::uint8_t, 3, Eigen::Dynamic>& rgb) {
  const auto n = static_cast<Eigen::Index>(cloud.size());
  if (embedding.cols() != n || rgb.cols() != n) throw InputError("embedding/colour columns must match point count");
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(n) +
                    "\nproperty float x\nproperty float y\nproperty float z\n";
  for (Eigen::Index d = 0; d < embedding.rows(); ++d) out += "property float e" + std::to_string(d) + "\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      append_float(out, cloud.points(k, i));
      out += ' ';
    }
    for (Eigen::Index d = 0; d < embedding.rows(); ++d) {
      append_float(out, embedding(d, i));
      out += ' ';
    }
    out += std::to_string(rgb(0, i)) + ' ' + std::to_string(rgb(1, i)) + ' ' + std::to_string(rgb(2, i)) + '\n';
  }
  return out;
}

PointCloud parse_cloud_ply(std::string_view bytes) {
  std::istringstream in{std::string(bytes)};
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw ParseError("PLY: missing magic line");
  std::size_t count = 0;
  bool in_vertex = false, seen_vertex = false;
  std::vector<std::string> props;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw ParseError("PLY: only ascii format is supported, got '" + fmt + "'");
    } else if (word == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) {
        if (seen_vertex) throw ParseError("PLY: duplicate vertex element");
        seen_vertex = true;
        ls >> count;
      } else if (!seen_vertex) {
        throw ParseError("PLY: vertex element must come first");
      }
    } else if (word == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      if (type == "list") throw ParseError("PLY: list properties on vertices are not supported");
      props.push_back(name);
    } else if (word == "end_header") {
      break;
    }
  }
  const auto col = [&](const char* name) -> int {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int ix = col("x"), iy = col("y"), iz = col("z");
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError("PLY: vertex element lacks x/y/z");
  const int il = col("leaf_id"), it = col("tag_id"), is = col("label");

  PointCloud cloud = PointCloud::with_size(count);
  std::vector<double> row(props.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (double& v : row)
      if (!(in >> v)) throw ParseError("PLY: truncated data at vertex " + std::to_string(i));
    const auto c = static_cast<Eigen::Index>(i);
    cloud.points(0, c) = row[ix];
    cloud.points(1, c) = row[iy];
    cloud.points(2, c) = row[iz];
    if (il >= 0) cloud.leaf_id[i] = static_cast<std::int32_t>(row[il]);
    if (it >= 0) cloud.tag_id[i] = static_cast<std::int32_t>(row[it]);
    if (is >= 0) cloud.semantic_label[i] = static_cast<std::int32_t>(row[is]);
  }
  return cloud;
}

}  // namespace pen
