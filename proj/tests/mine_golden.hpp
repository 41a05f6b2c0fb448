#pragma once
// Compares a mined output directory with the hand-derived golden summary.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace pen::test {

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return nlohmann::json::parse(ss.str());
}

/// Every difference as a readable line; empty when the output matches.
inline std::vector<std::string> compare_mine_golden(const std::string& out_dir, const std::string& golden_path) {
  std::vector<std::string> diffs;
  const auto golden = read_json_file(golden_path);
  const auto summary = read_json_file(out_dir + "/summary.json");
  const auto expect = [&](const std::string& what, const nlohmann::json& want, const nlohmann::json& got) {
    if (want != got) diffs.push_back(what + ": expected " + want.dump() + ", got " + got.dump());
  };
  expect("files", golden["files"], summary["files"]);
  expect("parsed", golden["parsed"], summary["parsed"]);
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& s : summary["skipped"]) skipped.push_back({{"file", s["file"]}, {"error", s["error"]}});
  expect("skipped", golden["skipped"], skipped);
  expect("filter", golden["filter"], summary["filter"]);
  expect("discarded", golden["discarded"], summary["discarded"]);

  const double tol = golden["coverage_tolerance"];
  const auto& want_cats = golden["categories"];
  const auto& got_cats = summary["categories"];
  if (want_cats.size() != got_cats.size()) {
    diffs.push_back("category count: expected " + std::to_string(want_cats.size()) + ", got " +
                    std::to_string(got_cats.size()));
    return diffs;
  }
  for (std::size_t i = 0; i < want_cats.size(); ++i) {
    const auto& w = want_cats[i];
    const auto& g = got_cats[i];
    const std::string cat = w["category"];
    expect("category " + std::to_string(i), w["category"], g["category"]);
    for (const char* key : {"kept", "tags", "tag_shape_counts", "sufficient", "split"})
      expect(cat + "." + key, w[key], g[key]);
    const double wc = w["coverage"], gc = g["coverage"];
    if (std::abs(wc - gc) > tol)
      diffs.push_back(cat + ".coverage: expected " + std::to_string(wc) + " +/- " + std::to_string(tol) + ", got " +
                      std::to_string(gc));
    const auto vocab = read_json_file(out_dir + "/tags/" + cat + ".json");
    expect(cat + ".synonym_map", w["synonym_map"], vocab["synonym_map"]);
    expect(cat + " vocabulary file tags", w["tags"], vocab["tags"]);
  }
  return diffs;
}

}  // namespace pen::test
