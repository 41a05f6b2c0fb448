#include "pen/fewshot.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

#include "pen/checkpoint.hpp"
#include "pen/error.hpp"
#include "pen/seed.hpp"

namespace pen {

namespace {

constexpr std::pair<Variant, const char*> kVariantNames[] = {
    {Variant::kScratch, "scratch"},     {Variant::kAutoencoder, "autoencoder"}, {Variant::kLeaf, "leaf"},
    {Variant::kHierarchy, "hierarchy"}, {Variant::kTags, "tags"},               {Variant::kHierarchyTags, "hierarchy_tags"}};

}  // namespace

const char* to_string(Variant v) {
  for (const auto& [k, name] : kVariantNames)
    if (k == v) return name;
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (const auto& [k, n] : kVariantNames)
    if (name == n) return k;
  throw ConfigError("unknown variant '" + name +
                    "' (expected scratch, autoencoder, leaf, hierarchy, tags or hierarchy_tags)");
}

std::vector<Variant> parse_variant_list(const std::string& csv) {
  std::vector<Variant> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_variant(item));
  if (out.empty()) throw ConfigError("empty variant list");
  return out;
}

std::vector<Variant> all_variants() {
  return {Variant::kScratch, Variant::kAutoencoder, Variant::kLeaf,
          Variant::kHierarchy, Variant::kTags, Variant::kHierarchyTags};
}

bool is_tag_variant(Variant v) { return v == Variant::kTags || v == Variant::kHierarchyTags; }

void BenchmarkSpec::validate() const {
  for (int x : x_grid)
    if (x <= 0) throw ConfigError("x_grid entries must be positive");
  for (int p : point_grid)
    if (p <= 0) throw ConfigError("point_grid entries must be positive");
  if (!point_grid.empty() && fixed_shapes_for_point_grid <= 0)
    throw ConfigError("fixed_shapes_for_point_grid must be positive");
  if (repeats < 1) throw ConfigError("repeats must be at least 1");
  if (variants.empty()) throw ConfigError("benchmark needs at least one variant");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  finetune.validate();
}

void to_json(nlohmann::json& j, const BenchmarkSpec& s) {
  std::vector<std::string> v;
  for (Variant x : s.variants) v.emplace_back(to_string(x));
  j = nlohmann::json{{"x_grid", s.x_grid},
                     {"point_grid", s.point_grid},
                     {"fixed_shapes_for_point_grid", s.fixed_shapes_for_point_grid},
                     {"repeats", s.repeats},
                     {"variants", v},
                     {"seed", s.seed},
                     {"eval_points", s.eval_points},
                     {"workers", s.workers},
                     {"finetune", s.finetune}};
}

void from_json(const nlohmann::json& j, BenchmarkSpec& s) {
  try {
    BenchmarkSpec d;
    s.x_grid = j.value("x_grid", d.x_grid);
    s.point_grid = j.value("point_grid", d.point_grid);
    s.fixed_shapes_for_point_grid = j.value("fixed_shapes_for_point_grid", d.fixed_shapes_for_point_grid);
    s.repeats = j.value("repeats", d.repeats);
    s.variants = d.variants;
    if (j.contains("variants")) {
      s.variants.clear();
      for (const auto& v : j.at("variants")) s.variants.push_back(parse_variant(v.get<std::string>()));
    }
    s.seed = j.value("seed", d.seed);
    s.eval_points = j.value("eval_points", d.eval_points);
    s.workers = j.value("workers", d.workers);
    s.finetune = j.value("finetune", d.finetune);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("benchmark spec: ") + e.what());
  }
}

std::string MetricsTable::to_csv() const {
  std::ostringstream out;
  out << "category,variant,axis,value,repeat,miou,seconds\n";
  out.precision(10);
  for (const auto& r : rows)
    out << r.category << ',' << r.variant << ',' << r.axis << ',' << r.value << ',' << r.repeat << ',' << r.miou
        << ',' << r.seconds << '\n';
  return out.str();
}

nlohmann::json MetricsTable::summary() const {
  using Key = std::tuple<std::string, std::string, std::string, int>;
  std::map<Key, std::vector<double>> cells;
  std::vector<Key> order;
  for (const auto& r : rows) {
    Key k{r.category, r.variant, r.axis, r.value};
    if (!cells.count(k)) order.push_back(k);
    cells[k].push_back(r.miou);
  }
  nlohmann::json out_cells = nlohmann::json::array();
  using Overall = std::tuple<std::string, std::string, int>;
  std::map<Overall, std::vector<double>> overall;
  std::vector<Overall> overall_order;
  for (const Key& k : order) {
    const auto& v = cells[k];
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    out_cells.push_back({{"category", std::get<0>(k)},
                         {"variant", std::get<1>(k)},
                         {"axis", std::get<2>(k)},
                         {"value", std::get<3>(k)},
                         {"n", v.size()},
                         {"mean", mean},
                         {"std", sd}});
    Overall o{std::get<1>(k), std::get<2>(k), std::get<3>(k)};
    if (!overall.count(o)) overall_order.push_back(o);
    overall[o].push_back(mean);
  }
  nlohmann::json out_overall = nlohmann::json::array();
  for (const Overall& o : overall_order) {
    const auto& v = overall[o];
    double mean = 0.0;
    for (double x : v) mean += x;
    out_overall.push_back({{"variant", std::get<0>(o)},
                           {"axis", std::get<1>(o)},
                           {"value", std::get<2>(o)},
                           {"categories", v.size()},
                           {"mean", mean / static_cast<double>(v.size())}});
  }
  return {{"cells", out_cells}, {"overall", out_overall}};
}

std::vector<std::string> select_labeled_shapes(const std::vector<std::string>& split, std::size_t x,
                                               std::uint64_t seed) {
  if (x > split.size())
    throw InputError("cannot select " + std::to_string(x) + " labelled shapes from a split of " +
                     std::to_string(split.size()));
  std::vector<std::string> pool = split;
  Rng rng(seed);
  for (std::size_t i = 0; i < x; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(x);
  return pool;
}

std::vector<std::uint32_t> select_labeled_points(std::size_t num_points, std::size_t n, std::uint64_t seed) {
  if (n > num_points)
    throw InputError("cannot label " + std::to_string(n) + " of " + std::to_string(num_points) + " points");
  std::vector<std::uint32_t> idx(num_points);
  std::iota(idx.begin(), idx.end(), 0u);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, num_points - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double shape_miou(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt, int num_labels) {
  if (pred.size() != gt.size()) throw InputError("prediction and ground truth differ in length");
  if (num_labels <= 0) throw InputError("label set is empty");
  std::vector<std::size_t> inter(static_cast<std::size_t>(num_labels), 0), uni(static_cast<std::size_t>(num_labels), 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::int32_t p = pred[i], g = gt[i];
    if (p < 0 || p >= num_labels || g < 0 || g >= num_labels)
      throw InputError("label outside [0, " + std::to_string(num_labels) + ") at point " + std::to_string(i));
    if (p == g) {
      ++inter[static_cast<std::size_t>(p)];
      ++uni[static_cast<std::size_t>(p)];
    } else {
      ++uni[static_cast<std::size_t>(p)];
      ++uni[static_cast<std::size_t>(g)];
    }
  }
  double sum = 0.0;
  for (int l = 0; l < num_labels; ++l) {
    const auto u = uni[static_cast<std::size_t>(l)];
    sum += u == 0 ? 1.0 : static_cast<double>(inter[static_cast<std::size_t>(l)]) / static_cast<double>(u);
  }
  return sum / num_labels;
}

double miou(const std::vector<std::vector<std::int32_t>>& preds, const std::vector<std::vector<std::int32_t>>& gts,
            int num_labels) {
  if (preds.size() != gts.size()) throw InputError("prediction and ground-truth shape counts differ");
  if (preds.empty()) throw InputError("mIoU of an empty shape set");
  double sum = 0.0;
  for (std::size_t s = 0; s < preds.size(); ++s) sum += shape_miou(preds[s], gts[s], num_labels);
  return sum / static_cast<double>(preds.size());
}

namespace {

struct Job {
  std::size_t category;
  Variant variant;
  bool point_axis;
  int value;
  int repeat;
  const PenParams<float>* params;  // null for scratch
};

const PenParams<float>* lookup(const PretrainedModels& models, Variant v, const std::string& category) {
  if (auto it = models.find(std::string(to_string(v)) + "/" + category); it != models.end()) return &it->second;
  if (auto it = models.find(to_string(v)); it != models.end()) return &it->second;
  return nullptr;
}

struct EvalSet {
  std::vector<Mat<float>> points;
  std::vector<std::vector<std::int32_t>> labels;
};

}  // namespace

MetricsTable run_benchmark(const BenchmarkSpec& spec, const std::vector<CategoryData>& data,
                           const PretrainedModels& pretrained, const std::set<std::string>& pretrain_ids,
                           const std::function<void(const MetricsRow&)>& on_row) {
  spec.validate();
  if (data.empty()) throw InputError("benchmark needs at least one category");

  // Everything that can fail is checked before the first cell trains.
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < data.size(); ++c) {
    const CategoryData& cat = data[c];
    if (cat.num_labels <= 0) throw InputError("category " + cat.category + " has no labels");
    if (cat.test.empty()) throw InputError("category " + cat.category + " has no test shapes");
    std::set<std::string> train_ids;
    for (const auto& s : cat.train) train_ids.insert(s.shape_id);
    for (const auto& s : cat.test) {
      if (train_ids.count(s.shape_id))
        throw InputError("test shape " + s.shape_id + " is also in the labelled training pool");
      if (pretrain_ids.count(s.shape_id))
        throw InputError("test shape " + s.shape_id + " was used for pretraining");
    }
    for (int x : spec.x_grid)
      if (static_cast<std::size_t>(x) > cat.train.size())
        throw InputError("x = " + std::to_string(x) + " exceeds the " + std::to_string(cat.train.size()) +
                         " training shapes of " + cat.category);
    if (!spec.point_grid.empty() && static_cast<std::size_t>(spec.fixed_shapes_for_point_grid) > cat.train.size())
      throw InputError("point grid needs " + std::to_string(spec.fixed_shapes_for_point_grid) + " shapes of " +
                       cat.category);
    for (Variant v : spec.variants) {
      if (is_tag_variant(v) && !cat.tagged) continue;
      const PenParams<float>* p = nullptr;
      if (v != Variant::kScratch) {
        p = lookup(pretrained, v, cat.category);
        if (!p) throw ConfigError(std::string("no pretrained parameters for variant ") + to_string(v) +
                                  " (category " + cat.category + ")");
      }
      for (int x : spec.x_grid)
        for (int r = 0; r < spec.repeats; ++r) jobs.push_back({c, v, false, x, r, p});
      for (int n : spec.point_grid)
        for (int r = 0; r < spec.repeats; ++r) jobs.push_back({c, v, true, n, r, p});
    }
  }
  // Fixed evaluation subsets, shared by every cell.
  std::vector<EvalSet> eval(data.size());
  for (std::size_t c = 0; c < data.size(); ++c)
    for (std::size_t i = 0; i < data[c].test.size(); ++i) {
      const PointCloud& cloud = data[c].test[i].cloud;
      if (cloud.semantic_label.size() != cloud.size())
        throw InputError("test shape " + data[c].test[i].shape_id + " has no semantic labels");
      std::vector<std::uint32_t> idx(cloud.size());
      std::iota(idx.begin(), idx.end(), 0u);
      if (spec.eval_points > 0 && spec.eval_points < cloud.size())
        idx = select_labeled_points(cloud.size(), spec.eval_points, derive_seed(spec.seed, {0xe7a1u, c, i}));
      eval[c].points.push_back(points_matrix(cloud, idx));
      std::vector<std::int32_t> gt(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) gt[k] = cloud.semantic_label[idx[k]];
      eval[c].labels.push_back(std::move(gt));
    }

  std::vector<MetricsRow> rows(jobs.size());
  std::mutex writer;
  const auto run = [&](std::size_t j) {
    const auto t0 = std::chrono::steady_clock::now();
    const Job& job = jobs[j];
    const CategoryData& cat = data[job.category];
    // Selection depends on the cell, not the variant, so every variant sees
    // the same labelled data.
    const std::uint64_t cell = derive_seed(spec.seed, {job.category, job.point_axis ? 1u : 0u,
                                                       static_cast<std::uint64_t>(job.value),
                                                       static_cast<std::uint64_t>(job.repeat)});
    std::vector<std::string> ids;
    for (const auto& s : cat.train) ids.push_back(s.shape_id);
    const std::size_t x = job.point_axis ? static_cast<std::size_t>(spec.fixed_shapes_for_point_grid)
                                         : static_cast<std::size_t>(job.value);
    const auto chosen = select_labeled_shapes(ids, x, derive_seed(cell, {1}));
    std::vector<ShapeSample> labeled;
    for (const auto& id : chosen)
      for (const auto& s : cat.train)
        if (s.shape_id == id) {
          labeled.push_back(s);
          break;
        }
    if (job.point_axis)
      for (std::size_t k = 0; k < labeled.size(); ++k) {
        PointCloud& cloud = labeled[k].cloud;
        const auto keep = select_labeled_points(cloud.size(), static_cast<std::size_t>(job.value),
                                                derive_seed(cell, {2, k}));
        std::vector<std::int32_t> masked(cloud.size(), kNone);
        for (std::uint32_t i : keep) masked[i] = cloud.semantic_label[i];
        cloud.semantic_label = std::move(masked);
      }
    TrainConfig cfg = spec.finetune;
    cfg.seed = derive_seed(cell, {3});
    cfg.workers = 1;
    const TrainResult res = finetune_segmentation(job.params, labeled, cat.num_labels, cfg);
    std::vector<std::vector<std::int32_t>> preds;
    for (const auto& pts : eval[job.category].points) preds.push_back(predict_segmentation(res.params, pts));
    MetricsRow row{cat.category,
                   to_string(job.variant),
                   job.point_axis ? "points" : "shapes",
                   job.value,
                   job.repeat,
                   miou(preds, eval[job.category].labels, cat.num_labels),
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
    rows[j] = row;
    if (on_row) {
      std::lock_guard lock(writer);
      on_row(row);
    }
  };

  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(spec.workers), jobs.size());
  if (w <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < w; ++t)
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
          try {
            run(j);
          } catch (...) {
            std::lock_guard lock(writer);
            if (!err) err = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
  }
  return MetricsTable{std::move(rows)};
}

MetricsTable run_benchmark_from_files(const BenchmarkSpec& spec, const std::vector<CategoryData>& data,
                                      const std::map<std::string, std::string>& checkpoint_paths,
                                      const std::set<std::string>& pretrain_ids,
                                      const std::function<void(const MetricsRow&)>& on_row) {
  PretrainedModels models;
  for (const auto& [key, path] : checkpoint_paths) {
    if (!std::filesystem::exists(path)) throw ConfigError("checkpoint for " + key + " not found: " + path);
    try {
      models.emplace(key, load_checkpoint<float>(path).params);
    } catch (const Error& e) {
      throw ConfigError("checkpoint for " + key + " unusable (" + path + "): " + e.what());
    }
  }
  return run_benchmark(spec, data, models, pretrain_ids, on_row);
}

}  // namespace pen
