#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pen/trainer.hpp"

namespace pen {

enum class Variant { kScratch, kAutoencoder, kLeaf, kHierarchy, kTags, kHierarchyTags };

const char* to_string(Variant v);
/// Accepts scratch, autoencoder, leaf, hierarchy, tags, hierarchy_tags.
Variant parse_variant(const std::string& name);
std::vector<Variant> parse_variant_list(const std::string& comma_separated);
std::vector<Variant> all_variants();
bool is_tag_variant(Variant v);

struct BenchmarkSpec {
  std::vector<int> x_grid{4, 8, 12, 20, 40, 60, 120};
  std::vector<int> point_grid{20, 40, 60, 100, 200, 500};
  int fixed_shapes_for_point_grid = 8;
  int repeats = 5;
  std::vector<Variant> variants = all_variants();
  std::uint64_t seed = 0;
  std::size_t eval_points = 0;  // points per test shape; 0 means all stored points
  int workers = 1;
  TrainConfig finetune;

  void validate() const;
};

void to_json(nlohmann::json& j, const BenchmarkSpec& s);
void from_json(const nlohmann::json& j, BenchmarkSpec& s);

/// Labelled pool and test shapes of one category.
struct CategoryData {
  std::string category;
  int num_labels = 0;
  std::vector<ShapeSample> train;
  std::vector<ShapeSample> test;
  bool tagged = false;  // tag variants only run on categories with a tag checkpoint
};

struct MetricsRow {
  std::string category;
  std::string variant;
  std::string axis;  // "shapes" or "points"
  int value = 0;
  int repeat = 0;
  double miou = 0.0;
  double seconds = 0.0;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;

  /// Header `category,variant,axis,value,repeat,miou,seconds`.
  std::string to_csv() const;
  /// Mean and sample standard deviation per (category, variant, axis, value),
  /// plus the mean over categories per (variant, axis, value).
  nlohmann::json summary() const;
};

/// Deterministic sample of `x` ids without replacement. Throws InputError
/// when `x` exceeds the split.
std::vector<std::string> select_labeled_shapes(const std::vector<std::string>& split, std::size_t x,
                                               std::uint64_t seed);

/// Uniform sample of `n` distinct point indices in [0, num_points), sorted.
std::vector<std::uint32_t> select_labeled_points(std::size_t num_points, std::size_t n, std::uint64_t seed);

/// Mean over labels of IoU, with IoU = 1 for labels absent from both.
double shape_miou(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt, int num_labels);
/// Mean over shapes of shape_miou.
double miou(const std::vector<std::vector<std::int32_t>>& preds, const std::vector<std::vector<std::int32_t>>& gts,
            int num_labels);

/// Pretrained parameters keyed by variant name ("autoencoder", "leaf",
/// "hierarchy", ...) or by "<variant>/<category>" for per-category ones; the
/// per-category key wins.
using PretrainedModels = std::map<std::string, PenParams<float>>;

/// Runs every (category, variant, axis, value, repeat) cell. Throws
/// ConfigError when a variant lacks parameters and InputError when test
/// shapes overlap training or pretraining shapes, both before any training.
/// `on_row` (optional) receives rows as they finish, one at a time.
MetricsTable run_benchmark(const BenchmarkSpec& spec, const std::vector<CategoryData>& data,
                           const PretrainedModels& pretrained, const std::set<std::string>& pretrain_ids,
                           const std::function<void(const MetricsRow&)>& on_row = {});

/// Same, loading checkpoints from disk first (missing files are ConfigErrors).
MetricsTable run_benchmark_from_files(const BenchmarkSpec& spec, const std::vector<CategoryData>& data,
                                      const std::map<std::string, std::string>& checkpoint_paths,
                                      const std::set<std::string>& pretrain_ids,
                                      const std::function<void(const MetricsRow&)>& on_row = {});

}  // namespace pen
