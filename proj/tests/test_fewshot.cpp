#include <numeric>
#include <set>

#include "doctest.h"
#include "pen/error.hpp"
#include "pen/fewshot.hpp"
#include "pen/seed.hpp"
#include "pen/synth.hpp"
#include "support.hpp"

using namespace pen;

TEST_CASE("mIoU") {
  const std::vector<std::int32_t> gt{0, 0, 1, 2, 2, 2};
  CHECK(shape_miou(gt, gt, 3) == 1.0);

  // label 0: pred 50, gt 100, overlap 50; label 1: pred 150, gt 100, overlap 100
  std::vector<std::int32_t> g(200), p(200);
  for (int i = 0; i < 200; ++i) {
    g[i] = i < 100 ? 0 : 1;
    p[i] = i < 50 ? 0 : 1;
  }
  CHECK(std::abs(shape_miou(p, g, 2) - (0.5 + 100.0 / 150.0) / 2) < 1e-12);
  CHECK(std::abs(shape_miou(p, g, 2) - 0.5833) < 1e-4 + 1e-6);
  // a label absent from both counts as 1
  CHECK(std::abs(shape_miou(p, g, 3) - (0.5 + 100.0 / 150.0 + 1.0) / 3) < 1e-12);

  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> pick(0, 4);
  std::vector<std::int32_t> a(300), b(300);
  for (int i = 0; i < 300; ++i) {
    a[i] = pick(rng);
    b[i] = pick(rng);
  }
  std::vector<std::int32_t> perm{3, 0, 4, 1, 2};
  std::vector<std::int32_t> pa(300), pb(300);
  for (int i = 0; i < 300; ++i) {
    pa[i] = perm[a[i]];
    pb[i] = perm[b[i]];
  }
  CHECK(shape_miou(a, b, 5) == doctest::Approx(shape_miou(pa, pb, 5)).epsilon(1e-14));

  CHECK(miou({gt, p}, {gt, g}, 3) == doctest::Approx((1.0 + shape_miou(p, g, 3)) / 2));
  const std::vector<std::int32_t> out_of_range{0, 3};
  CHECK_THROWS_AS(shape_miou(out_of_range, std::vector<std::int32_t>{0, 1}, 3), InputError);
  CHECK_THROWS_AS(shape_miou(gt, std::vector<std::int32_t>{0}, 3), InputError);
}

TEST_CASE("labelled shape and point selection") {
  std::vector<std::string> split;
  for (int i = 0; i < 30; ++i) split.push_back("s" + std::to_string(i));
  const auto all = select_labeled_shapes(split, 30, 4);
  CHECK(std::set<std::string>(all.begin(), all.end()) == std::set<std::string>(split.begin(), split.end()));
  CHECK(select_labeled_shapes(split, 8, 4) == select_labeled_shapes(split, 8, 4));
  CHECK(select_labeled_shapes(split, 8, 4) != select_labeled_shapes(split, 8, 5));
  const auto eight = select_labeled_shapes(split, 8, 9);
  CHECK(std::set<std::string>(eight.begin(), eight.end()).size() == 8);
  CHECK_THROWS_AS(select_labeled_shapes(split, 31, 4), InputError);

  const auto full = select_labeled_points(40, 40, 1);
  std::vector<std::uint32_t> iota(40);
  std::iota(iota.begin(), iota.end(), 0u);
  CHECK(full == iota);
  CHECK_THROWS_AS(select_labeled_points(40, 41, 1), InputError);

  // uniform inclusion frequency
  const std::size_t n_points = 50, n = 10, trials = 200000;
  std::vector<std::size_t> hits(n_points, 0);
  for (std::size_t s = 0; s < trials; ++s) {
    const auto sel = select_labeled_points(n_points, n, s);
    CHECK_MESSAGE(sel.size() == n, "seed " << s);
    for (auto i : sel) ++hits[i];
  }
  const double expected = double(trials) * n / n_points;
  double worst = 0;
  for (auto h : hits) worst = std::max(worst, std::abs(h - expected) / expected);
  INFO("worst relative deviation " << worst);
  CHECK(worst < 0.02);
}

namespace {

struct SmokeData {
  std::vector<CategoryData> data;
  std::set<std::string> pretrain_ids;
};

SmokeData smoke_data() {
  SynthConfig cfg;
  cfg.seed = 3;
  cfg.categories = {{"table", 16, 0.0}};
  const auto records = generate_records(cfg);
  SmokeData d;
  CategoryData cat;
  cat.category = "table";
  cat.num_labels = static_cast<int>(archetype("table").labels.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    Rng rng(derive_seed(1, {i}));
    auto s = make_sample(records[i], 512, rng);
    if (i < 10) cat.train.push_back(std::move(s));
    else if (i < 13) cat.test.push_back(std::move(s));
    else d.pretrain_ids.insert(s.shape_id);
  }
  d.data.push_back(std::move(cat));
  return d;
}

BenchmarkSpec smoke_spec() {
  BenchmarkSpec s;
  s.x_grid = {4, 8};
  s.point_grid = {};
  s.repeats = 2;
  s.variants = {Variant::kScratch, Variant::kHierarchy};
  s.eval_points = 256;
  s.finetune.head_epochs = 2;
  s.finetune.full_epochs = 2;
  s.finetune.subsample_points = 128;
  return s;
}

}  // namespace

TEST_CASE("benchmark smoke run") {
  const auto d = smoke_data();
  PretrainedModels models{{"hierarchy", PenParams<float>::init(test::small_arch(), 1)}};
  const BenchmarkSpec spec = smoke_spec();
  std::size_t streamed = 0;
  const auto table = run_benchmark(spec, d.data, models, d.pretrain_ids, [&](const MetricsRow&) { ++streamed; });
  CHECK(table.rows.size() == 2u * 2u * 2u);
  CHECK(streamed == table.rows.size());
  for (const auto& r : table.rows) {
    CHECK(r.miou >= 0.0);
    CHECK(r.miou <= 1.0);
  }
  const std::string csv = table.to_csv();
  CHECK(csv.rfind("category,variant,axis,value,repeat,miou,seconds\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 8);

  // summary means equal recomputed means
  const auto summary = table.summary();
  for (const auto& cell : summary["cells"]) {
    double sum = 0;
    int count = 0;
    for (const auto& r : table.rows)
      if (r.variant == cell["variant"] && r.value == cell["value"] && r.axis == cell["axis"]) {
        sum += r.miou;
        ++count;
      }
    CHECK(count == 2);
    CHECK(cell["mean"].get<double>() == doctest::Approx(sum / count).epsilon(1e-12));
  }

  BenchmarkSpec par = spec;
  par.workers = 2;
  const auto again = run_benchmark(par, d.data, models, d.pretrain_ids);
  REQUIRE(again.rows.size() == table.rows.size());
  for (std::size_t i = 0; i < again.rows.size(); ++i) CHECK(again.rows[i].miou == table.rows[i].miou);
}

TEST_CASE("benchmark preconditions are checked before training") {
  const auto d = smoke_data();
  const BenchmarkSpec spec = smoke_spec();
  CHECK_THROWS_AS(run_benchmark(spec, d.data, {}, d.pretrain_ids), ConfigError);
  CHECK_THROWS_AS(run_benchmark_from_files(spec, d.data, {{"hierarchy", "/nonexistent/h.ckpt"}}, d.pretrain_ids),
                  ConfigError);
  PretrainedModels models{{"hierarchy", PenParams<float>::init(test::small_arch(), 1)}};
  auto overlap = d.pretrain_ids;
  overlap.insert(d.data[0].test[0].shape_id);
  CHECK_THROWS_AS(run_benchmark(spec, d.data, models, overlap), InputError);
  auto leaked = d.data;
  leaked[0].test.push_back(leaked[0].train[0]);
  CHECK_THROWS_AS(run_benchmark(spec, leaked, models, d.pretrain_ids), InputError);
  BenchmarkSpec big = spec;
  big.x_grid = {11};
  CHECK_THROWS_AS(run_benchmark(big, d.data, models, d.pretrain_ids), InputError);
  BenchmarkSpec bad = spec;
  bad.repeats = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(parse_variant("pointnet"), ConfigError);
  CHECK(parse_variant_list("scratch,hierarchy_tags") ==
        std::vector<Variant>{Variant::kScratch, Variant::kHierarchyTags});
}
