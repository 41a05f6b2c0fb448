// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance [--criteria 1,2,...]

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "gradcheck.hpp"
#include "mine_golden.hpp"
#include "pen/checkpoint.hpp"
#include "pen/fewshot.hpp"
#include "pen/geometry.hpp"
#include "pen/mine.hpp"
#include "pen/seed.hpp"
#include "pen/synth.hpp"
#include "sampling_checks.hpp"

using namespace pen;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

Mat<float> random_points(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1, 1);
  Mat<float> p(3, n);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  return p;
}

// Tree whose node i hangs below one of the `window` previous nodes, so small
// windows give deep trees.
PartHierarchy windowed_tree(std::size_t nodes, std::size_t window, std::mt19937_64& rng) {
  std::vector<NodeSpec> specs(nodes);
  std::vector<int> kids(nodes, 0);
  for (std::size_t i = 1; i < nodes; ++i) {
    const std::size_t lo = i > window ? i - window : 0;
    const auto p = std::uniform_int_distribution<std::size_t>(lo, i - 1)(rng);
    specs[i].parent = static_cast<std::uint32_t>(p);
    ++kids[p];
  }
  GeometryId g = 0;
  for (std::size_t i = 0; i < nodes; ++i) {
    specs[i].name = "n" + std::to_string(i);
    if (kids[i] == 0) specs[i].geometry = g++;
  }
  return PartHierarchy::build(specs);
}

Outcome tree_metric() {
  std::mt19937_64 rng(1001);
  std::size_t trees = 0, pairs = 0, mismatches = 0, axiom_failures = 0, max_leaves = 0;
  while (trees < 1000) {
    const std::size_t nodes = std::uniform_int_distribution<std::size_t>(1, 900)(rng);
    const std::size_t window = trees % 2 ? 3 : nodes;  // alternate deep and bushy shapes
    const PartHierarchy t = windowed_tree(nodes, window, rng);
    if (t.num_leaves() > 500) continue;
    ++trees;
    max_leaves = std::max(max_leaves, t.num_leaves());
    const auto adj = test::adjacency(t);
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(t.size() - 1));
    // BFS from random sources against every node
    for (int k = 0; k < 16; ++k) {
      const std::uint32_t a = pick(rng);
      const auto d = test::bfs_distances(adj, a);
      for (std::uint32_t b = 0; b < t.size(); ++b) {
        ++pairs;
        mismatches += tree_distance(t, NodeId{a}, NodeId{b}) != d[b];
      }
    }
    for (int k = 0; k < 200; ++k) {
      const NodeId a{pick(rng)}, b{pick(rng)}, c{pick(rng)};
      const auto ab = tree_distance(t, a, b), ba = tree_distance(t, b, a), bc = tree_distance(t, b, c),
                 ac = tree_distance(t, a, c);
      const bool ok = tree_distance(t, a, a) == 0 && ab == ba && ((ab == 0) == (a == b)) && ac <= ab + bc;
      axiom_failures += !ok;
    }
  }
  return {mismatches == 0 && axiom_failures == 0,
          std::to_string(trees) + " trees (max " + std::to_string(max_leaves) + " leaves), " + std::to_string(pairs) +
              " pairs, " + std::to_string(mismatches) + " distance mismatches, " + std::to_string(axiom_failures) +
              " metric-axiom failures"};
}

Outcome sampling() {
  std::mt19937_64 rng(2002);
  double worst = 0;
  int done = 0;
  while (done < 50) {
    const auto t = test::random_tree(std::uniform_int_distribution<std::size_t>(4, 14)(rng), rng);
    if (t.num_leaves() < 2 || t.num_leaves() > 8) continue;
    ++done;
    worst = std::max(worst, test::hierarchy_pair_l1(t, 100000, 7000 + done));
  }
  double min_p = 1;
  for (std::size_t leaves : {3, 6, 10}) min_p = std::min(min_p, test::flat_tree_strategy_pvalue(leaves, 60000, leaves));
  return {worst < 0.02 && min_p > 0.01, "50 hierarchies, worst L1 " + fmt(worst) + " (< 0.02); flat trees (3, 6, 10 "
                                        "leaves) min chi-square p " + fmt(min_p) + " (> 0.01)"};
}

Outcome gradients() {
  std::ostringstream os;
  bool pass = true;
  for (auto kind : {test::LossKind::kTriplet, test::LossKind::kTag, test::LossKind::kSeg,
                    test::LossKind::kAutoencoder}) {
    double worst = 0;
    std::size_t excluded = 0, checked = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto r = test::network_gradient_check(kind, 3000 + seed);
      worst = std::max(worst, r.rel_error);
      excluded += r.excluded;
      checked += r.checked;
      pass = pass && r.checked > 0;
    }
    pass = pass && worst < 1e-4;
    os << test::to_string(kind) << " 20 instances max rel " << fmt(worst, 3) << " (" << checked << " coords, "
       << excluded << " at kinks); ";
  }
  return {pass, os.str()};
}

Outcome architecture() {
  std::mt19937_64 rng(4004);
  bool invariant = true, equivariant = true;
  double worst_norm = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = PenParams<float>::init(ArchConfig{}, seed);
    const Mat<float> pts = random_points(500, rng);
    std::vector<Eigen::Index> perm(500);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Mat<float> shuffled(3, 500);
    for (Eigen::Index i = 0; i < 500; ++i) shuffled.col(i) = pts.col(perm[i]);
    const auto a = forward(p, pts), b = forward(p, shuffled);
    invariant = invariant && a.global == b.global;
    for (Eigen::Index i = 0; i < 500; ++i) equivariant = equivariant && b.embedding.col(i) == a.embedding.col(perm[i]);
    worst_norm = std::max<double>(worst_norm, (a.embedding.colwise().norm().array() - 1.0f).abs().maxCoeff());
  }
  ArchConfig heads;
  heads.num_tags = 5;
  heads.num_labels = 4;
  heads.ae_points = 64;
  const auto p = PenParams<float>::init(heads, 9);
  const auto q = decode_checkpoint<float>(encode_checkpoint(p)).params;
  const auto tp = tensors(p), tq = tensors(q);
  bool exact = tp.size() == tq.size() && p.arch == q.arch;
  for (std::size_t i = 0; exact && i < tp.size(); ++i)
    exact = tp[i].name == tq[i].name && tp[i].tensor->rows() == tq[i].tensor->rows() &&
            tp[i].tensor->cols() == tq[i].tensor->cols() &&
            std::memcmp(tp[i].tensor->data(), tq[i].tensor->data(), sizeof(float) * tp[i].tensor->size()) == 0;
  return {invariant && equivariant && worst_norm < 1e-6 && exact,
          std::string("global invariant ") + (invariant ? "yes" : "no") + ", embeddings equivariant " +
              (equivariant ? "yes" : "no") + ", max | |e| - 1 | " + fmt(worst_norm, 3) + ", checkpoint bit-exact " +
              (exact ? "yes" : "no")};
}

Outcome closed_forms() {
  double worst = 0;
  for (int L : {2, 3, 5, 10}) {
    const std::vector<std::int32_t> labels{0, L - 1, 1};
    worst = std::max(worst, std::abs(seg_loss<double>(Mat<double>::Zero(L, 3), labels).loss - std::log(double(L))));
  }
  const std::vector<std::int32_t> one{0};
  worst = std::max(worst,
                   std::abs(tag_loss<double>(Mat<double>::Constant(2, 1, 0.5), one).loss - 2 * std::log(2.0)));
  Mat<double> emb = Mat<double>::Zero(64, 9);
  emb.row(3).setOnes();
  const std::vector<Triplet> trips{{0, 1, 2}, {3, 4, 5}, {6, 7, 8}};
  for (double m : {0.2, 0.5, 1.0}) worst = std::max(worst, std::abs(triplet_loss<double>(emb, trips, m).loss - m));
  Eigen::Matrix3Xd a(3, 1), b(3, 1);
  a << 0.1, -0.2, 0.3;
  b = a;
  b(0, 0) += 0.6;
  b(1, 0) += 0.8;
  worst = std::max(worst, std::abs(chamfer(a, b) - 2.0));
  return {worst < 1e-12, "CE = ln L, BCE = 2 ln 2, triplet = m, chamfer = 2; max error " + fmt(worst, 3)};
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> g;
  Eigen::Vector3d axis(g(rng), g(rng), g(rng));
  axis.normalize();
  return Eigen::AngleAxisd(std::uniform_real_distribution<double>(0, max_angle)(rng), axis).toRotationMatrix();
}

Outcome icp() {
  SynthConfig cfg;
  cfg.seed = 6006;
  cfg.categories = {{"airplane", 3, 0.0}, {"chair", 3, 0.0}};
  const auto records = generate_records(cfg);
  std::mt19937_64 rng(6007);
  std::uniform_real_distribution<double> shift(-0.1, 0.1);
  int recovered = 0;
  double worst_rot = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Rng srng(derive_seed(6008, {static_cast<std::uint64_t>(trial)}));
    const auto src = normalize_cloud(sample_surface(records[trial % records.size()].mesh, 2000, srng));
    const Eigen::Matrix3d rotation = random_rotation(rng, 30.0 * M_PI / 180.0);
    const RigidTransform truth{rotation, Eigen::Vector3d(shift(rng), shift(rng), shift(rng))};
    PointCloud tgt = src;
    tgt.points = truth.apply(src.points);
    const auto r = icp_align(src, tgt);
    const double rot = rotation_angle_between(r.transform.rotation, truth.rotation);
    const double trans = (r.transform.translation - truth.translation).norm();
    if (rot < 1e-3 && trans < 1e-4) ++recovered;
    worst_rot = std::max(worst_rot, rot);
  }
  return {recovered >= 95, std::to_string(recovered) + "/100 recovered (need 95), worst rotation error " +
                               fmt(worst_rot, 3) + " rad"};
}

Outcome miou_cases() {
  const std::vector<std::int32_t> gt{0, 1, 1, 2, 2, 2};
  const double identity = shape_miou(gt, gt, 3);
  std::vector<std::int32_t> g(200), p(200);
  for (int i = 0; i < 200; ++i) {
    g[i] = i < 100 ? 0 : 1;
    p[i] = i < 50 ? 0 : 1;
  }
  const double hand = shape_miou(p, g, 2);
  std::mt19937_64 rng(7007);
  std::uniform_int_distribution<int> pick(0, 5);
  std::vector<std::int32_t> a(500), b(500), perm{4, 2, 0, 5, 1, 3}, pa(500), pb(500);
  for (int i = 0; i < 500; ++i) {
    a[i] = pick(rng);
    b[i] = pick(rng);
    pa[i] = perm[a[i]];
    pb[i] = perm[b[i]];
  }
  const double relabel = std::abs(shape_miou(a, b, 6) - shape_miou(pa, pb, 6));
  // 0.5833 = (50/100 + 100/150) / 2
  return {identity == 1.0 && std::abs(hand - 7.0 / 12.0) <= 1e-6 && relabel < 1e-12,
          "identity " + fmt(identity) + ", constructed example " + fmt(hand, 7) + ", relabeling difference " +
              fmt(relabel, 3)};
}

// Directional replication on a synthetic corpus: chair (tagged), table and
// airplane, 200 shapes each.
Outcome ordering() {
  SynthConfig sc;
  sc.seed = 7;
  sc.categories = {{"chair", 200, 0.35}, {"table", 200, 0.0}, {"airplane", 200, 0.0}};
  const auto records = generate_records(sc);

  std::vector<ShapeSample> pre_train, pre_val, chair_train, chair_val;
  std::vector<CategoryData> data;
  std::set<std::string> pre_ids;
  std::size_t chair_tags = 0;
  for (const auto& c : sc.categories) {
    std::vector<const ShapeRecord*> cat;
    std::vector<std::string> ids;
    std::map<std::string, const ShapeRecord*> by_id;
    for (const auto& r : records)
      if (r.category == c.archetype) {
        cat.push_back(&r);
        ids.push_back(r.shape_id);
        by_id[r.shape_id] = &r;
      }
    TagExtractionConfig tc;
    tc.synonyms = archetype(c.archetype).synonyms;
    const auto vocab = extract_tags(cat, c.archetype, tc);
    const auto split = split_dataset(ids, 11);
    CategoryData cd;
    cd.category = c.archetype;
    cd.num_labels = static_cast<int>(archetype(c.archetype).labels.size());
    cd.tagged = c.p_tag > 0;
    const auto sample = [&](const std::string& id) {
      Rng rng(derive_seed(3, {fnv1a64(id)}));
      return make_sample(*by_id.at(id), kStoredCloudSize, rng, &vocab);
    };
    for (const auto& id : split.train) {
      auto s = sample(id);
      pre_train.push_back(s);
      if (cd.tagged) chair_train.push_back(s);
      cd.train.push_back(std::move(s));
      pre_ids.insert(id);
    }
    for (const auto& id : split.validation) {
      auto s = sample(id);
      if (cd.tagged) chair_val.push_back(s);
      pre_val.push_back(std::move(s));
      pre_ids.insert(id);
    }
    for (const auto& id : split.test) cd.test.push_back(sample(id));
    if (cd.tagged) chair_tags = vocab.tags.size();
    data.push_back(std::move(cd));
  }

  TrainConfig pc;
  pc.subsample_points = 1024;
  pc.max_epochs = 10;
  pc.seed = 1;
  PretrainedModels models;
  const auto hierarchy = pretrain_triplet(pre_train, pre_val, SamplingStrategy::kHierarchy, pc);
  models["hierarchy"] = hierarchy.params;
  models["autoencoder"] = pretrain_autoencoder(pre_train, pre_val, pc).params;
  models["hierarchy_tags/chair"] =
      finetune_tags(hierarchy.params, chair_train, chair_val, static_cast<int>(chair_tags), pc).params;

  BenchmarkSpec spec;
  spec.x_grid = {4, 8};
  spec.point_grid = {};
  spec.repeats = 5;
  spec.variants = {Variant::kScratch, Variant::kAutoencoder, Variant::kHierarchy, Variant::kHierarchyTags};
  spec.eval_points = 2048;
  spec.finetune.subsample_points = 512;
  spec.finetune.head_epochs = 60;
  spec.finetune.full_epochs = 40;
  const auto table = run_benchmark(spec, data, models, pre_ids);

  // mean over repeats, and over categories for the overall comparison
  std::map<std::tuple<std::string, std::string, int>, std::pair<double, int>> cell;
  for (const auto& r : table.rows) {
    auto& c = cell[{r.category, r.variant, r.value}];
    c.first += r.miou;
    ++c.second;
  }
  const auto mean = [&](const std::string& cat, const std::string& variant, int x) {
    const auto& c = cell.at({cat, variant, x});
    return c.first / c.second;
  };
  const auto overall = [&](const std::string& variant, int x) {
    double s = 0;
    for (const auto& d : data) s += mean(d.category, variant, x);
    return s / static_cast<double>(data.size());
  };
  bool pass = true;
  std::ostringstream os;
  for (int x : spec.x_grid) {
    const double scratch = overall("scratch", x), hier = overall("hierarchy", x), ae = overall("autoencoder", x);
    const double h_chair = mean("chair", "hierarchy", x), ht_chair = mean("chair", "hierarchy_tags", x);
    const bool gap = hier - scratch >= 0.03, ae_ok = ae >= scratch, tags_ok = ht_chair >= h_chair;
    pass = pass && gap && ae_ok && tags_ok;
    os << "x=" << x << ": scratch " << fmt(scratch) << ", hierarchy " << fmt(hier) << " (gap " << fmt(100 * (hier - scratch), 3)
       << (gap ? " >= 3" : " < 3") << "), autoencoder " << fmt(ae) << (ae_ok ? " >= scratch" : " < scratch")
       << ", chair hierarchy+tags " << fmt(ht_chair) << (tags_ok ? " >= " : " < ") << "hierarchy " << fmt(h_chair)
       << "; ";
  }
  return {pass, os.str()};
}

Outcome corpus_pipeline() {
  const fs::path out = fs::temp_directory_path() / "pen_acceptance_mine";
  fs::remove_all(out);
  MineOptions opts;
  opts.input_dir = test::fixture("mine_corpus");
  opts.out_dir = out.string();
  opts.points = 2000;
  mine_corpus(opts);
  const auto diffs = test::compare_mine_golden(out.string(), test::fixture("mine_golden.json"));
  fs::remove_all(out);
  std::string detail = diffs.empty() ? "summary, vocabularies and verdicts match the golden file" : "";
  for (const auto& d : diffs) detail += d + "; ";
  return {diffs.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::vector<int> selected;
  app.add_option("--criteria", selected, "Criteria to run (default all)")->delimiter(',')->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  // runtime limits in seconds; 0 means none for that criterion
  const std::map<int, std::pair<Outcome (*)(), double>> criteria{
      {1, {tree_metric, 30}},  {2, {sampling, 120}},     {3, {gradients, 120}},
      {4, {architecture, 0}},  {5, {closed_forms, 0}},   {6, {icp, 60}},
      {7, {miou_cases, 0}},    {8, {ordering, 45 * 60}}, {9, {corpus_pipeline, 0}}};
  bool all = true;
  for (int id : selected) {
    const auto [run, limit] = criteria.at(id);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit > 0 && secs >= limit) {
      o.pass = false;
      o.detail += " over the " + fmt(limit) + " s budget;";
    }
    all = all && o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << " [" << fmt(secs, 3)
              << " s]" << std::endl;
  }
  return all ? 0 : 1;
}
