// `pen` command line: synth, mine, pretrain, finetune, benchmark, export-embeddings.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pen/checkpoint.hpp"
#include "pen/collada.hpp"
#include "pen/error.hpp"
#include "pen/export.hpp"
#include "pen/fewshot.hpp"
#include "pen/mine.hpp"
#include "pen/ply.hpp"
#include "pen/seed.hpp"
#include "pen/synth.hpp"
#include "pen/trainer.hpp"

#ifndef PEN_VERSION
#define PEN_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::mutex g_out_mutex;

void say(const std::string& line) {
  std::lock_guard<std::mutex> lock(g_out_mutex);
  std::cout << line << std::endl;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// Written into every output directory once the command succeeds.
struct RunManifest {
  explicit RunManifest(std::string cmd) : command(std::move(cmd)) {}

  std::string command;
  json config;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs, outputs;
  std::string started = utc_now();

  void write(const fs::path& dir) const {
    ordered_json j;
    j["command"] = command;
    j["config_hash"] = "fnv1a64:" + hex64(pen::fnv1a64(config.dump()));
    j["config"] = config;
    j["seed"] = seed;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["version"] = PEN_VERSION;
    j["started_at"] = started;
    j["finished_at"] = utc_now();
    pen::write_file_atomic((dir / "run_manifest.json").string(), j.dump(2) + "\n");
  }
};

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw pen::IoError("cannot create directory '" + p.string() + "': " + ec.message());
}

json read_json_file(const std::string& path) {
  if (!fs::exists(path)) throw pen::ConfigError("config file '" + path + "' not found");
  try {
    return json::parse(pen::read_file(path));
  } catch (const json::exception& e) {
    throw pen::ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

template <typename T>
T config_from(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw pen::ConfigError("bad " + what + " config: " + e.what());
  }
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw pen::ConfigError("'" + item + "' is not an integer");
    }
  }
  return out;
}

std::set<std::string> parse_name_set(const std::string& s) {
  std::set<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.insert(item);
  return out;
}

std::vector<std::string> concat(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

pen::TrainConfig train_config(const std::string& path) {
  pen::TrainConfig cfg;
  if (!path.empty()) {
    json j = read_json_file(path);
    if (j.contains("train")) j = j["train"];
    cfg = config_from<pen::TrainConfig>(j, "training");
  }
  return cfg;
}

void report_epochs(const pen::TrainReport& r) {
  for (const auto& e : r.epochs) {
    std::ostringstream os;
    os << r.regime << " epoch " << e.epoch << " [" << e.stage << "] loss " << e.train_loss;
    if (e.val_loss) os << " val " << *e.val_loss;
    os << " lr " << e.lr;
    say(os.str());
  }
}

// ---- synth ----

struct SynthArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

void cmd_synth(const SynthArgs& a) {
  RunManifest m("synth");
  pen::SynthConfig cfg = config_from<pen::SynthConfig>(read_json_file(a.config), "synth");
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  make_dir(a.out);
  const auto entries = pen::generate_corpus(cfg, a.out);
  m.config = cfg;
  m.seed = cfg.seed;
  m.inputs = {a.config};
  m.outputs = {(fs::path(a.out) / "manifest.json").string()};
  m.write(a.out);
  say("synth: wrote " + std::to_string(entries.size()) + " shapes to " + a.out);
}

// ---- mine ----

void cmd_mine(const pen::MineOptions& o) {
  RunManifest m("mine");
  make_dir(o.out_dir);
  std::ostringstream log;
  pen::MineSummary s;
  try {
    s = pen::mine_corpus(o, &log);
  } catch (...) {
    std::cerr << log.str();
    throw;
  }
  std::cerr << log.str();
  say("files " + std::to_string(s.files) + ", parsed " + std::to_string(s.parsed) + ", skipped " +
      std::to_string(s.skipped));
  say("filter: kept " + std::to_string(s.kept) + ", too-few " + std::to_string(s.too_few) + ", too-many " +
      std::to_string(s.too_many) + ", no-grouping " + std::to_string(s.no_grouping));
  for (const auto& c : s.json["categories"]) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << "tags " << c["category"].get<std::string>() << ": "
       << c["tags"].size() << " tags, coverage " << c["coverage"].get<double>() * 100.0 << "% ("
       << (c["sufficient"].get<bool>() ? "sufficient" : "insufficient") << ", threshold "
       << pen::kTagSufficiencyThreshold * 100.0 << "%)";
    say(os.str());
  }
  m.config = {{"points", o.points}, {"seed", o.seed}, {"split_seed", o.split_seed},
              {"icp_target", o.icp_target}, {"synonyms_dir", o.synonyms_dir}};
  m.seed = o.seed;
  m.inputs = {o.input_dir};
  if (!o.icp_target.empty()) m.inputs.push_back(o.icp_target);
  m.outputs = {"shapes", "clouds", "tags", "split.json", "summary.json"};
  m.write(o.out_dir);
}

// ---- pretrain ----

struct PretrainArgs {
  std::string data, strategy, out, config, categories;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void cmd_pretrain(const PretrainArgs& a) {
  RunManifest m("pretrain");
  pen::TrainConfig cfg = train_config(a.config);
  if (a.epochs) cfg.max_epochs = *a.epochs;
  if (a.seed) cfg.seed = *a.seed;
  if (a.workers) cfg.workers = *a.workers;
  cfg.validate();
  if (a.strategy != "hierarchy" && a.strategy != "leaf" && a.strategy != "autoencoder")
    throw pen::ConfigError("unknown strategy '" + a.strategy + "' (hierarchy, leaf, autoencoder)");

  const pen::MinedDataset data = pen::load_mined(a.data);
  const auto cats = parse_name_set(a.categories);
  const auto train = data.select(data.split.train, cats);
  const auto val = data.select(data.split.validation, cats);
  say("pretrain " + a.strategy + ": " + std::to_string(train.size()) + " train, " + std::to_string(val.size()) +
      " validation shapes");

  pen::TrainResult r = a.strategy == "autoencoder"
                           ? pen::pretrain_autoencoder(train, val, cfg)
                           : pen::pretrain_triplet(train, val, pen::parse_strategy(a.strategy), cfg);
  const fs::path dir = fs::path(a.out) / a.strategy;
  make_dir(dir);
  const fs::path ckpt = dir / "model.ckpt";
  r.report.final_checkpoint = ckpt.string();
  pen::save_checkpoint(ckpt.string(), r.params, {{"variant", a.strategy}, {"train", cfg}});
  json rep = r.report;
  pen::write_file_atomic((dir / "report.json").string(), rep.dump(2) + "\n");
  report_epochs(r.report);

  m.config = {{"strategy", a.strategy}, {"train", cfg}, {"categories", cats}};
  m.seed = cfg.seed;
  m.inputs = {a.data};
  m.outputs = {ckpt.string(), (dir / "report.json").string()};
  m.write(dir);
  say("wrote " + ckpt.string());
}

// ---- finetune ----

struct FinetuneArgs {
  std::string task, data, checkpoint, category, out, config;
  int shapes = 8;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void cmd_finetune(const FinetuneArgs& a) {
  RunManifest m("finetune");
  pen::TrainConfig cfg = train_config(a.config);
  if (a.epochs) cfg.max_epochs = *a.epochs;
  if (a.seed) cfg.seed = *a.seed;
  if (a.workers) cfg.workers = *a.workers;
  cfg.validate();
  if (a.task != "tags" && a.task != "segmentation")
    throw pen::ConfigError("unknown task '" + a.task + "' (tags, segmentation)");
  if (a.task == "tags" && a.checkpoint.empty()) throw pen::ConfigError("--task tags needs --checkpoint");

  const pen::MinedDataset data = pen::load_mined(a.data);
  if (!data.categories().count(a.category)) throw pen::InputError("category '" + a.category + "' not in dataset");
  std::optional<pen::PenParams<float>> base;
  if (!a.checkpoint.empty()) base = pen::load_checkpoint<float>(a.checkpoint).params;

  const fs::path dir(a.out);
  make_dir(dir);
  ordered_json rep_extra;
  pen::TrainResult r;
  if (a.task == "tags") {
    const auto it = data.vocabularies.find(a.category);
    const int num_tags = it == data.vocabularies.end() ? 0 : static_cast<int>(it->second.tags.size());
    r = pen::finetune_tags(*base, data.select(data.split.train, {a.category}),
                           data.select(data.split.validation, {a.category}), num_tags, cfg);
  } else {
    const int labels = data.num_labels.at(a.category);
    std::vector<std::string> pool;
    for (const auto& s : data.select(data.split.train, {a.category})) pool.push_back(s.shape_id);
    const auto chosen = pen::select_labeled_shapes(pool, static_cast<std::size_t>(a.shapes), cfg.seed);
    r = pen::finetune_segmentation(base ? &*base : nullptr, data.select(chosen), labels, cfg);
    std::vector<std::vector<std::int32_t>> preds, gts;
    for (const auto& s : data.select(data.split.test, {a.category})) {
      preds.push_back(pen::predict_segmentation(r.params, pen::points_matrix(s.cloud)));
      gts.push_back(s.cloud.semantic_label);
    }
    const double score = pen::miou(preds, gts, labels);
    rep_extra["labeled_shapes"] = chosen;
    rep_extra["test_shapes"] = preds.size();
    rep_extra["test_miou"] = score;
    say("test mIoU " + std::to_string(score) + " over " + std::to_string(preds.size()) + " shapes");
  }
  const fs::path ckpt = dir / "model.ckpt";
  r.report.final_checkpoint = ckpt.string();
  pen::save_checkpoint(ckpt.string(), r.params, {{"task", a.task}, {"category", a.category}, {"train", cfg}});
  ordered_json rep = json(r.report);
  for (auto& [k, v] : rep_extra.items()) rep[k] = v;
  pen::write_file_atomic((dir / "report.json").string(), rep.dump(2) + "\n");
  report_epochs(r.report);

  m.config = {{"task", a.task}, {"category", a.category}, {"shapes", a.shapes}, {"train", cfg}};
  m.seed = cfg.seed;
  m.inputs = {a.data};
  if (!a.checkpoint.empty()) m.inputs.push_back(a.checkpoint);
  m.outputs = {ckpt.string(), (dir / "report.json").string()};
  m.write(dir);
  say("wrote " + ckpt.string());
}

// ---- benchmark ----

struct BenchmarkArgs {
  std::string data, checkpoints, variants, x, points, config, out, categories;
  std::optional<int> repeats, workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> eval_points;
};

void cmd_benchmark(const BenchmarkArgs& a) {
  RunManifest m("benchmark");
  pen::BenchmarkSpec spec;
  if (!a.config.empty()) spec = config_from<pen::BenchmarkSpec>(read_json_file(a.config), "benchmark");
  if (!a.variants.empty()) spec.variants = pen::parse_variant_list(a.variants);
  if (!a.x.empty() || !a.points.empty()) {
    spec.x_grid = parse_int_list(a.x);
    spec.point_grid = parse_int_list(a.points);
  }
  if (a.repeats) spec.repeats = *a.repeats;
  if (a.workers) spec.workers = *a.workers;
  if (a.seed) spec.seed = *a.seed;
  if (a.eval_points) spec.eval_points = *a.eval_points;
  spec.validate();

  std::map<std::string, std::string> ckpts;
  std::stringstream ss(a.checkpoints);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size())
      throw pen::ConfigError("--checkpoints entry '" + item + "' is not key=path");
    ckpts[item.substr(0, eq)] = item.substr(eq + 1);
  }

  const pen::MinedDataset data = pen::load_mined(a.data);
  auto cats = parse_name_set(a.categories);
  if (cats.empty()) cats = data.categories();
  std::vector<pen::CategoryData> cds;
  for (const auto& c : cats) {
    const auto lab = data.num_labels.find(c);
    if (lab == data.num_labels.end() || lab->second == 0) {
      say("benchmark: skipping category " + c + " (no semantic labels)");
      continue;
    }
    pen::CategoryData cd;
    cd.category = c;
    cd.num_labels = lab->second;
    cd.train = data.select(data.split.train, {c});
    cd.test = data.select(data.split.test, {c});
    for (const char* v : {"tags", "hierarchy_tags"})
      cd.tagged = cd.tagged || ckpts.count(std::string(v) + "/" + c) || ckpts.count(v);
    cds.push_back(std::move(cd));
  }
  std::set<std::string> pretrain_ids;
  for (const auto& id : concat(data.split.train, data.split.validation)) pretrain_ids.insert(id);

  const auto table = pen::run_benchmark_from_files(spec, cds, ckpts, pretrain_ids, [](const pen::MetricsRow& r) {
    std::ostringstream os;
    os << r.category << " " << r.variant << " " << r.axis << "=" << r.value << " repeat " << r.repeat << " mIoU "
       << std::fixed << std::setprecision(4) << r.miou << " (" << std::setprecision(1) << r.seconds << " s)";
    say(os.str());
  });
  const fs::path dir(a.out);
  make_dir(dir);
  pen::write_file_atomic((dir / "metrics.csv").string(), table.to_csv());
  pen::write_file_atomic((dir / "summary.json").string(), table.summary().dump(2) + "\n");

  json jspec = spec;
  m.config = {{"spec", jspec}, {"checkpoints", ckpts}, {"categories", cats}};
  m.seed = spec.seed;
  m.inputs = {a.data};
  for (const auto& [k, p] : ckpts) m.inputs.push_back(p);
  m.outputs = {(dir / "metrics.csv").string(), (dir / "summary.json").string()};
  m.write(dir);
  say("wrote " + std::to_string(table.rows.size()) + " rows to " + (dir / "metrics.csv").string());
}

// ---- export-embeddings ----

struct ExportArgs {
  std::string checkpoint, out;
  std::vector<std::string> shapes;
  std::size_t points = pen::kStoredCloudSize;
  std::uint64_t seed = 0;
};

pen::PointCloud load_cloud(const fs::path& p, std::size_t points, std::uint64_t seed) {
  const std::string ext = pen::ascii_lower(p.extension().string());
  const std::string bytes = pen::read_file(p.string());
  if (ext == ".ply") return pen::parse_cloud_ply(bytes);
  pen::ShapeRecord r;
  if (ext == ".json")
    r = pen::parse_json_shape(bytes);
  else if (ext == ".dae")
    r = pen::parse_collada(bytes, p.stem().string(), p.parent_path().filename().string());
  else
    throw pen::InputError("'" + p.string() + "' is not a .ply, .json or .dae file");
  pen::Rng rng(pen::derive_seed(seed, {pen::fnv1a64(r.shape_id)}));
  return pen::make_sample(r, points, rng).cloud;
}

void cmd_export(const ExportArgs& a) {
  RunManifest m("export-embeddings");
  const auto params = pen::load_checkpoint<float>(a.checkpoint).params;
  const fs::path dir(a.out);
  make_dir(dir);
  for (const auto& s : a.shapes) {
    const pen::PointCloud cloud = load_cloud(s, a.points, a.seed);
    const Eigen::MatrixXd emb = pen::embed_cloud(params, cloud);
    const fs::path out = dir / (fs::path(s).stem().string() + ".ply");
    pen::write_file_atomic(out.string(), pen::write_embedding_ply(cloud, emb, pen::pca_rgb(emb)));
    m.outputs.push_back(out.string());
    say("wrote " + out.string() + " (" + std::to_string(cloud.size()) + " points)");
  }
  m.config = {{"points", a.points}, {"seed", a.seed}};
  m.seed = a.seed;
  m.inputs = concat({a.checkpoint}, a.shapes);
  m.write(dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Part-hierarchy point embeddings: corpus mining, pretraining and few-shot benchmarks"};
  app.set_version_flag("--version", PEN_VERSION);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic corpus of hierarchical shapes");
  s->add_option("--config", synth.config, "Synth config JSON")->required();
  s->add_option("--out", synth.out, "Output corpus directory")->required();
  s->add_option("--seed", synth.seed, "Override the config seed");

  pen::MineOptions mine;
  auto* mi = app.add_subcommand("mine", "Parse, filter, sample and split a corpus of .dae/.json shapes");
  mi->add_option("--input", mine.input_dir, "Corpus directory")->required();
  mi->add_option("--out", mine.out_dir, "Dataset output directory")->required();
  mi->add_option("--synonyms-dir", mine.synonyms_dir, "Directory of <category>.json synonym maps");
  mi->add_option("--icp-target", mine.icp_target, "PLY cloud every shape is aligned to");
  mi->add_option("--points", mine.points, "Points sampled per shape")->capture_default_str();
  mi->add_option("--seed", mine.seed, "Sampling seed")->capture_default_str();
  mi->add_option("--split-seed", mine.split_seed, "Split seed")->capture_default_str();

  PretrainArgs pre;
  auto* p = app.add_subcommand("pretrain", "Pretrain the embedding network");
  p->add_option("--data", pre.data, "Mined dataset directory")->required();
  p->add_option("--strategy", pre.strategy, "hierarchy, leaf or autoencoder")->required();
  p->add_option("--out", pre.out, "Output root; results go to <out>/<strategy>/")->required();
  p->add_option("--config", pre.config, "Training config JSON");
  p->add_option("--categories", pre.categories, "Comma-separated categories (default all)");
  p->add_option("--epochs", pre.epochs, "Override max_epochs");
  p->add_option("--seed", pre.seed, "Override the training seed");
  p->add_option("--workers", pre.workers, "Worker threads");

  FinetuneArgs ft;
  auto* f = app.add_subcommand("finetune", "Fine-tune on tags or few-shot segmentation labels");
  f->add_option("--task", ft.task, "tags or segmentation")->required();
  f->add_option("--data", ft.data, "Mined dataset directory")->required();
  f->add_option("--checkpoint", ft.checkpoint, "Pretrained checkpoint (segmentation trains from scratch without)");
  f->add_option("--category", ft.category, "Category to fine-tune on")->required();
  f->add_option("--out", ft.out, "Output directory")->required();
  f->add_option("--config", ft.config, "Training config JSON");
  f->add_option("--shapes", ft.shapes, "Labelled shapes for segmentation")->capture_default_str();
  f->add_option("--epochs", ft.epochs, "Override max_epochs");
  f->add_option("--seed", ft.seed, "Override the training seed");
  f->add_option("--workers", ft.workers, "Worker threads");

  BenchmarkArgs bm;
  auto* b = app.add_subcommand("benchmark", "Few-shot segmentation benchmark");
  b->add_option("--data", bm.data, "Mined dataset directory")->required();
  b->add_option("--checkpoints", bm.checkpoints, "variant[/category]=path,...");
  b->add_option("--variants", bm.variants, "Comma-separated variants");
  b->add_option("--x", bm.x, "Labelled-shape grid, e.g. 4,8");
  b->add_option("--points", bm.points, "Labelled-point grid, e.g. 20,40");
  b->add_option("--repeats", bm.repeats, "Repeats per cell");
  b->add_option("--config", bm.config, "Benchmark config JSON");
  b->add_option("--categories", bm.categories, "Comma-separated categories (default all)");
  b->add_option("--seed", bm.seed, "Benchmark seed");
  b->add_option("--eval-points", bm.eval_points, "Points per test shape (0 = all)");
  b->add_option("--workers", bm.workers, "Worker threads");
  b->add_option("--out", bm.out, "Output directory")->required();

  ExportArgs ex;
  auto* e = app.add_subcommand("export-embeddings", "Write per-point embeddings and a PCA colour map as PLY");
  e->add_option("--checkpoint", ex.checkpoint, "Checkpoint")->required();
  e->add_option("--shapes", ex.shapes, "Shape files (.ply clouds, .json or .dae)")->required();
  e->add_option("--out", ex.out, "Output directory")->required();
  e->add_option("--points", ex.points, "Points sampled from mesh shapes")->capture_default_str();
  e->add_option("--seed", ex.seed, "Sampling seed for mesh shapes")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    std::cerr << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 2;
  }

  CLI::App* used = app.get_subcommands().front();
  try {
    if (used == s) cmd_synth(synth);
    else if (used == mi) cmd_mine(mine);
    else if (used == p) cmd_pretrain(pre);
    else if (used == f) cmd_finetune(ft);
    else if (used == b) cmd_benchmark(bm);
    else if (used == e) cmd_export(ex);
  } catch (const pen::ConfigError& err) {
    std::cerr << "error: config: " << err.what() << "\n\n" << used->help();
    return 2;
  } catch (const pen::Error& err) {
    std::cerr << "error: " << err.kind() << ": " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
