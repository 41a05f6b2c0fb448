#include "pen/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "pen/error.hpp"
#include "pen/seed.hpp"

namespace pen {

void TrainConfig::validate() const {
  if (batch_shapes == 0 || subsample_points == 0 || triplets_per_shape == 0 || ae_points == 0)
    throw ConfigError("training counts must be positive");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(decay_factor > 1.0)) throw ConfigError("decay_factor must exceed 1");
  if (plateau_patience < 1) throw ConfigError("plateau_patience must be at least 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (head_epochs < 0 || full_epochs < 0 || head_epochs + full_epochs < 1)
    throw ConfigError("fine-tuning needs a non-negative, non-zero epoch budget");
  if (trunk_lr_scale < 0.0) throw ConfigError("trunk_lr_scale must be non-negative");
  if (margin < 0.0) throw ConfigError("margin must be non-negative");
  if (workers < 1) throw ConfigError("workers must be at least 1");
}

void to_json(nlohmann::json& j, const TrainReport& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    nlohmann::json row{{"epoch", e.epoch}, {"stage", e.stage}, {"train_loss", e.train_loss}, {"lr", e.lr}};
    row["val_loss"] = e.val_loss ? nlohmann::json(*e.val_loss) : nlohmann::json(nullptr);
    epochs.push_back(std::move(row));
  }
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : r.events)
    events.push_back({{"epoch", e.epoch}, {"kind", e.kind}, {"lr_before", e.lr_before}, {"lr_after", e.lr_after}});
  j = nlohmann::json{{"regime", r.regime},         {"epochs", epochs},
                     {"events", events},           {"best_epoch", r.best_epoch},
                     {"skipped_shapes", r.skipped_shapes}, {"wall_seconds", r.wall_seconds},
                     {"final_checkpoint", r.final_checkpoint}};
}

PlateauScheduler::PlateauScheduler(double lr, double factor, int patience, double threshold, double min_lr)
    : lr_(lr), factor_(factor), threshold_(threshold), min_lr_(min_lr), patience_(patience) {}

bool PlateauScheduler::observe(double metric) {
  improved_ = !best_ || metric < *best_ * (1.0 - threshold_);
  if (improved_) {
    best_ = metric;
    bad_ = 0;
    return false;
  }
  if (++bad_ < patience_) return false;
  lr_ /= factor_;
  bad_ = 0;
  if (lr_ < min_lr_) ++decays_below_min_;
  return true;
}

std::vector<std::uint32_t> subsample_indices(std::size_t total, std::size_t n, Rng& rng,
                                             const std::vector<std::int32_t>* priority) {
  std::vector<std::uint32_t> first, rest;
  for (std::uint32_t i = 0; i < total; ++i) {
    if (priority && (*priority)[i] != kNone)
      first.push_back(i);
    else
      rest.push_back(i);
  }
  const auto take = [&rng](std::vector<std::uint32_t>& v, std::size_t k) {
    k = std::min(k, v.size());
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, v.size() - 1);
      std::swap(v[i], v[pick(rng)]);
    }
    v.resize(k);
  };
  take(first, n);
  take(rest, n - first.size());
  first.insert(first.end(), rest.begin(), rest.end());
  return first;
}

Mat<float> points_matrix(const PointCloud& cloud, const std::vector<std::uint32_t>& indices) {
  Mat<float> m(3, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k)
    m.col(static_cast<Eigen::Index>(k)) = cloud.points.col(indices[k]).cast<float>();
  return m;
}

Mat<float> points_matrix(const PointCloud& cloud) { return cloud.points.cast<float>(); }

namespace {

using Clock = std::chrono::steady_clock;
using Params = PenParams<float>;

/// Loss (and gradient when `grads` is set) of one shape; nullopt when the
/// shape has nothing to contribute this time.
using ShapeObjective = std::function<std::optional<double>(const Params&, std::size_t, Rng&, Params*)>;

struct Stage {
  std::string name;
  int epochs = 0;
  double lr = 0.0;
  std::vector<double> scales;
  bool schedule = false;  // plateau decay + early stop on the monitored loss
  bool keep_best = false;
  std::uint64_t stream = 0;
};

template <typename F>
void parallel_for(std::size_t n, int workers, F&& f) {
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex mu;
  for (std::size_t t = 0; t < w; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += w) f(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!err) err = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

void add_into(Params& total, const Params& g) {
  auto ts = tensors(total);
  const auto gs = tensors(g);
  for (std::size_t i = 0; i < ts.size(); ++i) *ts[i].tensor += *gs[i].tensor;
}

void scale_grads(Params& g, float s) {
  for (auto& t : tensors(g)) *t.tensor *= s;
}

/// Mean objective over `n` shapes with fixed per-shape streams.
double evaluate(const Params& params, std::size_t n, const ShapeObjective& obj, const TrainConfig& cfg,
                std::uint64_t stream) {
  std::vector<std::optional<double>> losses(n);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    Rng rng(derive_seed(cfg.seed, {stream, 0x7a1u, i}));
    losses[i] = obj(params, i, rng, nullptr);
  });
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& l : losses)
    if (l) {
      sum += *l;
      ++count;
    }
  return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
}

/// Shuffled mini-batch Adam over `n_train` shapes. Gradients are averaged over
/// the shapes of a batch that contributed, summed in index order so the
/// result does not depend on the worker count.
void run_stage(Params& params, AdamState<float>& adam, const Stage& stage, std::size_t n_train, const ShapeObjective& train,
               std::size_t n_val, const ShapeObjective& val, const TrainConfig& cfg, TrainReport& report) {
  PlateauScheduler sched(stage.lr, cfg.decay_factor, cfg.plateau_patience, cfg.plateau_threshold, cfg.min_lr);
  const AdamConfig acfg{};
  std::optional<double> best_val;
  Params best;
  const int epoch_base = report.epochs.empty() ? 0 : report.epochs.back().epoch + 1;

  for (int e = 0; e < stage.epochs; ++e) {
    const int epoch = epoch_base + e;
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, {stage.stream, static_cast<std::uint64_t>(e), 0}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    const double lr = sched.lr();
    for (std::size_t start = 0; start < n_train; start += cfg.batch_shapes) {
      const std::size_t end = std::min(n_train, start + cfg.batch_shapes);
      const std::size_t b = end - start;
      std::vector<std::optional<double>> losses(b);
      std::vector<Params> grads(cfg.workers > 1 ? b : 0);
      Params total = Params::zeros_like(params);
      Params scratch;
      const auto one = [&](std::size_t k, Params& g) {
        const std::size_t idx = order[start + k];
        Rng rng(derive_seed(cfg.seed, {stage.stream, static_cast<std::uint64_t>(e), 1, idx}));
        g = Params::zeros_like(params);
        losses[k] = train(params, idx, rng, &g);
      };
      if (cfg.workers > 1) {
        parallel_for(b, cfg.workers, [&](std::size_t k) { one(k, grads[k]); });
        for (std::size_t k = 0; k < b; ++k)
          if (losses[k]) add_into(total, grads[k]);
      } else {
        for (std::size_t k = 0; k < b; ++k) {
          one(k, scratch);
          if (losses[k]) add_into(total, scratch);
        }
      }
      std::size_t contributed = 0;
      for (const auto& l : losses) {
        if (l) {
          loss_sum += *l;
          ++loss_count;
          ++contributed;
        } else {
          ++report.skipped_shapes;
        }
      }
      if (contributed == 0) continue;
      scale_grads(total, 1.0f / static_cast<float>(contributed));
      adam_step(params, total, adam, lr, acfg, stage.scales);
    }
    if (loss_count == 0) throw TrainingError("no training shape produced a usable sample in epoch " + std::to_string(epoch));

    EpochRecord rec{epoch, stage.name, loss_sum / static_cast<double>(loss_count), std::nullopt, lr};
    if (n_val > 0) {
      const double v = evaluate(params, n_val, val, cfg, stage.stream);
      if (std::isfinite(v)) rec.val_loss = v;
    }
    report.epochs.push_back(rec);
    const double monitored = rec.val_loss ? *rec.val_loss : rec.train_loss;
    if (stage.keep_best && rec.val_loss && (!best_val || *rec.val_loss < *best_val)) {
      best_val = rec.val_loss;
      best = params;
      report.best_epoch = epoch;
    }
    if (stage.schedule) {
      const double before = sched.lr();
      if (sched.observe(monitored)) report.events.push_back({epoch, "decay", before, sched.lr()});
      if (sched.should_stop()) {
        report.events.push_back({epoch, "early-stop", sched.lr(), sched.lr()});
        break;
      }
    }
  }
  if (best_val) params = std::move(best);
  else if (!report.epochs.empty()) report.best_epoch = report.epochs.back().epoch;
}

Stage whole_network_stage(const std::string& name, const TrainConfig& cfg, std::uint64_t stream) {
  Stage s;
  s.name = name;
  s.epochs = cfg.max_epochs;
  s.lr = cfg.lr;
  s.schedule = true;
  s.keep_best = true;
  s.stream = stream;
  return s;
}

std::vector<std::int32_t> gather(const std::vector<std::int32_t>& v, const std::vector<std::uint32_t>& idx) {
  std::vector<std::int32_t> out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = v[idx[k]];
  return out;
}

std::vector<std::int32_t> argmax_columns(const Mat<float>& m) {
  std::vector<std::int32_t> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    Eigen::Index r = 0;
    m.col(i).maxCoeff(&r);
    out[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(r);
  }
  return out;
}

// Tag loss where each tag sees all its positives and an equal-sized uniform
// draw of its negatives.
LossGrad<float> balanced_tag_loss(const Mat<float>& logits, const std::vector<std::int32_t>& tags, Rng& rng) {
  LossGrad<float> full = tag_loss_from_logits<float>(logits, tags);
  const Mat<float> p = sigmoid<float>(logits);
  LossGrad<float> out;
  out.grad = Mat<float>::Zero(logits.rows(), logits.cols());
  const float lo = static_cast<float>(kProbabilityClamp), hi = 1.0f - lo;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    std::vector<Eigen::Index> pos, neg;
    for (Eigen::Index i = 0; i < logits.cols(); ++i) (tags[static_cast<std::size_t>(i)] == t ? pos : neg).push_back(i);
    std::shuffle(neg.begin(), neg.end(), rng);
    neg.resize(std::min(neg.size(), pos.size()));
    for (Eigen::Index i : pos) {
      out.loss -= std::log(std::clamp(p(t, i), lo, hi));
      out.grad(t, i) = full.grad(t, i);
    }
    for (Eigen::Index i : neg) {
      out.loss -= std::log(1.0f - std::clamp(p(t, i), lo, hi));
      out.grad(t, i) = full.grad(t, i);
    }
  }
  return out;
}

}  // namespace

TrainResult pretrain_triplet(const std::vector<ShapeSample>& train, const std::vector<ShapeSample>& val,
                             SamplingStrategy strategy, const TrainConfig& cfg, const ArchConfig& arch) {
  cfg.validate();
  if (train.empty()) throw TrainingError("triplet pretraining needs at least one training shape");
  const auto t0 = Clock::now();
  TrainResult out;
  ArchConfig a = arch;
  a.num_tags = a.num_labels = a.ae_points = 0;
  out.params = Params::init(a, cfg.seed);
  out.report.regime = std::string("triplet-") + to_string(strategy);

  const auto make = [&](const std::vector<ShapeSample>& set) -> ShapeObjective {
    return [&set, &cfg, strategy](const Params& p, std::size_t i, Rng& rng, Params* g) -> std::optional<double> {
      const ShapeSample& s = set[i];
      const auto idx = subsample_indices(s.cloud.size(), cfg.subsample_points, rng);
      const auto leaf = gather(s.cloud.leaf_id, idx);
      std::optional<TripletSampler> sampler;
      try {
        sampler.emplace(s.hierarchy, leaf);
      } catch (const SamplingError&) {
        return std::nullopt;
      }
      const auto triplets = sampler->sample(strategy, cfg.triplets_per_shape, rng);
      const ForwardTrace<float> tr = forward(p, points_matrix(s.cloud, idx));
      const LossGrad<float> lg = triplet_loss<float>(tr.embedding, triplets, static_cast<float>(cfg.margin));
      if (g) backward(p, tr, &lg.grad, static_cast<const Vec<float>*>(nullptr), *g);
      return static_cast<double>(lg.loss);
    };
  };
  AdamState<float> adam = AdamState<float>::init(out.params);
  try {
    run_stage(out.params, adam, whole_network_stage("triplet", cfg, 1), train.size(), make(train), val.size(),
              make(val), cfg, out.report);
  } catch (const TrainingError& e) {
    throw TrainingError(std::string("triplet pretraining: ") + e.what());
  }
  out.report.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

TrainResult pretrain_autoencoder(const std::vector<ShapeSample>& train, const std::vector<ShapeSample>& val,
                                 const TrainConfig& cfg, const ArchConfig& arch) {
  cfg.validate();
  if (train.empty()) throw TrainingError("autoencoder pretraining needs at least one training shape");
  const auto t0 = Clock::now();
  TrainResult out;
  ArchConfig a = arch;
  a.num_tags = a.num_labels = 0;
  a.ae_points = static_cast<int>(cfg.ae_points);
  out.params = Params::init(a, cfg.seed);
  out.report.regime = "autoencoder";

  const auto make = [&](const std::vector<ShapeSample>& set) -> ShapeObjective {
    return [&set, &cfg](const Params& p, std::size_t i, Rng& rng, Params* g) -> std::optional<double> {
      const ShapeSample& s = set[i];
      const auto idx = subsample_indices(s.cloud.size(), cfg.subsample_points, rng);
      return static_cast<double>(ae_loss<float>(p, points_matrix(s.cloud, idx), g).loss);
    };
  };
  AdamState<float> adam = AdamState<float>::init(out.params);
  run_stage(out.params, adam, whole_network_stage("autoencoder", cfg, 2), train.size(), make(train), val.size(),
            make(val), cfg, out.report);
  out.report.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

TrainResult finetune_tags(const PenParams<float>& params, const std::vector<ShapeSample>& train,
                          const std::vector<ShapeSample>& val, int num_tags, const TrainConfig& cfg) {
  cfg.validate();
  if (num_tags <= 0) throw TrainingError("tag fine-tuning needs a nonempty tag vocabulary");
  if (train.empty()) throw TrainingError("tag fine-tuning needs at least one training shape");
  std::vector<std::vector<std::int32_t>> tags;
  for (const auto& s : train) tags.push_back(s.cloud.tag_id);
  const TagSufficiency suff = tag_sufficiency(tags);
  if (!suff.sufficient)
    throw TrainingError("tag coverage " + std::to_string(suff.coverage * 100.0) +
                        "% does not exceed the 1% sufficiency threshold");

  const auto t0 = Clock::now();
  TrainResult out;
  out.params = params;
  out.params.drop_ae_decoder();
  out.params.reset_seg_head(0, 0);
  out.params.reset_tag_head(num_tags, derive_seed(cfg.seed, {0x7a6u}));
  out.report.regime = cfg.freeze_trunk ? "tags-frozen-trunk" : "tags";

  const bool freeze = cfg.freeze_trunk;
  const auto make = [&](const std::vector<ShapeSample>& set) -> ShapeObjective {
    return [&set, &cfg, freeze](const Params& p, std::size_t i, Rng& rng, Params* g) -> std::optional<double> {
      const ShapeSample& s = set[i];
      const auto idx = subsample_indices(s.cloud.size(), cfg.subsample_points, rng);
      const auto t = gather(s.cloud.tag_id, idx);
      const ForwardTrace<float> tr = forward(p, points_matrix(s.cloud, idx));
      const HeadTrace<float> ht = head_forward(p.tag_head, tr.embedding);
      const LossGrad<float> lg =
          cfg.balanced_negatives ? balanced_tag_loss(ht.logits, t, rng) : tag_loss_from_logits<float>(ht.logits, t);
      if (g) {
        Mat<float> d_emb;
        head_backward(p.tag_head, tr.embedding, ht, lg.grad, g->tag_head, d_emb);
        if (!freeze) backward(p, tr, &d_emb, static_cast<const Vec<float>*>(nullptr), *g);
      }
      return static_cast<double>(lg.loss);
    };
  };
  Stage stage = whole_network_stage("tags", cfg, 3);
  stage.scales = lr_scales(tensor_names(out.params), freeze ? 0.0 : cfg.trunk_lr_scale, 1.0);
  AdamState<float> adam = AdamState<float>::init(out.params);
  run_stage(out.params, adam, stage, train.size(), make(train), val.size(), make(val), cfg, out.report);
  out.report.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

TrainResult finetune_segmentation(const PenParams<float>* pretrained, const std::vector<ShapeSample>& labeled,
                                  int num_labels, const TrainConfig& cfg, const ArchConfig& arch) {
  cfg.validate();
  if (num_labels <= 0) throw InputError("segmentation needs at least one label");
  if (labeled.empty()) throw InputError("segmentation fine-tuning needs at least one labelled shape");
  std::size_t labelled_points = 0;
  for (const auto& s : labeled) {
    if (s.cloud.semantic_label.size() != s.cloud.size())
      throw InputError("shape " + s.shape_id + " has no semantic labels");
    for (std::int32_t l : s.cloud.semantic_label) {
      if (l == kNone) continue;
      if (l < 0 || l >= num_labels)
        throw InputError("shape " + s.shape_id + ": label " + std::to_string(l) + " outside [0, " +
                         std::to_string(num_labels) + ")");
      ++labelled_points;
    }
  }
  if (labelled_points == 0) throw InputError("segmentation fine-tuning got no labelled points");

  const auto t0 = Clock::now();
  TrainResult out;
  const std::uint64_t head_seed = derive_seed(cfg.seed, {0x5e6u});
  // Autoencoder checkpoints carry their reconstruction decoder; their
  // per-point embedding decoder is still at its initialisation.
  const bool encoder_only = pretrained && !pretrained->ae_decoder.empty();
  if (pretrained) {
    out.params = *pretrained;
    out.params.drop_ae_decoder();
    out.params.reset_tag_head(0, 0);
    out.params.reset_seg_head(num_labels, head_seed);
    out.report.regime = "segmentation-staged";
  } else {
    ArchConfig a = arch;
    a.num_tags = a.ae_points = 0;
    a.num_labels = 0;
    out.params = Params::init(a, cfg.seed);
    out.params.reset_seg_head(num_labels, head_seed);
    out.report.regime = "segmentation-scratch";
  }

  const ShapeObjective full = [&](const Params& p, std::size_t i, Rng& rng, Params* g) -> std::optional<double> {
    const ShapeSample& s = labeled[i];
    const auto idx = subsample_indices(s.cloud.size(), cfg.subsample_points, rng, &s.cloud.semantic_label);
    const auto lab = gather(s.cloud.semantic_label, idx);
    if (std::all_of(lab.begin(), lab.end(), [](std::int32_t l) { return l == kNone; })) return std::nullopt;
    const ForwardTrace<float> tr = forward(p, points_matrix(s.cloud, idx));
    const HeadTrace<float> ht = head_forward(p.seg_head, tr.embedding);
    const LossGrad<float> lg = seg_loss<float>(ht.logits, lab);
    if (g) {
      Mat<float> d_emb;
      head_backward(p.seg_head, tr.embedding, ht, lg.grad, g->seg_head, d_emb);
      backward(p, tr, &d_emb, static_cast<const Vec<float>*>(nullptr), *g);
    }
    return static_cast<double>(lg.loss);
  };
  const ShapeObjective none;
  const auto names = tensor_names(out.params);
  AdamState<float> adam = AdamState<float>::init(out.params);

  if (!pretrained) {
    Stage s{"scratch", cfg.head_epochs + cfg.full_epochs, cfg.lr, {}, false, false, 4};
    run_stage(out.params, adam, s, labeled.size(), full, 0, none, cfg, out.report);
  } else {
    if (cfg.head_epochs > 0 && !encoder_only) {
      // The trunk is frozen in this stage, so one embedding per shape serves
      // every epoch.
      struct Cached {
        Mat<float> embedding;
        std::vector<std::int32_t> labels;
      };
      std::vector<Cached> cache(labeled.size());
      parallel_for(labeled.size(), cfg.workers, [&](std::size_t i) {
        const ShapeSample& s = labeled[i];
        Rng rng(derive_seed(cfg.seed, {5, i}));
        const auto idx = subsample_indices(s.cloud.size(), cfg.subsample_points, rng, &s.cloud.semantic_label);
        cache[i].embedding = forward(out.params, points_matrix(s.cloud, idx)).embedding;
        cache[i].labels = gather(s.cloud.semantic_label, idx);
      });
      const ShapeObjective head = [&](const Params& p, std::size_t i, Rng&, Params* g) -> std::optional<double> {
        const Cached& c = cache[i];
        if (std::all_of(c.labels.begin(), c.labels.end(), [](std::int32_t l) { return l == kNone; }))
          return std::nullopt;
        const HeadTrace<float> ht = head_forward(p.seg_head, c.embedding);
        const LossGrad<float> lg = seg_loss<float>(ht.logits, c.labels);
        if (g) {
          Mat<float> d_emb;
          head_backward(p.seg_head, c.embedding, ht, lg.grad, g->seg_head, d_emb);
        }
        return static_cast<double>(lg.loss);
      };
      Stage s{"head", cfg.head_epochs, cfg.lr, lr_scales(names, 0.0, 1.0), false, false, 6};
      run_stage(out.params, adam, s, labeled.size(), head, 0, none, cfg, out.report);
    }
    if (cfg.head_epochs > 0 && encoder_only) {
      // The embedding decoder was never trained, so it learns with the head.
      std::vector<double> scales;
      for (const auto& n : names) scales.push_back(n.rfind("point.", 0) == 0 || n.rfind("lift.", 0) == 0 ? 0.0 : 1.0);
      Stage s{"head", cfg.head_epochs, cfg.lr, scales, false, false, 6};
      run_stage(out.params, adam, s, labeled.size(), full, 0, none, cfg, out.report);
    }
    if (cfg.full_epochs > 0) {
      adam = AdamState<float>::init(out.params);
      Stage s{"full", cfg.full_epochs, cfg.lr * cfg.trunk_lr_scale, {}, false, false, 7};
      run_stage(out.params, adam, s, labeled.size(), full, 0, none, cfg, out.report);
    }
  }
  out.report.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

std::vector<std::int32_t> predict_segmentation(const PenParams<float>& params, const Mat<float>& points) {
  if (params.seg_head.empty()) throw InputError("parameters have no segmentation head");
  const ForwardTrace<float> tr = forward(params, points);
  return argmax_columns(head_forward(params.seg_head, tr.embedding).logits);
}

std::vector<std::int32_t> predict_tags(const PenParams<float>& params, const Mat<float>& points) {
  if (params.tag_head.empty()) throw InputError("parameters have no tag head");
  const ForwardTrace<float> tr = forward(params, points);
  return argmax_columns(head_forward(params.tag_head, tr.embedding).logits);
}

}  // namespace pen
