#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pen/adam.hpp"
#include "pen/dataset.hpp"
#include "pen/losses.hpp"
#include "pen/network.hpp"
#include "pen/triplets.hpp"

namespace pen {

struct TrainConfig {
  std::size_t batch_shapes = 32;
  std::size_t subsample_points = kTrainSubsampleSize;
  std::size_t triplets_per_shape = kDefaultTripletsPerShape;
  double lr = 0.01;
  double decay_factor = 10.0;
  int plateau_patience = 5;
  double plateau_threshold = 1e-4;  // relative improvement needed to reset patience
  int max_epochs = 100;
  double min_lr = 1e-5;
  double margin = kDefaultMargin;
  std::uint64_t seed = 0;

  // Fine-tuning.
  int head_epochs = 60;      // segmentation stage 1: head only, trunk cached
  int full_epochs = 40;      // segmentation stage 2: whole network at lr * trunk_lr_scale
  double trunk_lr_scale = 0.1;
  bool freeze_trunk = false;        // tag fine-tuning: train the tag head only
  bool balanced_negatives = false;  // tag loss: as many negatives as positives per tag
  std::size_t ae_points = 1024;
  int workers = 1;

  /// Throws ConfigError.
  void validate() const;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, batch_shapes, subsample_points, triplets_per_shape,
                                                lr, decay_factor, plateau_patience, plateau_threshold, max_epochs,
                                                min_lr, margin, seed, head_epochs, full_epochs, trunk_lr_scale,
                                                freeze_trunk, balanced_negatives, ae_points, workers)

struct EpochRecord {
  int epoch = 0;
  std::string stage;
  double train_loss = 0.0;
  std::optional<double> val_loss;
  double lr = 0.0;
};

struct ScheduleEvent {
  int epoch = 0;
  std::string kind;  // "decay" or "early-stop"
  double lr_before = 0.0;
  double lr_after = 0.0;
};

struct TrainReport {
  std::string regime;
  std::vector<EpochRecord> epochs;
  std::vector<ScheduleEvent> events;
  int best_epoch = -1;
  std::size_t skipped_shapes = 0;  // shapes that yielded no triplets in some epoch
  double wall_seconds = 0.0;
  std::string final_checkpoint;
};

void to_json(nlohmann::json& j, const TrainReport& r);

struct TrainResult {
  PenParams<float> params;
  TrainReport report;
};

/// Reduce-on-plateau for a metric to minimise. The first observation sets the
/// reference; an observation improves when it is below best * (1 - threshold).
/// After `patience` consecutive non-improving observations the rate is divided
/// by `factor` and the counter restarts. Training should stop once two decays
/// have taken the rate below `min_lr`.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience, double threshold, double min_lr);

  /// Returns true when this observation triggered a decay.
  bool observe(double metric);
  double lr() const { return lr_; }
  bool should_stop() const { return decays_below_min_ >= 2; }
  bool last_improved() const { return improved_; }

 private:
  double lr_, factor_, threshold_, min_lr_;
  int patience_;
  std::optional<double> best_;
  int bad_ = 0;
  int decays_below_min_ = 0;
  bool improved_ = false;
};

/// Random subset of at most `n` point indices. Points with a label in
/// `priority` (any value other than kNone) are taken first.
std::vector<std::uint32_t> subsample_indices(std::size_t total, std::size_t n, Rng& rng,
                                             const std::vector<std::int32_t>* priority = nullptr);

Mat<float> points_matrix(const PointCloud& cloud, const std::vector<std::uint32_t>& indices);
Mat<float> points_matrix(const PointCloud& cloud);

/// Triplet metric learning over shapes of any category. Returns the
/// parameters of the best validation epoch (or the last when `val` is empty).
/// Throws TrainingError when no training shape yields a valid triplet.
TrainResult pretrain_triplet(const std::vector<ShapeSample>& train, const std::vector<ShapeSample>& val,
                             SamplingStrategy strategy, const TrainConfig& cfg, const ArchConfig& arch = {});

/// Chamfer autoencoder pretraining; the result keeps its decoder.
TrainResult pretrain_autoencoder(const std::vector<ShapeSample>& train, const std::vector<ShapeSample>& val,
                                 const TrainConfig& cfg, const ArchConfig& arch = {});

/// Tag fine-tuning on clouds whose tag_id is filled in. Refuses (TrainingError
/// carrying the coverage) when the training shapes fail the sufficiency test
/// or `num_tags` is 0.
TrainResult finetune_tags(const PenParams<float>& params, const std::vector<ShapeSample>& train,
                          const std::vector<ShapeSample>& val, int num_tags, const TrainConfig& cfg);

/// Few-shot segmentation. `pretrained == nullptr` trains from scratch for
/// head_epochs + full_epochs; otherwise the tensors pretraining did not
/// provide (the head, plus the embedding decoder for autoencoder checkpoints,
/// recognised by their reconstruction decoder) are trained first with the
/// rest frozen, then everything at the reduced rate. Points whose
/// semantic_label is kNone do not contribute. Throws InputError for labels
/// outside [0, num_labels) or when no point is labelled.
TrainResult finetune_segmentation(const PenParams<float>* pretrained, const std::vector<ShapeSample>& labeled,
                                  int num_labels, const TrainConfig& cfg, const ArchConfig& arch = {});

/// Arg-max label per point.
std::vector<std::int32_t> predict_segmentation(const PenParams<float>& params, const Mat<float>& points);
/// Arg-max tag per point.
std::vector<std::int32_t> predict_tags(const PenParams<float>& params, const Mat<float>& points);

}  // namespace pen
