#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

namespace pen {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

inline constexpr int kEmbeddingDim = 64;
inline constexpr int kGlobalDim = 1024;

/// Layer widths of the point embedding network. Per-point activations are
/// column vectors; every hidden layer is affine + ReLU.
struct ArchConfig {
  std::vector<int> point_widths{64, 64, 64};   // 3 -> ... -> point feature (last entry)
  std::vector<int> lift_widths{128, kGlobalDim};  // point feature -> ... -> pre-pool; last is linear
  std::vector<int> decoder_widths{256, kEmbeddingDim};  // concat(point, global) -> ... -> embedding; last is linear
  int head_hidden = 64;
  int num_tags = 0;    // 0: no tag head
  int num_labels = 0;  // 0: no segmentation head
  std::vector<int> ae_hidden{256, 256};
  int ae_points = 0;   // 0: no autoencoder decoder

  int point_dim() const { return point_widths.back(); }
  int global_dim() const { return lift_widths.back(); }
  int embedding_dim() const { return decoder_widths.back(); }
  /// Throws ConfigError on empty or non-positive widths.
  void validate() const;
  bool operator==(const ArchConfig&) const = default;
};

void to_json(nlohmann::json& j, const ArchConfig& a);
void from_json(const nlohmann::json& j, ArchConfig& a);

template <typename T>
struct Dense {
  Mat<T> weight;  // out x in
  Mat<T> bias;    // out x 1
  int out() const { return static_cast<int>(weight.rows()); }
  int in() const { return static_cast<int>(weight.cols()); }
};

/// All network weights. Heads and the autoencoder decoder are empty when the
/// architecture does not request them.
template <typename T>
struct PenParams {
  ArchConfig arch;
  std::vector<Dense<T>> point_mlp;
  std::vector<Dense<T>> lift_mlp;
  std::vector<Dense<T>> decoder;
  std::vector<Dense<T>> tag_head;
  std::vector<Dense<T>> seg_head;
  std::vector<Dense<T>> ae_decoder;

  /// He-normal weights, zero biases.
  static PenParams init(const ArchConfig& arch, std::uint64_t seed);
  /// Same shapes as `like`, all zeros.
  static PenParams zeros_like(const PenParams& like);

  /// (Re)initialises one head for a new label/tag count, leaving the trunk.
  void reset_seg_head(int num_labels, std::uint64_t seed);
  void reset_tag_head(int num_tags, std::uint64_t seed);
  void reset_ae_decoder(int points, std::uint64_t seed);
  void drop_ae_decoder();

  template <typename U>
  PenParams<U> cast() const;
};

template <typename T>
struct TensorRef {
  std::string name;
  Mat<T>* tensor;
};
template <typename T>
struct ConstTensorRef {
  std::string name;
  const Mat<T>* tensor;
};

/// Stable enumeration of every parameter tensor ("point.0.weight", ...).
template <typename T>
std::vector<TensorRef<T>> tensors(PenParams<T>& p);
template <typename T>
std::vector<ConstTensorRef<T>> tensors(const PenParams<T>& p);

/// True when the tensor belongs to the shared trunk (encoder + decoder).
bool is_trunk_tensor(const std::string& name);

/// Cached activations of one forward pass.
template <typename T>
struct ForwardTrace {
  Mat<T> input;                    // 3 x N
  std::vector<Mat<T>> point_act;   // post-ReLU output of each point layer
  std::vector<Mat<T>> lift_act;    // post-ReLU outputs of all but the last lift layer
  Vec<T> global;                   // max over points of the last lift layer
  std::vector<Eigen::Index> argmax;  // winning point per global channel
  std::vector<Mat<T>> decoder_act;   // post-ReLU outputs of hidden decoder layers
  Mat<T> raw_embedding;            // d x N before normalisation
  Vec<T> norms;                    // per-point L2 norm of raw_embedding
  Mat<T> embedding;                // d x N, unit columns

  Eigen::Index num_points() const { return input.cols(); }
};

/// Per-point embedding with max-pooled global context. `points` is 3 x N.
template <typename T>
ForwardTrace<T> forward(const PenParams<T>& params, const Mat<T>& points);

/// Encoder and pooling only; the trace's decoder fields stay empty and it
/// supports `backward` with a global gradient alone.
template <typename T>
ForwardTrace<T> encode(const PenParams<T>& params, const Mat<T>& points);

/// Only the global feature (encoder and pooling).
template <typename T>
Vec<T> global_feature(const PenParams<T>& params, const Mat<T>& points);

/// Accumulates parameter gradients of the trunk given gradients with respect
/// to the normalised embedding (d x N) and/or the global feature. Either may
/// be null. Throws InputError when shapes disagree with the trace.
template <typename T>
void backward(const PenParams<T>& params, const ForwardTrace<T>& trace, const Mat<T>* d_embedding,
              const Vec<T>* d_global, PenParams<T>& grads);

/// Two-layer per-point head on the embedding: hidden ReLU then linear logits.
template <typename T>
struct HeadTrace {
  Mat<T> hidden;  // post-ReLU
  Mat<T> logits;
};

template <typename T>
HeadTrace<T> head_forward(const std::vector<Dense<T>>& head, const Mat<T>& embedding);

/// Accumulates head gradients into `head_grads` and adds the gradient with
/// respect to the embedding into `d_embedding` (resized to zero if empty).
template <typename T>
void head_backward(const std::vector<Dense<T>>& head, const Mat<T>& embedding, const HeadTrace<T>& trace,
                   const Mat<T>& d_logits, std::vector<Dense<T>>& head_grads, Mat<T>& d_embedding);

/// Autoencoder decoder: global feature -> M points (3 x M).
template <typename T>
struct AeTrace {
  std::vector<Vec<T>> act;  // post-ReLU hidden activations
  Mat<T> reconstruction;    // 3 x M
};

template <typename T>
AeTrace<T> ae_forward(const PenParams<T>& params, const Vec<T>& global);

/// Accumulates decoder gradients; returns the gradient with respect to the
/// global feature.
template <typename T>
Vec<T> ae_backward(const PenParams<T>& params, const Vec<T>& global, const AeTrace<T>& trace,
                   const Mat<T>& d_reconstruction, PenParams<T>& grads);

}  // namespace pen
