#pragma once

#include <span>
#include <vector>

#include "pen/network.hpp"
#include "pen/triplets.hpp"

namespace pen {

template <typename T>
struct LossGrad {
  T loss = 0;
  Mat<T> grad;
};

inline constexpr double kDefaultMargin = 0.2;
inline constexpr double kProbabilityClamp = 1e-7;

/// Mean hinge loss [d(a,b) - d(a,c) + m]_+ over one shape's triplets with d
/// the squared Euclidean distance between embedding columns. The gradient
/// is with respect to `embedding` (d x N); the kink gets subgradient 0. An
/// empty triplet list contributes zero loss and zero gradient.
template <typename T>
LossGrad<T> triplet_loss(const Mat<T>& embedding, const std::vector<Triplet>& triplets, T margin);

/// One-vs-rest binary cross entropy summed over tags and points.
/// `probabilities` is T x N; `tag_ids[i]` is the point's tag or kNone.
/// Probabilities are clamped to [1e-7, 1 - 1e-7] inside the logs; the
/// gradient is with respect to the (unclamped) probabilities.
template <typename T>
LossGrad<T> tag_loss(const Mat<T>& probabilities, std::span<const std::int32_t> tag_ids);

/// Same loss evaluated from sigmoid logits, with gradient with respect to the
/// logits (p - y), which stays informative when the sigmoid saturates.
template <typename T>
LossGrad<T> tag_loss_from_logits(const Mat<T>& logits, std::span<const std::int32_t> tag_ids);

/// Mean softmax cross entropy over labelled points (label kNone is ignored).
/// `logits` is L x N. Throws InputError with no labelled points or a label
/// outside [0, L).
template <typename T>
LossGrad<T> seg_loss(const Mat<T>& logits, std::span<const std::int32_t> labels);

template <typename T>
Mat<T> sigmoid(const Mat<T>& logits);
template <typename T>
Mat<T> softmax_columns(const Mat<T>& logits);

/// Autoencoder reconstruction and Chamfer loss for one cloud (3 x N input).
template <typename T>
struct AeResult {
  T loss = 0;
  Mat<T> reconstruction;
};

/// Forward + backward of the Chamfer autoencoder; accumulates into `grads`.
template <typename T>
AeResult<T> ae_loss(const PenParams<T>& params, const Mat<T>& points, PenParams<T>* grads);

}  // namespace pen
