#include "pen/losses.hpp"

#include <cmath>

#include "pen/error.hpp"
#include "pen/geometry.hpp"

namespace pen {

template <typename T>
LossGrad<T> triplet_loss(const Mat<T>& emb, const std::vector<Triplet>& triplets, T margin) {
  LossGrad<T> out;
  out.grad = Mat<T>::Zero(emb.rows(), emb.cols());
  if (triplets.empty()) return out;
  const T w = T(1) / static_cast<T>(triplets.size());
  for (const Triplet& t : triplets) {
    const auto a = emb.col(t.anchor), b = emb.col(t.positive), c = emb.col(t.negative);
    const T hinge = (a - b).squaredNorm() - (a - c).squaredNorm() + margin;
    if (hinge <= T(0)) continue;
    out.loss += hinge;
    // d/da = 2(a-b) - 2(a-c) = 2(c-b); d/db = -2(a-b); d/dc = 2(a-c)
    out.grad.col(t.anchor) += 2 * w * (c - b);
    out.grad.col(t.positive) -= 2 * w * (a - b);
    out.grad.col(t.negative) += 2 * w * (a - c);
  }
  out.loss *= w;
  return out;
}

template <typename T>
Mat<T> sigmoid(const Mat<T>& logits) {
  return logits.unaryExpr([](T x) {
    return x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
  });
}

template <typename T>
Mat<T> softmax_columns(const Mat<T>& logits) {
  Mat<T> out = logits.rowwise() - logits.colwise().maxCoeff();
  out = out.array().exp();
  out = out * out.colwise().sum().cwiseInverse().asDiagonal();
  return out;
}

namespace {

void check_tags(Eigen::Index rows, Eigen::Index cols, std::span<const std::int32_t> tag_ids) {
  if (static_cast<std::size_t>(cols) != tag_ids.size())
    throw InputError("tag loss: " + std::to_string(tag_ids.size()) + " tag ids for " + std::to_string(cols) +
                     " points");
  for (std::int32_t t : tag_ids)
    if (t != kNone && (t < 0 || t >= rows)) throw InputError("tag id " + std::to_string(t) + " out of range");
}

}  // namespace

template <typename T>
LossGrad<T> tag_loss(const Mat<T>& p, std::span<const std::int32_t> tag_ids) {
  check_tags(p.rows(), p.cols(), tag_ids);
  const T lo = T(kProbabilityClamp), hi = T(1) - T(kProbabilityClamp);
  LossGrad<T> out;
  out.grad = Mat<T>::Zero(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.cols(); ++i)
    for (Eigen::Index t = 0; t < p.rows(); ++t) {
      const T raw = p(t, i);
      const T q = std::clamp(raw, lo, hi);
      const bool inside = raw > lo && raw < hi;
      if (tag_ids[static_cast<std::size_t>(i)] == t) {
        out.loss -= std::log(q);
        if (inside) out.grad(t, i) = -T(1) / q;
      } else {
        out.loss -= std::log(T(1) - q);
        if (inside) out.grad(t, i) = T(1) / (T(1) - q);
      }
    }
  return out;
}

template <typename T>
LossGrad<T> tag_loss_from_logits(const Mat<T>& logits, std::span<const std::int32_t> tag_ids) {
  check_tags(logits.rows(), logits.cols(), tag_ids);
  const T lo = T(kProbabilityClamp), hi = T(1) - T(kProbabilityClamp);
  LossGrad<T> out;
  out.grad = sigmoid(logits);
  for (Eigen::Index i = 0; i < logits.cols(); ++i)
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
      const T q = std::clamp(out.grad(t, i), lo, hi);
      if (tag_ids[static_cast<std::size_t>(i)] == t) {
        out.loss -= std::log(q);
        out.grad(t, i) -= T(1);
      } else {
        out.loss -= std::log(T(1) - q);
      }
    }
  return out;
}

template <typename T>
LossGrad<T> seg_loss(const Mat<T>& logits, std::span<const std::int32_t> labels) {
  if (static_cast<std::size_t>(logits.cols()) != labels.size())
    throw InputError("segmentation loss: label count does not match point count");
  std::size_t labelled = 0;
  for (std::int32_t l : labels) {
    if (l == kNone) continue;
    if (l < 0 || l >= logits.rows())
      throw InputError("label id " + std::to_string(l) + " outside label set of size " + std::to_string(logits.rows()));
    ++labelled;
  }
  if (labelled == 0) throw InputError("segmentation loss needs at least one labelled point");

  LossGrad<T> out;
  out.grad = Mat<T>::Zero(logits.rows(), logits.cols());
  const T w = T(1) / static_cast<T>(labelled);
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    const std::int32_t l = labels[static_cast<std::size_t>(i)];
    if (l == kNone) continue;
    const auto z = logits.col(i);
    const T mx = z.maxCoeff();
    const T lse = mx + std::log((z.array() - mx).exp().sum());
    out.loss += lse - z[l];
    out.grad.col(i) = w * (z.array() - lse).exp().matrix();
    out.grad(l, i) -= w;
  }
  out.loss *= w;
  return out;
}

template <typename T>
AeResult<T> ae_loss(const PenParams<T>& params, const Mat<T>& points, PenParams<T>* grads) {
  if (points.cols() == 0) throw InputError("autoencoder loss of an empty cloud");
  const ForwardTrace<T> enc = encode(params, points);
  const Vec<T>& global = enc.global;
  const AeTrace<T> ae = ae_forward(params, global);
  using Cloud = Eigen::Matrix<T, 3, Eigen::Dynamic>;
  const Cloud recon = ae.reconstruction;
  const Cloud input = points;
  Cloud d_recon;
  AeResult<T> out;
  out.loss = chamfer_with_grad<T>(recon, input, grads ? &d_recon : nullptr);
  out.reconstruction = ae.reconstruction;
  if (grads) {
    const Mat<T> d = d_recon;
    const Vec<T> d_global = ae_backward(params, global, ae, d, *grads);
    backward(params, enc, static_cast<const Mat<T>*>(nullptr), &d_global, *grads);
  }
  return out;
}

#define PEN_INSTANTIATE(T)                                                                    \
  template LossGrad<T> triplet_loss(const Mat<T>&, const std::vector<Triplet>&, T);          \
  template LossGrad<T> tag_loss(const Mat<T>&, std::span<const std::int32_t>);               \
  template LossGrad<T> tag_loss_from_logits(const Mat<T>&, std::span<const std::int32_t>);   \
  template LossGrad<T> seg_loss(const Mat<T>&, std::span<const std::int32_t>);               \
  template Mat<T> sigmoid(const Mat<T>&);                                                    \
  template Mat<T> softmax_columns(const Mat<T>&);                                            \
  template AeResult<T> ae_loss(const PenParams<T>&, const Mat<T>&, PenParams<T>*);

PEN_INSTANTIATE(float)
PEN_INSTANTIATE(double)
#undef PEN_INSTANTIATE

}  // namespace pen
