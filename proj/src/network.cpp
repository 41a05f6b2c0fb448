#include "pen/network.hpp"

#include <algorithm>
#include <cmath>

#include "pen/error.hpp"

namespace pen {

template <typename T>
constexpr double kMinEmbeddingNorm = std::is_same_v<T, float> ? 1e-20 : 1e-150;

void ArchConfig::validate() const {
  const auto positive = [](const std::vector<int>& w, const char* what) {
    if (w.empty()) throw ConfigError(std::string("architecture: ") + what + " must not be empty");
    for (int x : w)
      if (x <= 0) throw ConfigError(std::string("architecture: ") + what + " widths must be positive");
  };
  positive(point_widths, "point_widths");
  positive(lift_widths, "lift_widths");
  positive(decoder_widths, "decoder_widths");
  if (head_hidden <= 0) throw ConfigError("architecture: head_hidden must be positive");
  if (num_tags < 0 || num_labels < 0 || ae_points < 0)
    throw ConfigError("architecture: head sizes must be non-negative");
  for (int x : ae_hidden)
    if (x <= 0) throw ConfigError("architecture: ae_hidden widths must be positive");
}

void to_json(nlohmann::json& j, const ArchConfig& a) {
  j = nlohmann::json{{"point_widths", a.point_widths}, {"lift_widths", a.lift_widths},
                     {"decoder_widths", a.decoder_widths}, {"head_hidden", a.head_hidden},
                     {"num_tags", a.num_tags}, {"num_labels", a.num_labels},
                     {"ae_hidden", a.ae_hidden}, {"ae_points", a.ae_points}};
}

void from_json(const nlohmann::json& j, ArchConfig& a) {
  ArchConfig d;
  a.point_widths = j.value("point_widths", d.point_widths);
  a.lift_widths = j.value("lift_widths", d.lift_widths);
  a.decoder_widths = j.value("decoder_widths", d.decoder_widths);
  a.head_hidden = j.value("head_hidden", d.head_hidden);
  a.num_tags = j.value("num_tags", d.num_tags);
  a.num_labels = j.value("num_labels", d.num_labels);
  a.ae_hidden = j.value("ae_hidden", d.ae_hidden);
  a.ae_points = j.value("ae_points", d.ae_points);
}

namespace {

template <typename T>
Dense<T> he_layer(int in, int out, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / in));
  Dense<T> d;
  d.weight.resize(out, in);
  for (Eigen::Index c = 0; c < d.weight.cols(); ++c)
    for (Eigen::Index r = 0; r < d.weight.rows(); ++r) d.weight(r, c) = static_cast<T>(normal(rng));
  d.bias = Mat<T>::Zero(out, 1);
  return d;
}

template <typename T>
std::vector<Dense<T>> mlp(int in, const std::vector<int>& widths, std::mt19937_64& rng) {
  std::vector<Dense<T>> layers;
  for (int w : widths) {
    layers.push_back(he_layer<T>(in, w, rng));
    in = w;
  }
  return layers;
}

template <typename T>
void relu_inplace(Mat<T>& m) {
  m = m.cwiseMax(T(0));
}

template <typename T>
Mat<T> affine(const Dense<T>& d, const Mat<T>& x) {
  Mat<T> y = d.weight * x;
  y.colwise() += d.bias.col(0);
  return y;
}

template <typename T>
void mask_relu(Mat<T>& grad, const Mat<T>& act) {
  grad = (act.array() > T(0)).select(grad, T(0));
}

template <typename T>
void accumulate(Dense<T>& g, const Mat<T>& dy, const Mat<T>& x) {
  g.weight.noalias() += dy * x.transpose();
  g.bias.col(0) += dy.rowwise().sum();
}

}  // namespace

template <typename T>
PenParams<T> PenParams<T>::init(const ArchConfig& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  PenParams p;
  p.arch = arch;
  p.point_mlp = mlp<T>(3, arch.point_widths, rng);
  p.lift_mlp = mlp<T>(arch.point_dim(), arch.lift_widths, rng);
  p.decoder = mlp<T>(arch.point_dim() + arch.global_dim(), arch.decoder_widths, rng);
  if (arch.num_tags > 0) p.reset_tag_head(arch.num_tags, seed ^ 0x7a6u);
  if (arch.num_labels > 0) p.reset_seg_head(arch.num_labels, seed ^ 0x5e6u);
  if (arch.ae_points > 0) p.reset_ae_decoder(arch.ae_points, seed ^ 0xae0u);
  return p;
}

template <typename T>
void PenParams<T>::reset_seg_head(int num_labels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  arch.num_labels = num_labels;
  seg_head = num_labels > 0 ? mlp<T>(arch.embedding_dim(), {arch.head_hidden, num_labels}, rng)
                            : std::vector<Dense<T>>{};
}

template <typename T>
void PenParams<T>::reset_tag_head(int num_tags, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  arch.num_tags = num_tags;
  tag_head = num_tags > 0 ? mlp<T>(arch.embedding_dim(), {arch.head_hidden, num_tags}, rng)
                          : std::vector<Dense<T>>{};
}

template <typename T>
void PenParams<T>::reset_ae_decoder(int points, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  arch.ae_points = points;
  std::vector<int> widths = arch.ae_hidden;
  widths.push_back(3 * points);
  ae_decoder = points > 0 ? mlp<T>(arch.global_dim(), widths, rng) : std::vector<Dense<T>>{};
}

template <typename T>
void PenParams<T>::drop_ae_decoder() {
  arch.ae_points = 0;
  ae_decoder.clear();
}

template <typename T>
PenParams<T> PenParams<T>::zeros_like(const PenParams& like) {
  PenParams z = like;
  for (auto& t : tensors(z)) t.tensor->setZero();
  return z;
}

template <typename T>
template <typename U>
PenParams<U> PenParams<T>::cast() const {
  PenParams<U> out;
  out.arch = arch;
  const auto conv = [](const std::vector<Dense<T>>& src, std::vector<Dense<U>>& dst) {
    dst.clear();
    for (const auto& d : src) dst.push_back({d.weight.template cast<U>(), d.bias.template cast<U>()});
  };
  conv(point_mlp, out.point_mlp);
  conv(lift_mlp, out.lift_mlp);
  conv(decoder, out.decoder);
  conv(tag_head, out.tag_head);
  conv(seg_head, out.seg_head);
  conv(ae_decoder, out.ae_decoder);
  return out;
}

namespace {

template <typename P, typename Ref>
std::vector<Ref> collect(P& p) {
  std::vector<Ref> out;
  const auto group = [&](auto& layers, const std::string& name) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      out.push_back({name + "." + std::to_string(i) + ".weight", &layers[i].weight});
      out.push_back({name + "." + std::to_string(i) + ".bias", &layers[i].bias});
    }
  };
  group(p.point_mlp, "point");
  group(p.lift_mlp, "lift");
  group(p.decoder, "decoder");
  group(p.tag_head, "tag_head");
  group(p.seg_head, "seg_head");
  group(p.ae_decoder, "ae_decoder");
  return out;
}

}  // namespace

template <typename T>
std::vector<TensorRef<T>> tensors(PenParams<T>& p) {
  return collect<PenParams<T>, TensorRef<T>>(p);
}

template <typename T>
std::vector<ConstTensorRef<T>> tensors(const PenParams<T>& p) {
  return collect<const PenParams<T>, ConstTensorRef<T>>(p);
}

bool is_trunk_tensor(const std::string& name) {
  return name.rfind("point.", 0) == 0 || name.rfind("lift.", 0) == 0 || name.rfind("decoder.", 0) == 0;
}

// ---------------------------------------------------------------------------

namespace {

/// Runs the point and lift layers; fills everything up to `global`.
template <typename T>
void encode_into(const PenParams<T>& p, const Mat<T>& points, ForwardTrace<T>& tr) {
  if (points.rows() != 3 || points.cols() < 1) throw InputError("forward needs a 3 x N point matrix with N >= 1");
  tr.input = points;
  tr.point_act.clear();
  tr.point_act.reserve(p.point_mlp.size());
  const Mat<T>* cur = &tr.input;
  for (const auto& layer : p.point_mlp) {
    Mat<T> y = affine(layer, *cur);
    relu_inplace(y);
    tr.point_act.push_back(std::move(y));
    cur = &tr.point_act.back();
  }
  tr.lift_act.clear();
  tr.lift_act.reserve(p.lift_mlp.size());
  for (std::size_t l = 0; l + 1 < p.lift_mlp.size(); ++l) {
    Mat<T> y = affine(p.lift_mlp[l], *cur);
    relu_inplace(y);
    tr.lift_act.push_back(std::move(y));
    cur = &tr.lift_act.back();
  }
  const Mat<T> lifted = affine(p.lift_mlp.back(), *cur);
  const Eigen::Index channels = lifted.rows();
  tr.global = lifted.col(0);
  tr.argmax.assign(static_cast<std::size_t>(channels), 0);
  for (Eigen::Index j = 1; j < lifted.cols(); ++j) {
    const auto col = lifted.col(j);
    for (Eigen::Index c = 0; c < channels; ++c)
      if (col[c] > tr.global[c]) {
        tr.global[c] = col[c];
        tr.argmax[static_cast<std::size_t>(c)] = j;
      }
  }
}

}  // namespace

template <typename T>
ForwardTrace<T> encode(const PenParams<T>& params, const Mat<T>& points) {
  ForwardTrace<T> tr;
  encode_into(params, points, tr);
  return tr;
}

template <typename T>
Vec<T> global_feature(const PenParams<T>& params, const Mat<T>& points) {
  return encode(params, points).global;
}

template <typename T>
ForwardTrace<T> forward(const PenParams<T>& p, const Mat<T>& points) {
  ForwardTrace<T> tr;
  encode_into(p, points, tr);
  const Mat<T>& feature = tr.point_act.back();
  const int pd = p.arch.point_dim(), gd = p.arch.global_dim();

  tr.decoder_act.clear();
  tr.decoder_act.reserve(p.decoder.size());
  const Dense<T>& first = p.decoder.front();
  Mat<T> y = first.weight.leftCols(pd) * feature;
  const Vec<T> shared = first.weight.rightCols(gd) * tr.global + first.bias.col(0);
  y.colwise() += shared;
  for (std::size_t l = 1; l < p.decoder.size(); ++l) {
    relu_inplace(y);
    tr.decoder_act.push_back(std::move(y));
    y = affine(p.decoder[l], tr.decoder_act.back());
  }
  tr.raw_embedding = std::move(y);
  tr.norms = tr.raw_embedding.colwise().norm().transpose();
  tr.norms = tr.norms.cwiseMax(T(kMinEmbeddingNorm<T>));
  tr.embedding = tr.raw_embedding * tr.norms.cwiseInverse().asDiagonal();
  // A vanishing raw embedding has no direction; pin it to the first axis.
  for (Eigen::Index i = 0; i < tr.embedding.cols(); ++i)
    if (tr.norms[i] <= T(kMinEmbeddingNorm<T>)) {
      tr.embedding.col(i).setZero();
      tr.embedding(0, i) = T(1);
    }
  return tr;
}

template <typename T>
void backward(const PenParams<T>& p, const ForwardTrace<T>& tr, const Mat<T>* d_embedding, const Vec<T>* d_global,
              PenParams<T>& g) {
  const Eigen::Index n = tr.num_points();
  const int pd = p.arch.point_dim(), gd = p.arch.global_dim();
  if (tr.point_act.size() != p.point_mlp.size() || tr.global.size() != gd || n == 0)
    throw InputError("stale forward trace: architecture mismatch");
  if (g.point_mlp.size() != p.point_mlp.size() || g.decoder.size() != p.decoder.size())
    throw InputError("gradient container does not match parameters");

  Mat<T> d_feature = Mat<T>::Zero(pd, n);
  Vec<T> dg = Vec<T>::Zero(gd);

  if (d_embedding) {
    if (d_embedding->rows() != tr.embedding.rows() || d_embedding->cols() != n)
      throw InputError("stale forward trace: embedding gradient is " + std::to_string(d_embedding->rows()) + "x" +
                       std::to_string(d_embedding->cols()) + ", trace has " + std::to_string(tr.embedding.rows()) +
                       "x" + std::to_string(n));
    // Jacobian of x / |x|: (I - e e^T) / |x|.
    const Eigen::Matrix<T, 1, Eigen::Dynamic> dots = tr.embedding.cwiseProduct(*d_embedding).colwise().sum();
    Mat<T> dy = (*d_embedding - tr.embedding * dots.asDiagonal()) * tr.norms.cwiseInverse().asDiagonal();
    for (Eigen::Index i = 0; i < n; ++i)
      if (tr.norms[i] <= T(kMinEmbeddingNorm<T>)) dy.col(i).setZero();

    for (std::size_t l = p.decoder.size() - 1; l >= 1; --l) {
      const Mat<T>& x = tr.decoder_act[l - 1];
      accumulate(g.decoder[l], dy, x);
      Mat<T> dx = p.decoder[l].weight.transpose() * dy;
      mask_relu(dx, x);
      dy = std::move(dx);
    }
    const Mat<T>& feature = tr.point_act.back();
    const Vec<T> row_sum = dy.rowwise().sum();
    g.decoder[0].weight.leftCols(pd).noalias() += dy * feature.transpose();
    g.decoder[0].weight.rightCols(gd).noalias() += row_sum * tr.global.transpose();
    g.decoder[0].bias.col(0) += row_sum;
    d_feature.noalias() += p.decoder[0].weight.leftCols(pd).transpose() * dy;
    dg.noalias() += p.decoder[0].weight.rightCols(gd).transpose() * row_sum;
  }
  if (d_global) {
    if (d_global->size() != gd) throw InputError("global gradient has wrong size");
    dg += *d_global;
  }

  // Max-pool routes each channel's gradient to its argmax point only, so the
  // lift layers are back-propagated on the winning columns alone.
  std::vector<Eigen::Index> cols(tr.argmax.begin(), tr.argmax.end());
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  const auto ns = static_cast<Eigen::Index>(cols.size());
  const auto slot = [&](Eigen::Index point) {
    return static_cast<Eigen::Index>(std::lower_bound(cols.begin(), cols.end(), point) - cols.begin());
  };
  Mat<T> dy = Mat<T>::Zero(gd, ns);
  for (Eigen::Index c = 0; c < gd; ++c) dy(c, slot(tr.argmax[static_cast<std::size_t>(c)])) = dg[c];

  const auto gather = [&](const Mat<T>& m) {
    Mat<T> out(m.rows(), ns);
    for (Eigen::Index k = 0; k < ns; ++k) out.col(k) = m.col(cols[static_cast<std::size_t>(k)]);
    return out;
  };
  for (std::size_t l = p.lift_mlp.size(); l-- > 0;) {
    const Mat<T> x = gather(l == 0 ? tr.point_act.back() : tr.lift_act[l - 1]);
    accumulate(g.lift_mlp[l], dy, x);
    Mat<T> dx = p.lift_mlp[l].weight.transpose() * dy;
    if (l > 0) mask_relu(dx, x);
    dy = std::move(dx);
  }
  for (Eigen::Index k = 0; k < ns; ++k) d_feature.col(cols[static_cast<std::size_t>(k)]) += dy.col(k);

  Mat<T> dp = std::move(d_feature);
  mask_relu(dp, tr.point_act.back());
  for (std::size_t l = p.point_mlp.size(); l-- > 0;) {
    const Mat<T>& x = l == 0 ? tr.input : tr.point_act[l - 1];
    accumulate(g.point_mlp[l], dp, x);
    if (l == 0) break;
    Mat<T> dx = p.point_mlp[l].weight.transpose() * dp;
    mask_relu(dx, x);
    dp = std::move(dx);
  }
}

template <typename T>
HeadTrace<T> head_forward(const std::vector<Dense<T>>& head, const Mat<T>& embedding) {
  if (head.size() != 2) throw InputError("head must have exactly two layers");
  HeadTrace<T> tr;
  tr.hidden = affine(head[0], embedding);
  relu_inplace(tr.hidden);
  tr.logits = affine(head[1], tr.hidden);
  return tr;
}

template <typename T>
void head_backward(const std::vector<Dense<T>>& head, const Mat<T>& embedding, const HeadTrace<T>& tr,
                   const Mat<T>& d_logits, std::vector<Dense<T>>& head_grads, Mat<T>& d_embedding) {
  if (d_logits.rows() != tr.logits.rows() || d_logits.cols() != tr.logits.cols())
    throw InputError("head gradient shape does not match trace");
  accumulate(head_grads[1], d_logits, tr.hidden);
  Mat<T> dh = head[1].weight.transpose() * d_logits;
  mask_relu(dh, tr.hidden);
  accumulate(head_grads[0], dh, embedding);
  if (d_embedding.size() == 0) d_embedding = Mat<T>::Zero(embedding.rows(), embedding.cols());
  d_embedding.noalias() += head[0].weight.transpose() * dh;
}

template <typename T>
AeTrace<T> ae_forward(const PenParams<T>& p, const Vec<T>& global) {
  if (p.ae_decoder.empty()) throw InputError("parameters have no autoencoder decoder");
  AeTrace<T> tr;
  Vec<T> h = global;
  for (std::size_t l = 0; l + 1 < p.ae_decoder.size(); ++l) {
    h = (p.ae_decoder[l].weight * h + p.ae_decoder[l].bias.col(0)).cwiseMax(T(0));
    tr.act.push_back(h);
  }
  const Vec<T> out = p.ae_decoder.back().weight * h + p.ae_decoder.back().bias.col(0);
  tr.reconstruction = Eigen::Map<const Mat<T>>(out.data(), 3, out.size() / 3);
  return tr;
}

template <typename T>
Vec<T> ae_backward(const PenParams<T>& p, const Vec<T>& global, const AeTrace<T>& tr, const Mat<T>& d_recon,
                   PenParams<T>& g) {
  if (d_recon.rows() != 3 || d_recon.cols() != tr.reconstruction.cols())
    throw InputError("reconstruction gradient shape does not match trace");
  Vec<T> dy = Eigen::Map<const Vec<T>>(d_recon.data(), d_recon.size());
  for (std::size_t l = p.ae_decoder.size(); l-- > 0;) {
    const Vec<T>& x = l == 0 ? global : tr.act[l - 1];
    g.ae_decoder[l].weight.noalias() += dy * x.transpose();
    g.ae_decoder[l].bias.col(0) += dy;
    Vec<T> dx = p.ae_decoder[l].weight.transpose() * dy;
    if (l > 0) dx = (x.array() > T(0)).select(dx, T(0));
    dy = std::move(dx);
  }
  return dy;
}

#define PEN_INSTANTIATE(T)                                                                                   \
  template struct PenParams<T>;                                                                              \
  template std::vector<TensorRef<T>> tensors(PenParams<T>&);                                                 \
  template std::vector<ConstTensorRef<T>> tensors(const PenParams<T>&);                                      \
  template ForwardTrace<T> forward(const PenParams<T>&, const Mat<T>&);                                      \
  template Vec<T> global_feature(const PenParams<T>&, const Mat<T>&);                                        \
  template ForwardTrace<T> encode(const PenParams<T>&, const Mat<T>&);                                        \
  template void backward(const PenParams<T>&, const ForwardTrace<T>&, const Mat<T>*, const Vec<T>*,          \
                         PenParams<T>&);                                                                     \
  template HeadTrace<T> head_forward(const std::vector<Dense<T>>&, const Mat<T>&);                           \
  template void head_backward(const std::vector<Dense<T>>&, const Mat<T>&, const HeadTrace<T>&,              \
                              const Mat<T>&, std::vector<Dense<T>>&, Mat<T>&);                               \
  template AeTrace<T> ae_forward(const PenParams<T>&, const Vec<T>&);                                        \
  template Vec<T> ae_backward(const PenParams<T>&, const Vec<T>&, const AeTrace<T>&, const Mat<T>&,          \
                              PenParams<T>&);

PEN_INSTANTIATE(float)
PEN_INSTANTIATE(double)
#undef PEN_INSTANTIATE

template PenParams<double> PenParams<float>::cast<double>() const;
template PenParams<float> PenParams<double>::cast<float>() const;
template PenParams<float> PenParams<float>::cast<float>() const;
template PenParams<double> PenParams<double>::cast<double>() const;

}  // namespace pen
