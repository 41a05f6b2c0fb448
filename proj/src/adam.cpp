#include "pen/adam.hpp"

#include <cmath>

#include "pen/error.hpp"

namespace pen {

template <typename T>
AdamState<T> AdamState<T>::init(const PenParams<T>& params) {
  AdamState s;
  for (const auto& t : tensors(params)) {
    s.m.push_back(Mat<T>::Zero(t.tensor->rows(), t.tensor->cols()));
    s.v.push_back(Mat<T>::Zero(t.tensor->rows(), t.tensor->cols()));
  }
  return s;
}

template <typename T>
void adam_step(PenParams<T>& params, const PenParams<T>& grads, AdamState<T>& state, double lr,
               const AdamConfig& cfg, std::span<const double> lr_scale) {
  auto ps = tensors(params);
  const auto gs = tensors(grads);
  if (gs.size() != ps.size() || state.m.size() != ps.size() || state.v.size() != ps.size())
    throw OptimizerError("optimizer state holds " + std::to_string(state.m.size()) + " tensors, parameters " +
                         std::to_string(ps.size()));
  if (!lr_scale.empty() && lr_scale.size() != ps.size())
    throw OptimizerError("learning-rate scale list does not match the parameter tensors");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Mat<T>& g = *gs[i].tensor;
    if (g.rows() != ps[i].tensor->rows() || g.cols() != ps[i].tensor->cols() || state.m[i].rows() != g.rows() ||
        state.m[i].cols() != g.cols())
      throw OptimizerError("shape mismatch for tensor " + ps[i].name);
    if (!g.allFinite()) throw OptimizerError("non-finite gradient in " + ps[i].name);
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double scale = lr_scale.empty() ? 1.0 : lr_scale[i];
    if (scale == 0.0) continue;
    const Mat<T>& g = *gs[i].tensor;
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g.cwiseProduct(g);
    const T step = static_cast<T>(lr * scale / bc1);
    const T inv_bc2 = static_cast<T>(1.0 / bc2);
    ps[i].tensor->array() -= step * state.m[i].array() / ((state.v[i].array() * inv_bc2).sqrt() + eps);
  }
}

std::vector<double> lr_scales(const std::vector<std::string>& names, double trunk, double head) {
  std::vector<double> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(is_trunk_tensor(n) ? trunk : head);
  return out;
}

template <typename T>
std::vector<std::string> tensor_names(const PenParams<T>& params) {
  std::vector<std::string> out;
  for (const auto& t : tensors(params)) out.push_back(t.name);
  return out;
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(PenParams<float>&, const PenParams<float>&, AdamState<float>&, double,
                        const AdamConfig&, std::span<const double>);
template void adam_step(PenParams<double>&, const PenParams<double>&, AdamState<double>&, double,
                        const AdamConfig&, std::span<const double>);
template std::vector<std::string> tensor_names(const PenParams<float>&);
template std::vector<std::string> tensor_names(const PenParams<double>&);

}  // namespace pen
