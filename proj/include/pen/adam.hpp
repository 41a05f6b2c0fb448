#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pen/network.hpp"

namespace pen {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates, one pair per tensor in `tensors()` order.
template <typename T>
struct AdamState {
  std::vector<Mat<T>> m, v;
  std::int64_t step = 0;

  static AdamState init(const PenParams<T>& params);
};

/// One bias-corrected Adam update. `lr_scale` is empty (every tensor at `lr`)
/// or holds a multiplier per tensor; 0 freezes a tensor. Throws
/// OptimizerError naming the tensor when a gradient is not finite, before any
/// parameter is touched, and when the state does not match the parameters.
template <typename T>
void adam_step(PenParams<T>& params, const PenParams<T>& grads, AdamState<T>& state, double lr,
               const AdamConfig& cfg, std::span<const double> lr_scale = {});

/// Per-tensor multipliers: `trunk` for trunk tensors, `head` for the rest.
std::vector<double> lr_scales(const std::vector<std::string>& names, double trunk, double head);

template <typename T>
std::vector<std::string> tensor_names(const PenParams<T>& params);

}  // namespace pen
