#pragma once

#include <cstdint>
#include <vector>

#include "deskflow/params.hpp"

namespace deskflow::nn {

template <typename T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
};

/// One bias-corrected Adam update. Moments are allocated on the first call;
/// an empty gradient counts as zero.
template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads,
               AdamState<T>& state, double lr);

/// Same, over every leaf in a parameter set (value updated, grad read).
template <typename T>
void adam_step(ParamSet<T>& params, AdamState<T>& state, double lr);

}  // namespace deskflow::nn
