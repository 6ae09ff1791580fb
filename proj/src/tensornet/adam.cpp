#include "deskflow/adam.hpp"

#include <cmath>

#include "deskflow/errors.hpp"

namespace deskflow::nn {

template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads,
               AdamState<T>& state, double lr) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const Tensor<T>* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state does not match parameters");
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T step = static_cast<T>(lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(state.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    Tensor<T>& m = state.m[i];
    Tensor<T>& v = state.v[i];
    if (!(m.shape() == p.shape())) throw ShapeError("adam_step: moment shape mismatch for parameter " + std::to_string(i));
    const Tensor<T>* g = grads[i];
    const bool has_grad = g && !g->empty();
    if (has_grad && !(g->shape() == p.shape())) throw ShapeError("adam_step: gradient shape mismatch");
    for (std::size_t j = 0; j < p.size(); ++j) {
      const T gj = has_grad ? g->data()[j] : T(0);
      m.data()[j] = b1 * m.data()[j] + (T(1) - b1) * gj;
      v.data()[j] = b2 * v.data()[j] + (T(1) - b2) * gj * gj;
      p.data()[j] -= step * m.data()[j] / (std::sqrt(v.data()[j] * inv_c2) + eps);
    }
  }
}

template <typename T>
void adam_step(ParamSet<T>& params, AdamState<T>& state, double lr) {
  std::vector<Tensor<T>*> values;
  std::vector<const Tensor<T>*> grads;
  for (const auto& p : params.items()) {
    values.push_back(&p.var->value);
    grads.push_back(p.var->has_grad() ? &p.var->grad : nullptr);
  }
  adam_step(values, grads, state, lr);
}

template void adam_step(const std::vector<Tensor<float>*>&, const std::vector<const Tensor<float>*>&,
                        AdamState<float>&, double);
template void adam_step(const std::vector<Tensor<double>*>&, const std::vector<const Tensor<double>*>&,
                        AdamState<double>&, double);
template void adam_step(ParamSet<float>&, AdamState<float>&, double);
template void adam_step(ParamSet<double>&, AdamState<double>&, double);

}  // namespace deskflow::nn
