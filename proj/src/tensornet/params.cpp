#include "deskflow/params.hpp"

#include <cmath>

#include "deskflow/errors.hpp"

namespace deskflow::nn {

template <typename T>
Var<T> ParamSet<T>::add(const std::string& name, Tensor<T> value) {
  if (contains(name)) throw Error("duplicate parameter name: " + name);
  Var<T> var = make_leaf(std::move(value), true, name);
  items_.push_back({name, var});
  return var;
}

template <typename T>
Var<T> ParamSet<T>::get(const std::string& name) const {
  for (const auto& p : items_)
    if (p.name == name) return p.var;
  throw Error("unknown parameter: " + name);
}

template <typename T>
bool ParamSet<T>::contains(const std::string& name) const {
  for (const auto& p : items_)
    if (p.name == name) return true;
  return false;
}

template <typename T>
std::size_t ParamSet<T>::count() const {
  std::size_t total = 0;
  for (const auto& p : items_) total += p.var->value.size();
  return total;
}

template <typename T>
void ParamSet<T>::zero_grad() {
  for (auto& p : items_)
    if (p.var->has_grad()) p.var->grad.fill(T(0));
}

template <typename T>
void he_init(Tensor<T>& weights, int fan_in, Rng& rng) {
  if (fan_in <= 0) throw Error("he_init: fan_in must be positive");
  const double sigma = std::sqrt(2.0 / fan_in);
  for (T& v : weights.values()) v = static_cast<T>(rng.normal(0.0, sigma));
}

template class ParamSet<float>;
template class ParamSet<double>;
template void he_init(Tensor<float>&, int, Rng&);
template void he_init(Tensor<double>&, int, Rng&);

}  // namespace deskflow::nn
