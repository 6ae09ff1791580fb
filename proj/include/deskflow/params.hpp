#pragma once

#include <string>
#include <vector>

#include "deskflow/rng.hpp"
#include "deskflow/tape.hpp"

namespace deskflow::nn {

template <typename T>
struct NamedParam {
  std::string name;
  Var<T> var;
};

/// Ordered, named set of trainable leaves. Order is creation order and is
/// what the checkpoint and the optimizer state follow.
template <typename T>
class ParamSet {
 public:
  /// Adds a trainable leaf; duplicate names are rejected.
  Var<T> add(const std::string& name, Tensor<T> value);
  Var<T> get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<NamedParam<T>>& items() const { return items_; }
  std::size_t count() const;  // total scalar count
  void zero_grad();

 private:
  std::vector<NamedParam<T>> items_;
};

/// He-style fan-in initialization: N(0, sqrt(2 / fan_in)).
template <typename T>
void he_init(Tensor<T>& weights, int fan_in, Rng& rng);

extern template class ParamSet<float>;
extern template class ParamSet<double>;

}  // namespace deskflow::nn
