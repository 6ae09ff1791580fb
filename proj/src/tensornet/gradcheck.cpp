#include "deskflow/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "deskflow/errors.hpp"
#include "deskflow/rng.hpp"

namespace deskflow::nn {
namespace {

double evaluate(const ScalarFn& fn, const std::vector<Tensor<double>>& inputs) {
  Tape<double> tape;
  std::vector<Var<double>> leaves;
  for (const auto& t : inputs) leaves.push_back(make_leaf(t, false));
  Var<double> out = fn(tape, leaves);
  if (out->value.size() != 1) throw ShapeError("gradcheck: function must return a scalar");
  return out->value.data()[0];
}

}  // namespace

GradcheckResult gradcheck(const ScalarFn& fn, const std::vector<Tensor<double>>& inputs, double eps,
                          std::size_t max_coords, std::uint64_t seed, double floor) {
  Tape<double> tape;
  std::vector<Var<double>> leaves;
  for (const auto& t : inputs) leaves.push_back(make_leaf(t, true));
  Var<double> out = fn(tape, leaves);
  tape.backward(out);

  GradcheckResult result;
  Rng rng(seed);
  std::vector<Tensor<double>> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<std::size_t> coords(inputs[i].size());
    std::iota(coords.begin(), coords.end(), 0);
    if (max_coords && coords.size() > max_coords) {
      for (std::size_t j = 0; j < max_coords; ++j)
        std::swap(coords[j], coords[j + rng.uniform_int(0, static_cast<std::int64_t>(coords.size() - j - 1))]);
      coords.resize(max_coords);
    }
    for (std::size_t j : coords) {
      const double original = probe[i].data()[j];
      probe[i].data()[j] = original + eps;
      const double plus = evaluate(fn, probe);
      probe[i].data()[j] = original - eps;
      const double minus = evaluate(fn, probe);
      probe[i].data()[j] = original;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double analytic = leaves[i]->has_grad() ? leaves[i]->grad.data()[j] : 0.0;
      const double abs_err = std::abs(analytic - numeric);
      const double rel_err = abs_err / std::max({std::abs(analytic), std::abs(numeric), floor});
      result.max_abs_error = std::max(result.max_abs_error, abs_err);
      result.max_rel_error = std::max(result.max_rel_error, rel_err);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace deskflow::nn
