#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "deskflow/tape.hpp"

namespace deskflow::nn {

struct GradcheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  bool passed(double tol) const { return max_rel_error <= tol; }
};

/// Builds a scalar from leaves on a fresh tape.
using ScalarFn = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

/// Compares the tape's gradient with central differences for every input
/// coordinate (or a random subset of at most max_coords per input).
/// Relative error is |a - n| / max(|a|, |n|, floor).
GradcheckResult gradcheck(const ScalarFn& fn, const std::vector<Tensor<double>>& inputs, double eps = 1e-5,
                          std::size_t max_coords = 0, std::uint64_t seed = 0, double floor = 1e-6);

}  // namespace deskflow::nn
