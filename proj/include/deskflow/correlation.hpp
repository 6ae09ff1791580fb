#pragma once

#include <utility>

#include "deskflow/tape.hpp"

namespace deskflow::nn {

/// Patch comparison between two feature maps.
///   k  patch half-width (patch 2k+1)
///   d  maximum displacement
///   s1 stride over first-map positions, aligned at 0
///   s2 stride of the displacement grid
/// Output channel order is row-major over (dy, dx) from (-d, -d) to (+d, +d).
struct CorrParams {
  int k = 0;
  int d = 20;
  int s1 = 1;
  int s2 = 2;
  /// Divide by channels * (2k+1)^2. Off reproduces the raw sum.
  bool normalize = false;

  void validate() const;
  int grid_radius() const { return d / s2; }
  int channels() const { return (2 * grid_radius() + 1) * (2 * grid_radius() + 1); }
  int out_size(int extent) const { return (extent + s1 - 1) / s1; }
};

/// f1, f2: (n, c, h, w) with equal shapes -> (n, channels(), out_size(h), out_size(w)).
/// Reads outside either map contribute zero.
template <typename T>
Tensor<T> correlate_forward(const Tensor<T>& f1, const Tensor<T>& f2, const CorrParams& params);

/// Exact adjoint of correlate_forward; returns (grad_f1, grad_f2).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> correlate_backward(const Tensor<T>& grad_out, const Tensor<T>& f1,
                                                   const Tensor<T>& f2, const CorrParams& params);

/// Tape op wrapper.
template <typename T>
Var<T> correlate(Tape<T>& tape, const Var<T>& f1, const Var<T>& f2, const CorrParams& params);

}  // namespace deskflow::nn
