#pragma once

#include <vector>

#include "deskflow/tape.hpp"

namespace deskflow::nn {

// Every op validates shapes (ShapeError), records itself on the tape and
// registers an exact analytic backward.

/// Cross-correlation convolution. weights: (c_out, c_in, kh, kw); bias may be
/// null. Output size floor((h + 2 * padding - kh) / stride) + 1.
template <typename T>
Var<T> conv2d(Tape<T>& tape, const Var<T>& input, const Var<T>& weights, const Var<T>& bias, int stride,
              int padding);

/// Transposed convolution ("upconvolution"). weights: (c_in, c_out, k, k).
/// With k = 4, stride 2, padding 1 the output is exactly twice the input size.
template <typename T>
Var<T> upconv2d(Tape<T>& tape, const Var<T>& input, const Var<T>& weights, const Var<T>& bias, int stride = 2,
                int padding = 1);

/// max(x, 0) + slope * min(x, 0); slope 0 is the plain ReLU.
template <typename T>
Var<T> relu(Tape<T>& tape, const Var<T>& input, T slope = T(0));

template <typename T>
Var<T> concat_channels(Tape<T>& tape, const std::vector<Var<T>>& inputs);

/// Bilinear resampling to an arbitrary size, pixel centers aligned
/// (src = (dst + 0.5) * in / out - 0.5, clamped at the border).
template <typename T>
Var<T> resize_bilinear(Tape<T>& tape, const Var<T>& input, int out_h, int out_w);

/// Integer-factor bilinear upsampling.
template <typename T>
Var<T> bilinear_resize(Tape<T>& tape, const Var<T>& input, int factor);

/// Mean over factor x factor blocks; dimensions must be divisible by factor.
template <typename T>
Var<T> avg_downsample(Tape<T>& tape, const Var<T>& input, int factor);

template <typename T>
Var<T> scale(Tape<T>& tape, const Var<T>& input, T factor);

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b);

/// Scalar <input, weights> (weights constant). Handy as a probe loss.
template <typename T>
Var<T> dot_constant(Tape<T>& tape, const Var<T>& input, const Tensor<T>& weights);

/// Scalar sum_i coeffs[i] * terms[i] over single-element terms.
template <typename T>
Var<T> weighted_sum(Tape<T>& tape, const std::vector<Var<T>>& terms, const std::vector<T>& coeffs);

/// Mean endpoint error of a (n, 2, h, w) prediction against a constant target
/// over pixels where mask (n, 1, h, w) is nonzero. Zero when nothing is valid.
template <typename T>
Var<T> masked_epe(Tape<T>& tape, const Var<T>& pred, const Tensor<T>& target, const Tensor<T>& mask);

// Plain kernels, shared with code that does not need a tape.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& input, int out_h, int out_w);
template <typename T>
Tensor<T> avg_downsample(const Tensor<T>& input, int factor);

/// Zero-insertion unpooling by a factor of 2: out(2y, 2x) = in(y, x).
template <typename T>
Tensor<T> unpool_zero(const Tensor<T>& input);

}  // namespace deskflow::nn
