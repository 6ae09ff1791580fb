#pragma once

// Dense building blocks for the convolution ops. Row-major matrices; all
// loops have a fixed summation order so results are reproducible.

#include <cstddef>

namespace deskflow::nn::kernels {

/// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = a[static_cast<std::size_t>(i) * k + p];
      if (av == T(0)) continue;
      const T* brow = b + static_cast<std::size_t>(p) * n;
#pragma omp simd
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// C[m x n] += A[m x k] * B[n x k]^T
template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::size_t>(j) * k;
      T sum = T(0);
#pragma omp simd reduction(+ : sum)
      for (int p = 0; p < k; ++p) sum += arow[p] * brow[p];
      c[static_cast<std::size_t>(i) * n + j] += sum;
    }
  }
}

/// C[m x n] += A[k x m]^T * B[k x n]
template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int p = 0; p < k; ++p) {
    const T* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const T av = a[static_cast<std::size_t>(p) * m + i];
      if (av == T(0)) continue;
      T* crow = c + static_cast<std::size_t>(i) * n;
#pragma omp simd
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

struct ConvGeometry {
  int channels;
  int height;
  int width;
  int kernel;
  int stride;
  int padding;
  int out_h;
  int out_w;

  std::size_t col_rows() const { return static_cast<std::size_t>(channels) * kernel * kernel; }
  std::size_t col_cols() const { return static_cast<std::size_t>(out_h) * out_w; }
};

/// Unfolds image (channels x height x width) into col (col_rows x col_cols).
template <typename T>
void im2col(const ConvGeometry& g, const T* image, T* col) {
  const std::size_t cols = g.col_cols();
  for (int c = 0; c < g.channels; ++c)
    for (int ky = 0; ky < g.kernel; ++ky)
      for (int kx = 0; kx < g.kernel; ++kx) {
        T* row = col + ((static_cast<std::size_t>(c) * g.kernel + ky) * g.kernel + kx) * cols;
        const T* plane = image + static_cast<std::size_t>(c) * g.height * g.width;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          T* dst = row + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            for (int ox = 0; ox < g.out_w; ++ox) dst[ox] = T(0);
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : T(0);
          }
        }
      }
}

/// Adjoint of im2col: accumulates col back into image.
template <typename T>
void col2im(const ConvGeometry& g, const T* col, T* image) {
  const std::size_t cols = g.col_cols();
  for (int c = 0; c < g.channels; ++c)
    for (int ky = 0; ky < g.kernel; ++ky)
      for (int kx = 0; kx < g.kernel; ++kx) {
        const T* row = col + ((static_cast<std::size_t>(c) * g.kernel + ky) * g.kernel + kx) * cols;
        T* plane = image + static_cast<std::size_t>(c) * g.height * g.width;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.height) continue;
          const T* src = row + static_cast<std::size_t>(oy) * g.out_w;
          T* dst = plane + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
}

}  // namespace deskflow::nn::kernels
