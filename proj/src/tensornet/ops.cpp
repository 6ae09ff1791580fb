#include "deskflow/ops.hpp"

#include <cmath>
#include <memory>

#include "deskflow/errors.hpp"
#include "kernels.hpp"

namespace deskflow::nn {
namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw ShapeError(message);
}

template <typename T>
void check_bias(const Var<T>& bias, int channels, const char* op) {
  if (bias) require(static_cast<int>(bias->value.size()) == channels, std::string(op) + ": bias size mismatch");
}

/// Precomputed 1-d bilinear taps for resize_bilinear.
struct Taps {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

Taps bilinear_taps(int in, int out) {
  Taps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    if (src > in - 1) src = in - 1;
    const int lo = static_cast<int>(std::floor(src));
    t.lo[o] = lo;
    t.hi[o] = lo + 1 < in ? lo + 1 : lo;
    t.frac[o] = src - lo;
  }
  return t;
}

}  // namespace

template <typename T>
Var<T> conv2d(Tape<T>& tape, const Var<T>& input, const Var<T>& weights, const Var<T>& bias, int stride,
              int padding) {
  const Shape xs = input->value.shape();
  const Shape ws = weights->value.shape();
  require(ws.c == xs.c, "conv2d: weight input channels " + std::to_string(ws.c) + " vs input " + xs.str());
  require(ws.h == ws.w, "conv2d: kernels must be square");
  require(stride >= 1 && padding >= 0, "conv2d: invalid stride or padding");
  check_bias(bias, ws.n, "conv2d");
  const int out_h = (xs.h + 2 * padding - ws.h) / stride + 1;
  const int out_w = (xs.w + 2 * padding - ws.w) / stride + 1;
  require(xs.h + 2 * padding >= ws.h && xs.w + 2 * padding >= ws.w, "conv2d: kernel larger than padded input");

  const kernels::ConvGeometry g{xs.c, xs.h, xs.w, ws.h, stride, padding, out_h, out_w};
  const int cout = ws.n;
  const int kdim = static_cast<int>(g.col_rows());
  const int pix = static_cast<int>(g.col_cols());
  auto cols = std::make_shared<std::vector<T>>(g.col_rows() * g.col_cols() * xs.n);

  Tensor<T> out(Shape{xs.n, cout, out_h, out_w});
  for (int n = 0; n < xs.n; ++n) {
    T* col = cols->data() + static_cast<std::size_t>(n) * kdim * pix;
    kernels::im2col(g, input->value.plane(n, 0), col);
    T* y = out.plane(n, 0);
    kernels::gemm_nn(cout, pix, kdim, weights->value.data(), col, y);
    if (bias)
      for (int c = 0; c < cout; ++c)
        for (int i = 0; i < pix; ++i) y[static_cast<std::size_t>(c) * pix + i] += bias->value.data()[c];
  }

  return tape.record("conv2d", std::move(out), {input, weights, bias}, [g, cols, cout, kdim, pix](Node<T>& node) {
    const Var<T>& x = node.inputs[0];
    const Var<T>& w = node.inputs[1];
    const Var<T>& b = node.inputs[2];
    const int batch = node.value.shape().n;
    std::vector<T> gcol(static_cast<std::size_t>(kdim) * pix);
    for (int n = 0; n < batch; ++n) {
      const T* gy = node.grad.plane(n, 0);
      const T* col = cols->data() + static_cast<std::size_t>(n) * kdim * pix;
      if (w->requires_grad) kernels::gemm_nt(cout, kdim, pix, gy, col, w->ensure_grad().data());
      if (x->requires_grad) {
        std::fill(gcol.begin(), gcol.end(), T(0));
        kernels::gemm_tn(kdim, pix, cout, w->value.data(), gy, gcol.data());
        kernels::col2im(g, gcol.data(), x->ensure_grad().plane(n, 0));
      }
      if (b && b->requires_grad) {
        T* gb = b->ensure_grad().data();
        for (int c = 0; c < cout; ++c) {
          T s = T(0);
          for (int i = 0; i < pix; ++i) s += gy[static_cast<std::size_t>(c) * pix + i];
          gb[c] += s;
        }
      }
    }
  });
}

template <typename T>
Var<T> upconv2d(Tape<T>& tape, const Var<T>& input, const Var<T>& weights, const Var<T>& bias, int stride,
                int padding) {
  const Shape xs = input->value.shape();
  const Shape ws = weights->value.shape();  // (c_in, c_out, k, k)
  require(ws.n == xs.c, "upconv2d: weight input channels " + std::to_string(ws.n) + " vs input " + xs.str());
  require(ws.h == ws.w, "upconv2d: kernels must be square");
  require(stride >= 1 && padding >= 0, "upconv2d: invalid stride or padding");
  const int cout = ws.c;
  check_bias(bias, cout, "upconv2d");
  const int out_h = (xs.h - 1) * stride - 2 * padding + ws.h;
  const int out_w = (xs.w - 1) * stride - 2 * padding + ws.w;
  require(out_h > 0 && out_w > 0, "upconv2d: empty output");

  // Geometry of the equivalent forward convolution from the output back to the input grid.
  const kernels::ConvGeometry g{cout, out_h, out_w, ws.h, stride, padding, xs.h, xs.w};
  const int cin = xs.c;
  const int kdim = static_cast<int>(g.col_rows());
  const int pix = xs.h * xs.w;

  Tensor<T> out(Shape{xs.n, cout, out_h, out_w});
  std::vector<T> col(static_cast<std::size_t>(kdim) * pix);
  for (int n = 0; n < xs.n; ++n) {
    std::fill(col.begin(), col.end(), T(0));
    kernels::gemm_tn(kdim, pix, cin, weights->value.data(), input->value.plane(n, 0), col.data());
    kernels::col2im(g, col.data(), out.plane(n, 0));
    if (bias) {
      const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
      T* y = out.plane(n, 0);
      for (int c = 0; c < cout; ++c)
        for (std::size_t i = 0; i < plane; ++i) y[c * plane + i] += bias->value.data()[c];
    }
  }

  return tape.record("upconv2d", std::move(out), {input, weights, bias}, [g, cin, cout, kdim, pix](Node<T>& node) {
    const Var<T>& x = node.inputs[0];
    const Var<T>& w = node.inputs[1];
    const Var<T>& b = node.inputs[2];
    const int batch = node.value.shape().n;
    const std::size_t plane = node.value.shape().plane();
    std::vector<T> col(static_cast<std::size_t>(kdim) * pix);
    for (int n = 0; n < batch; ++n) {
      kernels::im2col(g, node.grad.plane(n, 0), col.data());
      if (x->requires_grad) kernels::gemm_nn(cin, pix, kdim, w->value.data(), col.data(), x->ensure_grad().plane(n, 0));
      if (w->requires_grad) kernels::gemm_nt(cin, kdim, pix, x->value.plane(n, 0), col.data(), w->ensure_grad().data());
      if (b && b->requires_grad) {
        T* gb = b->ensure_grad().data();
        const T* gy = node.grad.plane(n, 0);
        for (int c = 0; c < cout; ++c) {
          T s = T(0);
          for (std::size_t i = 0; i < plane; ++i) s += gy[c * plane + i];
          gb[c] += s;
        }
      }
    }
  });
}

template <typename T>
Var<T> relu(Tape<T>& tape, const Var<T>& input, T slope) {
  Tensor<T> out(input->value.shape());
  const T* x = input->value.data();
  T* y = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
  return tape.record("relu", std::move(out), {input}, [slope](Node<T>& node) {
    const Var<T>& in = node.inputs[0];
    T* gx = in->ensure_grad().data();
    const T* xv = in->value.data();
    const T* gy = node.grad.data();
    for (std::size_t i = 0; i < node.grad.size(); ++i) gx[i] += xv[i] > T(0) ? gy[i] : slope * gy[i];
  });
}

template <typename T>
Var<T> concat_channels(Tape<T>& tape, const std::vector<Var<T>>& inputs) {
  require(!inputs.empty(), "concat_channels: no inputs");
  const Shape first = inputs.front()->value.shape();
  int channels = 0;
  for (const auto& in : inputs) {
    const Shape s = in->value.shape();
    require(s.n == first.n && s.h == first.h && s.w == first.w,
            "concat_channels: " + s.str() + " does not match " + first.str());
    channels += s.c;
  }
  Tensor<T> out(Shape{first.n, channels, first.h, first.w});
  const std::size_t plane = first.plane();
  for (int n = 0; n < first.n; ++n) {
    int offset = 0;
    for (const auto& in : inputs) {
      const int c = in->value.shape().c;
      std::copy_n(in->value.plane(n, 0), c * plane, out.plane(n, offset));
      offset += c;
    }
  }
  return tape.record("concat_channels", std::move(out), inputs, [plane](Node<T>& node) {
    for (int n = 0; n < node.value.shape().n; ++n) {
      int offset = 0;
      for (const auto& in : node.inputs) {
        const int c = in->value.shape().c;
        if (in->requires_grad) {
          T* dst = in->ensure_grad().plane(n, 0);
          const T* src = node.grad.plane(n, offset);
          for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
        }
        offset += c;
      }
    }
  });
}

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& input, int out_h, int out_w) {
  const Shape s = input.shape();
  require(out_h > 0 && out_w > 0, "resize_bilinear: non-positive output size");
  const Taps ty = bilinear_taps(s.h, out_h);
  const Taps tx = bilinear_taps(s.w, out_w);
  Tensor<T> out(Shape{s.n, s.c, out_h, out_w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* src = input.plane(n, c);
      T* dst = out.plane(n, c);
      for (int y = 0; y < out_h; ++y) {
        const T* r0 = src + static_cast<std::size_t>(ty.lo[y]) * s.w;
        const T* r1 = src + static_cast<std::size_t>(ty.hi[y]) * s.w;
        const T fy = static_cast<T>(ty.frac[y]);
        for (int x = 0; x < out_w; ++x) {
          const T fx = static_cast<T>(tx.frac[x]);
          const T top = (T(1) - fx) * r0[tx.lo[x]] + fx * r0[tx.hi[x]];
          const T bottom = (T(1) - fx) * r1[tx.lo[x]] + fx * r1[tx.hi[x]];
          dst[static_cast<std::size_t>(y) * out_w + x] = (T(1) - fy) * top + fy * bottom;
        }
      }
    }
  return out;
}

template <typename T>
Var<T> resize_bilinear(Tape<T>& tape, const Var<T>& input, int out_h, int out_w) {
  Tensor<T> out = resize_bilinear(input->value, out_h, out_w);
  const Shape s = input->value.shape();
  return tape.record("resize_bilinear", std::move(out), {input}, [s, out_h, out_w](Node<T>& node) {
    const Taps ty = bilinear_taps(s.h, out_h);
    const Taps tx = bilinear_taps(s.w, out_w);
    Tensor<T>& gin = node.inputs[0]->ensure_grad();
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        T* g = gin.plane(n, c);
        const T* gy = node.grad.plane(n, c);
        for (int y = 0; y < out_h; ++y) {
          T* r0 = g + static_cast<std::size_t>(ty.lo[y]) * s.w;
          T* r1 = g + static_cast<std::size_t>(ty.hi[y]) * s.w;
          const T fy = static_cast<T>(ty.frac[y]);
          for (int x = 0; x < out_w; ++x) {
            const T fx = static_cast<T>(tx.frac[x]);
            const T v = gy[static_cast<std::size_t>(y) * out_w + x];
            r0[tx.lo[x]] += (T(1) - fy) * (T(1) - fx) * v;
            r0[tx.hi[x]] += (T(1) - fy) * fx * v;
            r1[tx.lo[x]] += fy * (T(1) - fx) * v;
            r1[tx.hi[x]] += fy * fx * v;
          }
        }
      }
  });
}

template <typename T>
Var<T> bilinear_resize(Tape<T>& tape, const Var<T>& input, int factor) {
  require(factor >= 1, "bilinear_resize: factor must be positive");
  const Shape s = input->value.shape();
  return resize_bilinear(tape, input, s.h * factor, s.w * factor);
}

template <typename T>
Tensor<T> avg_downsample(const Tensor<T>& input, int factor) {
  require(factor >= 1, "avg_downsample: factor must be positive");
  const Shape s = input.shape();
  require(s.h % factor == 0 && s.w % factor == 0, "avg_downsample: " + s.str() + " not divisible by factor");
  const int oh = s.h / factor;
  const int ow = s.w / factor;
  const T inv = T(1) / static_cast<T>(factor * factor);
  Tensor<T> out(Shape{s.n, s.c, oh, ow});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* src = input.plane(n, c);
      T* dst = out.plane(n, c);
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          T sum = T(0);
          for (int dy = 0; dy < factor; ++dy)
            for (int dx = 0; dx < factor; ++dx)
              sum += src[static_cast<std::size_t>(y * factor + dy) * s.w + x * factor + dx];
          dst[static_cast<std::size_t>(y) * ow + x] = sum * inv;
        }
    }
  return out;
}

template <typename T>
Var<T> avg_downsample(Tape<T>& tape, const Var<T>& input, int factor) {
  Tensor<T> out = avg_downsample(input->value, factor);
  return tape.record("avg_downsample", std::move(out), {input}, [factor](Node<T>& node) {
    Tensor<T>& gin = node.inputs[0]->ensure_grad();
    const Shape s = gin.shape();
    const Shape o = node.value.shape();
    const T inv = T(1) / static_cast<T>(factor * factor);
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        T* g = gin.plane(n, c);
        const T* gy = node.grad.plane(n, c);
        for (int y = 0; y < s.h; ++y)
          for (int x = 0; x < s.w; ++x)
            g[static_cast<std::size_t>(y) * s.w + x] += gy[static_cast<std::size_t>(y / factor) * o.w + x / factor] * inv;
      }
  });
}

template <typename T>
Var<T> scale(Tape<T>& tape, const Var<T>& input, T factor) {
  Tensor<T> out = input->value;
  for (T& v : out.values()) v *= factor;
  return tape.record("scale", std::move(out), {input}, [factor](Node<T>& node) {
    T* g = node.inputs[0]->ensure_grad().data();
    for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += factor * node.grad.data()[i];
  });
}

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  require(a->value.shape() == b->value.shape(), "add: shape mismatch");
  Tensor<T> out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b->value.data()[i];
  return tape.record("add", std::move(out), {a, b}, [](Node<T>& node) {
    for (const auto& in : node.inputs) {
      if (!in->requires_grad) continue;
      T* g = in->ensure_grad().data();
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad.data()[i];
    }
  });
}

template <typename T>
Var<T> dot_constant(Tape<T>& tape, const Var<T>& input, const Tensor<T>& weights) {
  require(input->value.shape() == weights.shape(), "dot_constant: shape mismatch");
  T sum = T(0);
  for (std::size_t i = 0; i < weights.size(); ++i) sum += input->value.data()[i] * weights.data()[i];
  return tape.record("dot_constant", Tensor<T>(Shape{1, 1, 1, 1}, sum), {input}, [weights](Node<T>& node) {
    const T g = node.grad.data()[0];
    T* gx = node.inputs[0]->ensure_grad().data();
    for (std::size_t i = 0; i < weights.size(); ++i) gx[i] += g * weights.data()[i];
  });
}

template <typename T>
Var<T> weighted_sum(Tape<T>& tape, const std::vector<Var<T>>& terms, const std::vector<T>& coeffs) {
  require(terms.size() == coeffs.size(), "weighted_sum: term/coefficient count mismatch");
  T sum = T(0);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    require(terms[i]->value.size() == 1, "weighted_sum: terms must be scalars");
    sum += coeffs[i] * terms[i]->value.data()[0];
  }
  return tape.record("weighted_sum", Tensor<T>(Shape{1, 1, 1, 1}, sum), terms, [coeffs](Node<T>& node) {
    const T g = node.grad.data()[0];
    for (std::size_t i = 0; i < node.inputs.size(); ++i)
      if (node.inputs[i]->requires_grad) node.inputs[i]->ensure_grad().data()[0] += coeffs[i] * g;
  });
}

template <typename T>
Var<T> masked_epe(Tape<T>& tape, const Var<T>& pred, const Tensor<T>& target, const Tensor<T>& mask) {
  const Shape s = pred->value.shape();
  require(s.c == 2, "masked_epe: prediction must have 2 channels");
  require(target.shape() == s, "masked_epe: target shape " + target.shape().str() + " vs " + s.str());
  require(mask.shape() == (Shape{s.n, 1, s.h, s.w}), "masked_epe: mask shape mismatch");
  const std::size_t plane = s.plane();
  T sum = T(0);
  std::size_t count = 0;
  for (int n = 0; n < s.n; ++n) {
    const T* pu = pred->value.plane(n, 0);
    const T* pv = pred->value.plane(n, 1);
    const T* tu = target.plane(n, 0);
    const T* tv = target.plane(n, 1);
    const T* m = mask.plane(n, 0);
    for (std::size_t i = 0; i < plane; ++i) {
      if (m[i] == T(0)) continue;
      const T du = pu[i] - tu[i];
      const T dv = pv[i] - tv[i];
      sum += std::sqrt(du * du + dv * dv);
      ++count;
    }
  }
  const T value = count ? sum / static_cast<T>(count) : T(0);
  return tape.record("masked_epe", Tensor<T>(Shape{1, 1, 1, 1}, value), {pred},
                     [target, mask, count, plane](Node<T>& node) {
                       if (count == 0) return;
                       const T g = node.grad.data()[0] / static_cast<T>(count);
                       const Var<T>& p = node.inputs[0];
                       Tensor<T>& gp = p->ensure_grad();
                       for (int n = 0; n < p->value.shape().n; ++n) {
                         const T* m = mask.plane(n, 0);
                         for (std::size_t i = 0; i < plane; ++i) {
                           if (m[i] == T(0)) continue;
                           const T du = p->value.plane(n, 0)[i] - target.plane(n, 0)[i];
                           const T dv = p->value.plane(n, 1)[i] - target.plane(n, 1)[i];
                           const T e = std::sqrt(du * du + dv * dv);
                           if (e == T(0)) continue;
                           gp.plane(n, 0)[i] += g * du / e;
                           gp.plane(n, 1)[i] += g * dv / e;
                         }
                       }
                     });
}

template <typename T>
Tensor<T> unpool_zero(const Tensor<T>& input) {
  const Shape s = input.shape();
  Tensor<T> out(Shape{s.n, s.c, 2 * s.h, 2 * s.w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) out.at(n, c, 2 * y, 2 * x) = input.at(n, c, y, x);
  return out;
}

#define DESKFLOW_INSTANTIATE_OPS(T)                                                                   \
  template Var<T> conv2d(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, int, int);           \
  template Var<T> upconv2d(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, int, int);         \
  template Var<T> relu(Tape<T>&, const Var<T>&, T);                                                  \
  template Var<T> concat_channels(Tape<T>&, const std::vector<Var<T>>&);                             \
  template Var<T> resize_bilinear(Tape<T>&, const Var<T>&, int, int);                                \
  template Var<T> bilinear_resize(Tape<T>&, const Var<T>&, int);                                     \
  template Var<T> avg_downsample(Tape<T>&, const Var<T>&, int);                                      \
  template Var<T> scale(Tape<T>&, const Var<T>&, T);                                                 \
  template Var<T> add(Tape<T>&, const Var<T>&, const Var<T>&);                                       \
  template Var<T> dot_constant(Tape<T>&, const Var<T>&, const Tensor<T>&);                           \
  template Var<T> weighted_sum(Tape<T>&, const std::vector<Var<T>>&, const std::vector<T>&);         \
  template Var<T> masked_epe(Tape<T>&, const Var<T>&, const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> resize_bilinear(const Tensor<T>&, int, int);                                    \
  template Tensor<T> avg_downsample(const Tensor<T>&, int);                                          \
  template Tensor<T> unpool_zero(const Tensor<T>&);

DESKFLOW_INSTANTIATE_OPS(float)
DESKFLOW_INSTANTIATE_OPS(double)

}  // namespace deskflow::nn
