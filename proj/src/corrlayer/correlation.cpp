#include "deskflow/correlation.hpp"

#include <string>
#include <vector>

#include "deskflow/errors.hpp"

namespace deskflow::nn {
namespace {

/// (c, h, w) plane of batch item n -> (h, w, c), so the channel sum is contiguous.
template <typename T>
std::vector<T> to_hwc(const Tensor<T>& t, int n) {
  const Shape s = t.shape();
  std::vector<T> out(static_cast<std::size_t>(s.c) * s.plane());
  for (int c = 0; c < s.c; ++c) {
    const T* src = t.plane(n, c);
    for (std::size_t i = 0; i < s.plane(); ++i) out[i * s.c + c] = src[i];
  }
  return out;
}

template <typename T>
void add_from_hwc(const std::vector<T>& hwc, Tensor<T>& t, int n) {
  const Shape s = t.shape();
  for (int c = 0; c < s.c; ++c) {
    T* dst = t.plane(n, c);
    for (std::size_t i = 0; i < s.plane(); ++i) dst[i] += hwc[i * s.c + c];
  }
}

void check_inputs(const Shape& a, const Shape& b, const CorrParams& p) {
  p.validate();
  if (!(a == b)) throw ShapeError("correlate: feature maps differ, " + a.str() + " vs " + b.str());
}

/// Visits every (output index, first-map offset, second-map offset) triple
/// with both reads in bounds. Offsets index hwc rows.
template <typename F>
void for_each_pair(const Shape& s, const CorrParams& p, F&& f) {
  const int r = p.grid_radius();
  const int oh = p.out_size(s.h);
  const int ow = p.out_size(s.w);
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  int channel = 0;
  for (int gy = -r; gy <= r; ++gy)
    for (int gx = -r; gx <= r; ++gx, ++channel) {
      const int dy = gy * p.s2;
      const int dx = gx * p.s2;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const std::size_t out_index = channel * out_plane + static_cast<std::size_t>(oy) * ow + ox;
          for (int py = -p.k; py <= p.k; ++py) {
            const int y1 = oy * p.s1 + py;
            const int y2 = y1 + dy;
            if (y1 < 0 || y1 >= s.h || y2 < 0 || y2 >= s.h) continue;
            for (int px = -p.k; px <= p.k; ++px) {
              const int x1 = ox * p.s1 + px;
              const int x2 = x1 + dx;
              if (x1 < 0 || x1 >= s.w || x2 < 0 || x2 >= s.w) continue;
              f(out_index, static_cast<std::size_t>(y1) * s.w + x1, static_cast<std::size_t>(y2) * s.w + x2);
            }
          }
        }
    }
}

}  // namespace

void CorrParams::validate() const {
  if (k < 0 || d < 0 || s1 < 1 || s2 < 1)
    throw ConfigError("invalid correlation parameters k=" + std::to_string(k) + " d=" + std::to_string(d) +
                      " s1=" + std::to_string(s1) + " s2=" + std::to_string(s2));
}

template <typename T>
Tensor<T> correlate_forward(const Tensor<T>& f1, const Tensor<T>& f2, const CorrParams& params) {
  const Shape s = f1.shape();
  check_inputs(s, f2.shape(), params);
  const int oh = params.out_size(s.h);
  const int ow = params.out_size(s.w);
  Tensor<T> out(Shape{s.n, params.channels(), oh, ow});
  const T norm = params.normalize ? T(1) / static_cast<T>(s.c * (2 * params.k + 1) * (2 * params.k + 1)) : T(1);
  const int c = s.c;
  for (int n = 0; n < s.n; ++n) {
    const std::vector<T> a = to_hwc(f1, n);
    const std::vector<T> b = to_hwc(f2, n);
    T* dst = out.plane(n, 0);
    for_each_pair(s, params, [&](std::size_t o, std::size_t i1, std::size_t i2) {
      const T* pa = a.data() + i1 * c;
      const T* pb = b.data() + i2 * c;
      T sum = T(0);
      for (int ch = 0; ch < c; ++ch) sum += pa[ch] * pb[ch];
      dst[o] += sum * norm;
    });
  }
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> correlate_backward(const Tensor<T>& grad_out, const Tensor<T>& f1,
                                                   const Tensor<T>& f2, const CorrParams& params) {
  const Shape s = f1.shape();
  check_inputs(s, f2.shape(), params);
  const Shape expected{s.n, params.channels(), params.out_size(s.h), params.out_size(s.w)};
  if (!(grad_out.shape() == expected))
    throw ShapeError("correlate_backward: gradient " + grad_out.shape().str() + ", expected " + expected.str());
  const T norm = params.normalize ? T(1) / static_cast<T>(s.c * (2 * params.k + 1) * (2 * params.k + 1)) : T(1);
  const int c = s.c;
  Tensor<T> g1(s), g2(s);
  for (int n = 0; n < s.n; ++n) {
    const std::vector<T> a = to_hwc(f1, n);
    const std::vector<T> b = to_hwc(f2, n);
    std::vector<T> ga(a.size()), gb(b.size());
    const T* g = grad_out.plane(n, 0);
    for_each_pair(s, params, [&](std::size_t o, std::size_t i1, std::size_t i2) {
      const T go = g[o] * norm;
      if (go == T(0)) return;
      const T* pa = a.data() + i1 * c;
      const T* pb = b.data() + i2 * c;
      T* qa = ga.data() + i1 * c;
      T* qb = gb.data() + i2 * c;
      for (int ch = 0; ch < c; ++ch) {
        qa[ch] += go * pb[ch];
        qb[ch] += go * pa[ch];
      }
    });
    add_from_hwc(ga, g1, n);
    add_from_hwc(gb, g2, n);
  }
  return {std::move(g1), std::move(g2)};
}

template <typename T>
Var<T> correlate(Tape<T>& tape, const Var<T>& f1, const Var<T>& f2, const CorrParams& params) {
  Tensor<T> out = correlate_forward(f1->value, f2->value, params);
  return tape.record("correlate", std::move(out), {f1, f2}, [params](Node<T>& node) {
    const Var<T>& a = node.inputs[0];
    const Var<T>& b = node.inputs[1];
    auto [ga, gb] = correlate_backward(node.grad, a->value, b->value, params);
    if (a->requires_grad) {
      T* dst = a->ensure_grad().data();
      for (std::size_t i = 0; i < ga.size(); ++i) dst[i] += ga.data()[i];
    }
    if (b->requires_grad) {
      T* dst = b->ensure_grad().data();
      for (std::size_t i = 0; i < gb.size(); ++i) dst[i] += gb.data()[i];
    }
  });
}

template Tensor<float> correlate_forward(const Tensor<float>&, const Tensor<float>&, const CorrParams&);
template Tensor<double> correlate_forward(const Tensor<double>&, const Tensor<double>&, const CorrParams&);
template std::pair<Tensor<float>, Tensor<float>> correlate_backward(const Tensor<float>&, const Tensor<float>&,
                                                                    const Tensor<float>&, const CorrParams&);
template std::pair<Tensor<double>, Tensor<double>> correlate_backward(const Tensor<double>&, const Tensor<double>&,
                                                                      const Tensor<double>&, const CorrParams&);
template Var<float> correlate(Tape<float>&, const Var<float>&, const Var<float>&, const CorrParams&);
template Var<double> correlate(Tape<double>&, const Var<double>&, const Var<double>&, const CorrParams&);

}  // namespace deskflow::nn
