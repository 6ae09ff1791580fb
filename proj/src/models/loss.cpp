#include "deskflow/errors.hpp"
#include "deskflow/model.hpp"
#include "deskflow/ops.hpp"

namespace deskflow {

using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

template <typename T>
void downsample_target(const Tensor<T>& flow, const Tensor<T>& mask, int factor, Tensor<T>& flow_out,
                       Tensor<T>& mask_out) {
  const Shape s = flow.shape();
  if (s.c != 2 || !(mask.shape() == Shape{s.n, 1, s.h, s.w}))
    throw ShapeError("downsample_flow_target: expected (n,2,h,w) flow and (n,1,h,w) mask");
  if (factor < 1 || s.h % factor || s.w % factor)
    throw ShapeError("downsample_flow_target: " + s.str() + " not divisible by " + std::to_string(factor));
  const int oh = s.h / factor, ow = s.w / factor;
  flow_out = Tensor<T>(Shape{s.n, 2, oh, ow});
  mask_out = Tensor<T>(Shape{s.n, 1, oh, ow});
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        T su = T(0), sv = T(0);
        int count = 0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx) {
            const int yy = y * factor + dy, xx = x * factor + dx;
            if (mask.at(n, 0, yy, xx) == T(0)) continue;
            su += flow.at(n, 0, yy, xx);
            sv += flow.at(n, 1, yy, xx);
            ++count;
          }
        if (!count) continue;
        const T scale = T(1) / (static_cast<T>(count) * static_cast<T>(factor));
        flow_out.at(n, 0, y, x) = su * scale;
        flow_out.at(n, 1, y, x) = sv * scale;
        mask_out.at(n, 0, y, x) = T(1);
      }
}

}  // namespace

void downsample_flow_target(const Tensor<float>& flow, const Tensor<float>& mask, int factor, Tensor<float>& flow_out,
                            Tensor<float>& mask_out) {
  downsample_target(flow, mask, factor, flow_out, mask_out);
}

void downsample_flow_target(const Tensor<double>& flow, const Tensor<double>& mask, int factor,
                            Tensor<double>& flow_out, Tensor<double>& mask_out) {
  downsample_target(flow, mask, factor, flow_out, mask_out);
}

template <typename T>
Var<T> multiscale_epe_loss(nn::Tape<T>& tape, const FlowPyramid<T>& pyramid, const Tensor<T>& flow,
                           const Tensor<T>& mask, const std::vector<double>& weights) {
  if (weights.size() != pyramid.levels.size())
    throw ShapeError("multiscale_epe_loss: " + std::to_string(weights.size()) + " weights for " +
                     std::to_string(pyramid.levels.size()) + " levels");
  std::vector<Var<T>> terms;
  std::vector<T> coeffs;
  for (std::size_t l = 0; l < pyramid.levels.size(); ++l) {
    Tensor<T> target, target_mask;
    downsample_target(flow, mask, pyramid.factors[l], target, target_mask);
    terms.push_back(nn::masked_epe(tape, pyramid.levels[l], target, target_mask));
    coeffs.push_back(static_cast<T>(weights[l]));
  }
  return nn::weighted_sum(tape, terms, coeffs);
}

template <typename T>
Tensor<T> full_resolution_flow(const FlowPyramid<T>& pyramid) {
  if (pyramid.levels.empty()) throw ShapeError("full_resolution_flow: empty pyramid");
  const Tensor<T>& finest = pyramid.levels.back()->value;
  const int f = pyramid.factors.back();
  Tensor<T> out = nn::resize_bilinear(finest, finest.shape().h * f, finest.shape().w * f);
  for (T& v : out.values()) v *= static_cast<T>(f);
  return out;
}

template Var<float> multiscale_epe_loss(nn::Tape<float>&, const FlowPyramid<float>&, const Tensor<float>&,
                                        const Tensor<float>&, const std::vector<double>&);
template Var<double> multiscale_epe_loss(nn::Tape<double>&, const FlowPyramid<double>&, const Tensor<double>&,
                                         const Tensor<double>&, const std::vector<double>&);
template Tensor<float> full_resolution_flow(const FlowPyramid<float>&);
template Tensor<double> full_resolution_flow(const FlowPyramid<double>&);

}  // namespace deskflow
