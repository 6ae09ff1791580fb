#include <cmath>

#include "deskflow/errors.hpp"
#include "deskflow/model.hpp"
#include "deskflow/ops.hpp"

namespace deskflow {

using nn::Shape;
using nn::Tensor;

namespace {

int mirror(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  int m = i % period;
  return m < n ? m : period - m;
}

}  // namespace

Tensor<float> image_tensor(const Image& image) {
  Tensor<float> t(Shape{1, image.channels, image.height, image.width});
  std::copy(image.data.begin(), image.data.end(), t.data());
  return t;
}

void store_image(const Image& image, Tensor<float>& batch, int index) {
  const Shape s = batch.shape();
  if (image.channels != s.c || image.height != s.h || image.width != s.w || index < 0 || index >= s.n)
    throw ShapeError("store_image: image does not fit batch " + s.str());
  std::copy(image.data.begin(), image.data.end(), batch.plane(index, 0));
}

void store_flow(const FlowField& flow, Tensor<float>& batch_flow, Tensor<float>& batch_mask, int index) {
  const Shape s = batch_flow.shape();
  if (s.c != 2 || flow.height != s.h || flow.width != s.w || index < 0 || index >= s.n ||
      !(batch_mask.shape() == Shape{s.n, 1, s.h, s.w}))
    throw ShapeError("store_flow: field does not fit batch " + s.str());
  float* u = batch_flow.plane(index, 0);
  float* v = batch_flow.plane(index, 1);
  float* m = batch_mask.plane(index, 0);
  for (std::size_t i = 0; i < s.plane(); ++i) {
    const bool ok = flow.valid[i] != 0;
    u[i] = ok ? static_cast<float>(flow.u[i]) : 0.0f;
    v[i] = ok ? static_cast<float>(flow.v[i]) : 0.0f;
    m[i] = ok ? 1.0f : 0.0f;
  }
}

int padded_extent(int extent) { return (extent + 63) / 64 * 64; }

Tensor<float> reflect_pad(const Tensor<float>& t, int h, int w) {
  const Shape s = t.shape();
  if (h < s.h || w < s.w) throw ShapeError("reflect_pad: target smaller than input");
  Tensor<float> out(Shape{s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(n, c, y, x) = t.at(n, c, mirror(y, s.h), mirror(x, s.w));
  return out;
}

Tensor<float> zero_pad(const Tensor<float>& t, int h, int w) {
  const Shape s = t.shape();
  if (h < s.h || w < s.w) throw ShapeError("zero_pad: target smaller than input");
  Tensor<float> out(Shape{s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        std::copy_n(t.plane(n, c) + static_cast<std::size_t>(y) * s.w, s.w, out.plane(n, c) + static_cast<std::size_t>(y) * w);
  return out;
}

Tensor<float> crop(const Tensor<float>& t, int h, int w) {
  const Shape s = t.shape();
  if (h > s.h || w > s.w) throw ShapeError("crop: target larger than input");
  Tensor<float> out(Shape{s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < h; ++y)
        std::copy_n(t.plane(n, c) + static_cast<std::size_t>(y) * s.w, w, out.plane(n, c) + static_cast<std::size_t>(y) * w);
  return out;
}

Tensor<float> predict_batch(const FlowNet<float>& net, const Tensor<float>& img1, const Tensor<float>& img2,
                            double test_scale) {
  const Shape s = img1.shape();
  if (!(s == img2.shape())) throw ShapeError("predict: image shapes differ");
  if (!(test_scale > 0.0)) throw ConfigError("predict: test_scale must be positive");
  const int sh = std::max(1, static_cast<int>(std::lround(s.h * test_scale)));
  const int sw = std::max(1, static_cast<int>(std::lround(s.w * test_scale)));
  const bool rescale = sh != s.h || sw != s.w;
  Tensor<float> a = rescale ? nn::resize_bilinear(img1, sh, sw) : img1;
  Tensor<float> b = rescale ? nn::resize_bilinear(img2, sh, sw) : img2;
  const int ph = padded_extent(sh), pw = padded_extent(sw);
  if (ph != sh || pw != sw) {
    a = reflect_pad(a, ph, pw);
    b = reflect_pad(b, ph, pw);
  }

  nn::Tape<float> tape;
  auto pyramid = net.forward(tape, nn::make_leaf(std::move(a), false), nn::make_leaf(std::move(b), false));
  Tensor<float> flow = full_resolution_flow(pyramid);
  tape.clear();
  if (ph != sh || pw != sw) flow = crop(flow, sh, sw);
  if (!rescale) return flow;

  Tensor<float> out = nn::resize_bilinear(flow, s.h, s.w);
  const float fx = static_cast<float>(s.w) / sw;
  const float fy = static_cast<float>(s.h) / sh;
  for (int n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < s.plane(); ++i) {
      out.plane(n, 0)[i] *= fx;
      out.plane(n, 1)[i] *= fy;
    }
  }
  return out;
}

FlowField predict(const FlowNet<float>& net, const Image& img1, const Image& img2, double test_scale) {
  if (!img1.same_size(img2) || img1.channels != 3 || img2.channels != 3)
    throw ShapeError("predict: need two RGB images of equal size");
  Tensor<float> flow = predict_batch(net, image_tensor(img1), image_tensor(img2), test_scale);
  FlowField out(img1.width, img1.height);
  for (std::size_t i = 0; i < out.u.size(); ++i) {
    out.u[i] = flow.plane(0, 0)[i];
    out.v[i] = flow.plane(0, 1)[i];
  }
  return out;
}

}  // namespace deskflow
