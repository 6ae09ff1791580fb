#include <cmath>

#include "deskflow/errors.hpp"
#include "deskflow/model.hpp"
#include "deskflow/ops.hpp"

namespace deskflow {

using nn::Shape;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

// Encoder layer table: name, reference width index, kernel, stride.
struct Layer {
  const char* name;
  int kernel;
  int stride;
};
constexpr Layer kEncoder[9] = {{"conv1", 7, 2},   {"conv2", 5, 2}, {"conv3", 5, 2},
                               {"conv3_1", 3, 1}, {"conv4", 3, 2}, {"conv4_1", 3, 1},
                               {"conv5", 3, 2},   {"conv5_1", 3, 1}, {"conv6", 3, 2}};
constexpr int kSharedLayers = 3;  // conv1..conv3 run per stream in the corr variant

/// Level names follow log2 of the downsampling factor: flow6 is 1/64.
int level_index(int factor) {
  int i = 0;
  while ((1 << i) < factor) ++i;
  return i;
}

template <typename T>
void record(const ForwardOptions& options, const std::string& name, const Var<T>& v) {
  if (options.trace) (*options.trace)[name] = v->value.template cast<double>();
}

}  // namespace

template <typename T>
FlowNet<T>::FlowNet(const ModelConfig& config) : config_(config) {
  config_.validate();
  Rng rng = Rng::substream(config_.init_seed, {0x6d6f64656cULL});
  const auto& enc = config_.encoder_widths;
  // Channel count of the skip feature at each factor.
  std::map<int, int> skip_channels;

  int cin = config_.variant == Variant::simple ? 6 : 3;
  for (int i = 0; i < 9; ++i) {
    const int cout = config_.width(enc[i]);
    if (config_.variant == Variant::corr && i == kSharedLayers) {
      const int redirect = config_.width(config_.redirect_width);
      add_conv("conv_redir", config_.width(enc[2]), redirect, 1, rng);
      cin = redirect + config_.corr.channels();
    }
    add_conv(kEncoder[i].name, cin, cout, kEncoder[i].kernel, rng);
    cin = cout;
  }
  skip_channels[2] = config_.width(enc[0]);
  skip_channels[4] = config_.width(enc[1]);
  skip_channels[8] = config_.width(enc[3]);
  skip_channels[16] = config_.width(enc[5]);
  skip_channels[32] = config_.width(enc[7]);

  int feat = config_.width(enc[8]);
  add_conv("flow6", feat, 2, 3, rng);
  for (int l = 0; l < config_.refinement_levels; ++l) {
    const int factor = 32 >> l;
    const int up = config_.width(config_.decoder_widths[l]);
    const std::string idx = std::to_string(level_index(factor));
    add_upconv("upconv" + idx, feat, up, rng);
    feat = skip_channels[factor] + up + 2;
    add_conv("flow" + idx, feat, 2, 3, rng);
  }
}

template <typename T>
void FlowNet<T>::add_conv(const std::string& name, int cin, int cout, int k, Rng& rng) {
  Tensor<T> w(Shape{cout, cin, k, k});
  nn::he_init(w, cin * k * k, rng);
  params_.add(name + ".w", std::move(w));
  params_.add(name + ".b", Tensor<T>(Shape{1, cout, 1, 1}));
}

template <typename T>
void FlowNet<T>::add_upconv(const std::string& name, int cin, int cout, Rng& rng) {
  Tensor<T> w(Shape{cin, cout, 4, 4});
  // Each output pixel of a stride-2 4x4 transposed conv sees cin * 2 * 2 taps.
  nn::he_init(w, cin * 4, rng);
  params_.add(name + ".w", std::move(w));
  params_.add(name + ".b", Tensor<T>(Shape{1, cout, 1, 1}));
}

template <typename T>
Var<T> FlowNet<T>::conv(Tape<T>& tape, const std::string& name, const Var<T>& x, int stride, bool activate) const {
  const Var<T> w = params_.get(name + ".w");
  const int k = w->value.shape().h;
  Var<T> y = nn::conv2d(tape, x, w, params_.get(name + ".b"), stride, k / 2);
  return activate ? nn::relu(tape, y, static_cast<T>(config_.leaky_slope)) : y;
}

template <typename T>
Var<T> FlowNet<T>::upconv(Tape<T>& tape, const std::string& name, const Var<T>& x) const {
  Var<T> y = nn::upconv2d(tape, x, params_.get(name + ".w"), params_.get(name + ".b"), 2, 1);
  return nn::relu(tape, y, static_cast<T>(config_.leaky_slope));
}

template <typename T>
FlowPyramid<T> FlowNet<T>::forward(Tape<T>& tape, const Var<T>& img1, const Var<T>& img2,
                                   const ForwardOptions& options) const {
  const Shape s = img1->value.shape();
  if (!(s == img2->value.shape())) throw ShapeError("forward: image shapes differ");
  if (s.c != 3) throw ShapeError("forward: images must have 3 channels, got " + s.str());
  if (s.h % 64 || s.w % 64 || s.h == 0 || s.w == 0)
    throw ShapeError("forward: input " + s.str() + " is not a multiple of 64; pad first");

  // Inputs are centered around zero; they are never differentiated.
  auto centered = [&](const Var<T>& img) {
    Tensor<T> v = img->value;
    for (T& x : v.values()) x -= T(0.5);
    return nn::make_leaf(std::move(v), false, "input");
  };
  const Var<T> x1 = centered(img1);
  const Var<T> x2 = centered(img2);

  std::map<int, Var<T>> skips;
  Var<T> h;
  int first = 0;
  if (config_.variant == Variant::simple) {
    h = nn::concat_channels(tape, {x1, x2});
  } else {
    Var<T> a = x1, b = x2;
    for (int i = 0; i < kSharedLayers; ++i) {
      a = conv(tape, kEncoder[i].name, a, kEncoder[i].stride, true);
      b = conv(tape, kEncoder[i].name, b, kEncoder[i].stride, true);
      record(options, std::string(kEncoder[i].name) + "a", a);
      record(options, std::string(kEncoder[i].name) + "b", b);
      if (i < 2) skips[2 << i] = a;
    }
    Var<T> corr = nn::correlate(tape, a, b, config_.corr);
    record(options, "corr", corr);
    Var<T> redirect = conv(tape, "conv_redir", a, 1, true);
    h = nn::concat_channels(tape, {redirect, corr});
    record(options, "corr_concat", h);
    first = kSharedLayers;
  }
  int factor = first == 0 ? 1 : 8;
  for (int i = first; i < 9; ++i) {
    h = conv(tape, kEncoder[i].name, h, kEncoder[i].stride, true);
    factor *= kEncoder[i].stride;
    record(options, kEncoder[i].name, h);
    // The last layer at each scale provides the skip connection.
    if (i + 1 < 9 && kEncoder[i + 1].stride == 2) skips[factor] = h;
  }

  FlowPyramid<T> pyramid;
  Var<T> flow = conv(tape, "flow6", h, 1, false);
  pyramid.levels.push_back(flow);
  pyramid.factors.push_back(64);
  Var<T> feat = h;
  for (int l = 0; l < config_.refinement_levels; ++l) {
    const int f = 32 >> l;
    const std::string idx = std::to_string(level_index(f));
    Var<T> up = upconv(tape, "upconv" + idx, feat);
    Var<T> flow_up = nn::scale(tape, nn::bilinear_resize(tape, flow, 2), T(2));
    Var<T> skip = skips.at(f);
    if (options.zero_skips) skip = nn::make_leaf(Tensor<T>(skip->value.shape()), false, "zero_skip");
    feat = nn::concat_channels(tape, {skip, up, flow_up});
    flow = conv(tape, "flow" + idx, feat, 1, false);
    record(options, "flow" + idx, flow);
    pyramid.levels.push_back(flow);
    pyramid.factors.push_back(f);
  }
  return pyramid;
}

template <typename T>
template <typename U>
void FlowNet<T>::copy_params_from(const FlowNet<U>& other) {
  const auto& src = other.params().items();
  const auto& dst = params_.items();
  if (src.size() != dst.size()) throw ShapeError("copy_params_from: parameter count differs");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].name != dst[i].name || !(src[i].var->value.shape() == dst[i].var->value.shape()))
      throw ShapeError("copy_params_from: parameter " + dst[i].name + " does not match");
    dst[i].var->value = src[i].var->value.template cast<T>();
  }
}

template class FlowNet<float>;
template class FlowNet<double>;
template void FlowNet<float>::copy_params_from(const FlowNet<double>&);
template void FlowNet<double>::copy_params_from(const FlowNet<float>&);
template void FlowNet<float>::copy_params_from(const FlowNet<float>&);

}  // namespace deskflow
