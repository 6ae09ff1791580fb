#pragma once

#include <map>
#include <string>
#include <vector>

#include "deskflow/config.hpp"
#include "deskflow/correlation.hpp"
#include "deskflow/flow.hpp"
#include "deskflow/image.hpp"
#include "deskflow/params.hpp"

namespace deskflow {

enum class Variant { simple, corr };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

/// Architecture description. Reference widths are divided by channel_scale
/// (rounded down, at least 1).
struct ModelConfig {
  Variant variant = Variant::simple;
  int channel_scale = 8;
  /// Network input size; both must be multiples of 64. Inputs of other sizes
  /// go through predict(), which pads.
  int input_height = 64;
  int input_width = 64;
  nn::CorrParams corr;
  int refinement_levels = 4;
  double leaky_slope = 0.0;
  /// conv1, conv2, conv3, conv3_1, conv4, conv4_1, conv5, conv5_1, conv6
  std::vector<int> encoder_widths = {64, 128, 256, 256, 512, 512, 512, 512, 1024};
  /// upconv5 .. upconv1, finest last; only the first refinement_levels are used.
  std::vector<int> decoder_widths = {512, 256, 128, 64, 32};
  int redirect_width = 32;
  /// Coarse to fine, one per flow head (refinement_levels + 1).
  std::vector<double> loss_weights = {0.32, 0.08, 0.02, 0.01, 0.005};
  /// Inference upscaling; <= 0 selects the variant default (1.0 simple, 1.25 corr).
  double test_scale = 0.0;
  std::uint64_t init_seed = 1;

  int width(int reference) const;
  int finest_factor() const { return 1 << (6 - refinement_levels); }
  double effective_test_scale() const;
  void validate() const;

  /// Reads `model.*` keys.
  static ModelConfig from_config(KeyValues& kv);
  /// `model.*` lines that from_config reads back to an equal config.
  std::string to_text() const;
  std::string hash() const;
};

/// Flow predictions coarse to fine. levels[i] has factor factors[i] relative
/// to the network input and holds displacements in that level's pixels.
template <typename T>
struct FlowPyramid {
  std::vector<nn::Var<T>> levels;
  std::vector<int> factors;
};

struct ForwardOptions {
  /// Replaces every encoder skip connection by zeros of the same shape.
  bool zero_skips = false;
  /// When set, receives named intermediate activations.
  std::map<std::string, nn::Tensor<double>>* trace = nullptr;
};

template <typename T>
class FlowNet {
 public:
  explicit FlowNet(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }

  /// img1, img2: (n, 3, H, W) with H, W multiples of 64, intensities in [0, 1].
  FlowPyramid<T> forward(nn::Tape<T>& tape, const nn::Var<T>& img1, const nn::Var<T>& img2,
                         const ForwardOptions& options = {}) const;

  /// Copies parameter values from another precision.
  template <typename U>
  void copy_params_from(const FlowNet<U>& other);

 private:
  void add_conv(const std::string& name, int cin, int cout, int k, Rng& rng);
  void add_upconv(const std::string& name, int cin, int cout, Rng& rng);
  nn::Var<T> conv(nn::Tape<T>& tape, const std::string& name, const nn::Var<T>& x, int stride, bool activate) const;
  nn::Var<T> upconv(nn::Tape<T>& tape, const std::string& name, const nn::Var<T>& x) const;

  ModelConfig config_;
  nn::ParamSet<T> params_;
};

/// Block-averaged flow target at 1/factor resolution, in level pixels. A
/// block counts as valid if any pixel in it is; the value is the mean over
/// its valid pixels.
void downsample_flow_target(const nn::Tensor<float>& flow, const nn::Tensor<float>& mask, int factor,
                            nn::Tensor<float>& flow_out, nn::Tensor<float>& mask_out);
void downsample_flow_target(const nn::Tensor<double>& flow, const nn::Tensor<double>& mask, int factor,
                            nn::Tensor<double>& flow_out, nn::Tensor<double>& mask_out);

/// sum_l weights[l] * masked mean EPE at level l. flow: (n, 2, H, W) at the
/// network input resolution, mask (n, 1, H, W).
template <typename T>
nn::Var<T> multiscale_epe_loss(nn::Tape<T>& tape, const FlowPyramid<T>& pyramid, const nn::Tensor<T>& flow,
                               const nn::Tensor<T>& mask, const std::vector<double>& weights);

/// Finest pyramid level brought to the network input resolution, in input pixels.
template <typename T>
nn::Tensor<T> full_resolution_flow(const FlowPyramid<T>& pyramid);

// Input plumbing.

/// (1, channels, h, w) copy of an image.
nn::Tensor<float> image_tensor(const Image& image);
/// Writes item `index` of a batch tensor from an image.
void store_image(const Image& image, nn::Tensor<float>& batch, int index);
/// Flow components and validity of a field into (n, 2, h, w) / (n, 1, h, w) batches.
void store_flow(const FlowField& flow, nn::Tensor<float>& batch_flow, nn::Tensor<float>& batch_mask, int index);

/// Rounds up to a multiple of 64.
int padded_extent(int extent);
/// Mirror padding at the bottom and right up to (h, w).
nn::Tensor<float> reflect_pad(const nn::Tensor<float>& t, int h, int w);
/// Zero padding at the bottom and right (used for flow targets and masks).
nn::Tensor<float> zero_pad(const nn::Tensor<float>& t, int h, int w);
nn::Tensor<float> crop(const nn::Tensor<float>& t, int h, int w);

/// Runs the net on a batch of arbitrary-size pairs and returns full-size flow
/// (n, 2, h, w): optional bilinear upscaling by test_scale, padding to a
/// multiple of 64, forward pass, cropping, and rescaling back.
nn::Tensor<float> predict_batch(const FlowNet<float>& net, const nn::Tensor<float>& img1,
                                const nn::Tensor<float>& img2, double test_scale);

/// Single pair convenience wrapper around predict_batch.
FlowField predict(const FlowNet<float>& net, const Image& img1, const Image& img2, double test_scale);

}  // namespace deskflow
