#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "deskflow/config.hpp"
#include "deskflow/geometry.hpp"
#include "deskflow/rng.hpp"
#include "deskflow/scene.hpp"

namespace deskflow {

/// Sampling ranges. Geometric transforms pivot on the image center;
/// translations are fractions of the image width for both x and y.
struct AugmentRanges {
  double translate = 0.2;
  double rotate_deg = 17.0;
  double scale_min = 0.9;
  double scale_max = 2.0;
  double noise_max = 0.04;
  double contrast_min = -0.8;
  double contrast_max = 0.4;
  double color_min = 0.5;
  double color_max = 2.0;
  double gamma_min = 0.7;
  double gamma_max = 1.5;
  double brightness_sigma = 0.2;
  /// Relative (second-frame) transform ranges as a fraction of the strong
  /// ranges; scale deviates from 1 by that fraction of the strong deviation.
  double relative_fraction = 0.25;

  void validate() const;
  /// Reads `augment.*` keys.
  static AugmentRanges from_config(KeyValues& kv);
  /// Every range collapsed: sampling yields the identity spec.
  static AugmentRanges none();
};

struct AugmentSpec {
  AffineTransform strong;    // A1
  AffineTransform relative;  // R, so A2 = A1 ∘ R
  std::array<double, 2> noise_sigma{0.0, 0.0};
  std::uint64_t noise_seed = 0;
  double brightness = 0.0;
  double contrast = 0.0;
  double gamma = 1.0;
  std::array<double, 3> color{1.0, 1.0, 1.0};
  bool photometric = true;

  Affine2 a1() const { return strong.matrix(); }
  Affine2 a2() const { return compose(strong.matrix(), relative.matrix()); }
  AugmentSpec without_photometric() const;
};

AugmentSpec sample_augmentation(Rng& rng, const AugmentRanges& ranges, int width, int height);

/// Geometric part with explicit matrices (used for composition).
struct GeometricAugment {
  Affine2 a1;
  Affine2 a2;
};

/// img1'(y) = P(img1(A1^-1 y)), img2'(y) = P(img2(A2^-1 y)),
/// flow'(y) = A2(x + flow(x)) - y with x = A1^-1 y. Pixels whose preimage
/// falls outside the source frame (or onto invalid flow) become invalid.
/// Throws Error for non-invertible transforms.
Sample apply_augmentation(const Sample& sample, const AugmentSpec& spec);
Sample apply_geometric(const Sample& sample, const GeometricAugment& geo);

/// Photometric chain on one frame: color -> gamma -> brightness -> contrast -> noise.
Image apply_photometric(const Image& image, const AugmentSpec& spec, int frame);

}  // namespace deskflow
