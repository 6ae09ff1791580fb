#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "deskflow/config.hpp"
#include "deskflow/flow.hpp"
#include "deskflow/geometry.hpp"
#include "deskflow/image.hpp"
#include "deskflow/rng.hpp"

namespace deskflow {

/// G(k, mu, sigma, a, b, p): with probability p a Gaussian draw raised to the
/// power k (sign kept) and clamped to [a, b]; otherwise the constant mu.
struct ClampedPowerGaussian {
  double k = 1.0;
  double mu = 0.0;
  double sigma = 1.0;
  double a = 0.0;
  double b = 0.0;
  double p = 1.0;

  void validate() const;
};

double sample_param(const ClampedPowerGaussian& dist, Rng& rng);

/// Transform-parameter distributions with the published defaults. Translation
/// clamps are in pixels of a reference_width-wide frame.
struct MotionDistributions {
  ClampedPowerGaussian translation_bg{4, 0, 1.3, -40, 40, 1};
  ClampedPowerGaussian rotation_bg{2, 0, 1.3, -10, 10, 0.3};
  ClampedPowerGaussian zoom_bg{2, 1, 0.1, 0.93, 1.07, 0.6};
  ClampedPowerGaussian translation_ch{3, 0, 2.3, -120, 120, 1};
  ClampedPowerGaussian rotation_ch{2, 0, 2.3, -30, 30, 0.7};
  ClampedPowerGaussian zoom_ch{2, 1, 0.18, 0.8, 1.2, 0.7};
};

struct GeneratorConfig {
  int width = 1024;
  int height = 768;
  double reference_width = 1024.0;
  int sprite_count_min = 16;
  int sprite_count_max = 24;
  double sprite_size_mean = 200.0;
  double sprite_size_std = 200.0;
  double sprite_size_min = 50.0;
  double sprite_size_max = 640.0;
  MotionDistributions motion;
  int background_count = 964;
  int shape_count = 809;
  int view_count = 62;
  bool quarter = false;
  bool strict_quadrant_occlusion = false;
  std::string asset_dir;  // empty = procedural assets
  /// Dataset-size bookkeeping only: the published dataset's pair count.
  std::int64_t reference_count = 22872;

  /// Ratio applied to translations and sprite sizes for non-reference widths.
  double scale() const { return width / reference_width; }
  void validate() const;

  static GeneratorConfig from_config(KeyValues& kv);
};

struct SpriteSpec {
  int shape_id = 0;
  int view_id = 0;
  double size = 0.0;  // reference-frame pixels (before scale())
  double x = 0.0;     // center position in frame pixels
  double y = 0.0;
};

/// Everything needed to render one pair. Sprites later in the list are on top.
struct SceneSpec {
  std::uint64_t seed = 0;
  int width = 0;
  int height = 0;
  double render_scale = 1.0;
  int background_id = 0;
  std::vector<SpriteSpec> sprites;
  AffineTransform bg_transform;
  /// Relative transforms; each pivots at its sprite's center after the
  /// background motion, and the full sprite motion is rel ∘ bg.
  std::vector<AffineTransform> sprite_rel_transforms;

  Affine2 sprite_matrix(std::size_t i) const;
  std::string to_text() const;
  static SceneSpec from_text(const std::string& text);
};

SceneSpec sample_scene(const GeneratorConfig& config, Rng& rng);

/// Rendered layers are RGBA rasters; alpha >= 0.5 defines ownership.
class SpriteCatalog {
 public:
  virtual ~SpriteCatalog() = default;
  virtual int background_count() const = 0;
  virtual int shape_count() const = 0;
  virtual int view_count() const = 0;
  /// RGB raster the size of the frame.
  virtual Image background(int id, int width, int height) const = 0;
  /// Periodic backgrounds are sampled with wraparound, others with edge clamping.
  virtual bool background_periodic() const = 0;
  /// RGBA raster of side size_px.
  virtual Image sprite(int shape, int view, int size_px) const = 0;
};

/// Seeded value-noise backgrounds (periodic over the frame) and star-shaped
/// polygon sprites. Identical ids always give identical rasters.
class ProceduralCatalog : public SpriteCatalog {
 public:
  ProceduralCatalog(int backgrounds, int shapes, int views, std::uint64_t salt = 0);
  int background_count() const override { return backgrounds_; }
  int shape_count() const override { return shapes_; }
  int view_count() const override { return views_; }
  Image background(int id, int width, int height) const override;
  bool background_periodic() const override { return true; }
  Image sprite(int shape, int view, int size_px) const override;

 private:
  int backgrounds_;
  int shapes_;
  int views_;
  std::uint64_t salt_;
};

/// User-supplied assets: `<dir>/backgrounds/*.png` and `<dir>/sprites/*.png`
/// (RGBA, one view per file). Files are ordered by name.
class DirectoryCatalog : public SpriteCatalog {
 public:
  explicit DirectoryCatalog(const std::filesystem::path& dir);
  int background_count() const override { return static_cast<int>(backgrounds_.size()); }
  int shape_count() const override { return static_cast<int>(sprites_.size()); }
  int view_count() const override { return 1; }
  Image background(int id, int width, int height) const override;
  bool background_periodic() const override { return false; }
  Image sprite(int shape, int view, int size_px) const override;

 private:
  std::vector<Image> backgrounds_;
  std::vector<Image> sprites_;
};

std::unique_ptr<SpriteCatalog> make_catalog(const GeneratorConfig& config);

/// Bilinear resize of any image to the given size (pixel-center aligned).
Image resize_image(const Image& image, int width, int height);

struct Sample {
  Image img1;
  Image img2;
  FlowField flow;                   // img1 -> img2
  std::vector<std::uint8_t> occlusion;  // 1 = pixel of img1 not visible in img2
  std::vector<std::int16_t> owner;      // layer owning each img1 pixel, -1 = background

  int width() const { return img1.width; }
  int height() const { return img1.height; }
};

Sample render_sample(const SceneSpec& spec, const SpriteCatalog& assets);

/// Four quadrant samples in order top-left, top-right, bottom-left, bottom-right.
std::vector<Sample> quarter(const Sample& sample, bool strict_occlusion = false);

struct Histogram {
  double bin_width = 1.0;
  std::vector<double> mass;  // sums to 1; last bin absorbs >= max_disp
};

Histogram displacement_histogram(const std::vector<FlowField>& flows, double bin_width, double max_disp);

/// Renders sample `index` of a dataset: a pure function of (config, seed, index).
Sample generate_sample(const GeneratorConfig& config, const SpriteCatalog& assets, std::uint64_t seed,
                       std::int64_t index, SceneSpec* spec_out = nullptr);

struct ManifestEntry {
  std::string img1;
  std::string img2;
  std::string flow;
  std::string occlusion;
  std::string spec;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  std::int64_t count = 0;
  std::string config_hash;
  std::int64_t reference_count = 22872;
  int width = 0;
  int height = 0;
  std::vector<ManifestEntry> entries;

  std::string to_text() const;
  static DatasetManifest from_text(const std::string& text);
};

/// Writes n samples plus manifest.txt and the resolved config. The
/// config_text is the resolved generator configuration (used for the hash).
DatasetManifest generate_dataset(const GeneratorConfig& config, const std::string& config_text,
                                 std::uint64_t seed, std::int64_t n, const std::filesystem::path& out);

/// Loads every sample listed in a dataset directory's manifest.
std::vector<Sample> load_dataset(const std::filesystem::path& dir);

/// 8-bit round trip of the images, as they would come back from disk.
Sample quantize_like_disk(const Sample& sample);

}  // namespace deskflow
