#include <algorithm>
#include <cmath>
#include <numbers>

#include "deskflow/errors.hpp"
#include "deskflow/scene.hpp"

namespace deskflow {
namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

/// Periodic value noise: a gx-by-gy lattice of uniform values, smoothly
/// interpolated; wraps exactly at (width, height).
class PeriodicNoise {
 public:
  PeriodicNoise(int gx, int gy, Rng& rng) : gx_(gx), gy_(gy), values_(static_cast<std::size_t>(gx) * gy) {
    for (double& v : values_) v = rng.uniform();
  }

  double at(double u, double v) const {  // u, v in lattice units
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    const double tu = smoothstep(u - fu);
    const double tv = smoothstep(v - fv);
    const int x0 = wrap(static_cast<long long>(fu), gx_);
    const int y0 = wrap(static_cast<long long>(fv), gy_);
    const int x1 = (x0 + 1) % gx_;
    const int y1 = (y0 + 1) % gy_;
    const double top = (1 - tu) * value(x0, y0) + tu * value(x1, y0);
    const double bottom = (1 - tu) * value(x0, y1) + tu * value(x1, y1);
    return (1 - tv) * top + tv * bottom;
  }

 private:
  static int wrap(long long v, int n) { return static_cast<int>(((v % n) + n) % n); }
  double value(int x, int y) const { return values_[static_cast<std::size_t>(y) * gx_ + x]; }

  int gx_;
  int gy_;
  std::vector<double> values_;
};

/// Multi-octave colored noise filling a w-by-h raster, periodic over it.
Image noise_texture(int width, int height, double coarse_cell, double finest_cell, Rng& rng) {
  Image out(width, height, 3);
  std::vector<double> acc(out.data.size(), 0.0);
  double weight = 1.0;
  for (double cell = coarse_cell; cell >= finest_cell; cell *= 0.5, weight *= 0.7) {
    const int gx = std::max(2, static_cast<int>(std::lround(width / cell)));
    const int gy = std::max(2, static_cast<int>(std::lround(height / cell)));
    for (int c = 0; c < 3; ++c) {
      PeriodicNoise noise(gx, gy, rng);
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
          acc[c * out.plane_size() + static_cast<std::size_t>(y) * width + x] +=
              weight * noise.at(static_cast<double>(x) * gx / width, static_cast<double>(y) * gy / height);
    }
  }
  for (int c = 0; c < 3; ++c) {
    const auto begin = acc.begin() + static_cast<std::ptrdiff_t>(c * out.plane_size());
    const auto end = begin + static_cast<std::ptrdiff_t>(out.plane_size());
    const auto [lo, hi] = std::minmax_element(begin, end);
    const double range = std::max(*hi - *lo, 1e-12);
    const double low = *lo;
    for (std::size_t i = 0; i < out.plane_size(); ++i)
      out.data[c * out.plane_size() + i] = static_cast<float>(0.05 + 0.9 * (begin[static_cast<std::ptrdiff_t>(i)] - low) / range);
  }
  return out;
}

bool inside_polygon(const std::vector<Point2>& poly, double x, double y) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    if ((poly[i].y > y) != (poly[j].y > y) &&
        x < (poly[j].x - poly[i].x) * (y - poly[i].y) / (poly[j].y - poly[i].y) + poly[i].x)
      inside = !inside;
  }
  return inside;
}

}  // namespace

Image resize_image(const Image& image, int width, int height) {
  if (width <= 0 || height <= 0) throw ShapeError("resize_image: non-positive target size");
  Image out(width, height, image.channels);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        out.at(c, y, x) = image.sample_bilinear(c, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
  return out;
}

ProceduralCatalog::ProceduralCatalog(int backgrounds, int shapes, int views, std::uint64_t salt)
    : backgrounds_(backgrounds), shapes_(shapes), views_(views), salt_(salt) {
  if (backgrounds <= 0 || shapes < 0 || views < 0) throw ConfigError("procedural catalog: invalid sizes");
}

Image ProceduralCatalog::background(int id, int width, int height) const {
  if (id < 0 || id >= backgrounds_) throw Error("missing background id " + std::to_string(id));
  Rng rng = Rng::substream(salt_, {1, static_cast<std::uint64_t>(id)});
  const double coarse = std::max(8.0, std::min(width, height) / 2.0);
  return noise_texture(width, height, coarse, 2.0, rng);
}

Image ProceduralCatalog::sprite(int shape, int view, int size_px) const {
  if (shape < 0 || shape >= shapes_ || view < 0 || view >= views_)
    throw Error("missing sprite asset (shape " + std::to_string(shape) + ", view " + std::to_string(view) + ")");
  if (size_px < 1) throw ShapeError("sprite size must be positive");
  Rng shape_rng = Rng::substream(salt_, {2, static_cast<std::uint64_t>(shape)});
  const int vertices = static_cast<int>(shape_rng.uniform_int(5, 11));
  std::vector<double> radii(vertices);
  for (double& r : radii) r = shape_rng.uniform(0.45, 1.0);
  const double phase = shape_rng.uniform(0.0, 2.0 * std::numbers::pi);

  // Views: a turn about the vertical axis squeezes x, the second elevation
  // squeezes y; both keep the silhouette recognisably the same shape.
  const int azimuths = std::max(1, (views_ + 1) / 2);
  const double azimuth = 2.0 * std::numbers::pi * (view % azimuths) / azimuths;
  const double squeeze_x = 0.55 + 0.45 * std::fabs(std::cos(azimuth));
  const double squeeze_y = view >= azimuths ? 0.8 : 1.0;
  std::vector<Point2> poly(vertices);
  for (int i = 0; i < vertices; ++i) {
    const double angle = phase + 2.0 * std::numbers::pi * i / vertices;
    poly[i] = {radii[i] * std::cos(angle) * squeeze_x, radii[i] * std::sin(angle) * squeeze_y};
  }

  Rng tex_rng = Rng::substream(salt_, {3, static_cast<std::uint64_t>(shape), static_cast<std::uint64_t>(view)});
  const Image texture = noise_texture(size_px, size_px, std::max(4.0, size_px / 2.0), std::max(2.0, size_px / 16.0), tex_rng);
  Image out(size_px, size_px, 4, 0.0f);
  const double half = 0.5 * size_px;
  const double center = 0.5 * (size_px - 1);
  for (int y = 0; y < size_px; ++y)
    for (int x = 0; x < size_px; ++x) {
      if (!inside_polygon(poly, (x - center) / half, (y - center) / half)) continue;
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = texture.at(c, y, x);
      out.at(3, y, x) = 1.0f;
    }
  return out;
}

DirectoryCatalog::DirectoryCatalog(const std::filesystem::path& dir) {
  auto load_all = [](const std::filesystem::path& sub) {
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(sub)) {
      for (const auto& e : std::filesystem::directory_iterator(sub))
        if (e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Image> images;
    for (const auto& f : files) images.push_back(read_png(f));
    return images;
  };
  backgrounds_ = load_all(dir / "backgrounds");
  sprites_ = load_all(dir / "sprites");
  if (backgrounds_.empty()) throw IoError("no backgrounds/*.png under " + dir.string());
}

Image DirectoryCatalog::background(int id, int width, int height) const {
  if (id < 0 || id >= background_count()) throw Error("missing background id " + std::to_string(id));
  Image rgb = resize_image(backgrounds_[id], width, height);
  if (rgb.channels == 1) {
    Image color(width, height, 3);
    for (int c = 0; c < 3; ++c) std::copy(rgb.data.begin(), rgb.data.end(), color.data.begin() + c * rgb.plane_size());
    return color;
  }
  rgb.channels = 3;
  rgb.data.resize(rgb.plane_size() * 3);
  return rgb;
}

Image DirectoryCatalog::sprite(int shape, int view, int size_px) const {
  if (shape < 0 || shape >= shape_count() || view != 0)
    throw Error("missing sprite asset (shape " + std::to_string(shape) + ", view " + std::to_string(view) + ")");
  const Image resized = resize_image(sprites_[shape], size_px, size_px);
  Image out(size_px, size_px, 4, 1.0f);
  const int color_channels = std::min(resized.channels, 3);
  for (int c = 0; c < 3; ++c) {
    const int src = std::min(c, color_channels - 1);
    std::copy_n(resized.data.begin() + src * resized.plane_size(), resized.plane_size(),
                out.data.begin() + c * out.plane_size());
  }
  if (resized.channels == 4 || resized.channels == 2) {
    const int alpha = resized.channels - 1;
    std::copy_n(resized.data.begin() + alpha * resized.plane_size(), resized.plane_size(),
                out.data.begin() + 3 * out.plane_size());
  }
  return out;
}

std::unique_ptr<SpriteCatalog> make_catalog(const GeneratorConfig& config) {
  if (!config.asset_dir.empty()) return std::make_unique<DirectoryCatalog>(config.asset_dir);
  return std::make_unique<ProceduralCatalog>(config.background_count, config.shape_count, config.view_count);
}

}  // namespace deskflow
