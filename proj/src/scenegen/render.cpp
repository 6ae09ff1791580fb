#include <algorithm>
#include <array>
#include <cmath>

#include "deskflow/errors.hpp"
#include "deskflow/scene.hpp"

namespace deskflow {
namespace {

/// A sprite raster placed in the frame: maps frame points of the first image
/// to raster coordinates, and carries the full first-to-second-image motion.
struct PlacedSprite {
  Image raster;  // RGBA, straight alpha
  double offset_x = 0.0;
  double offset_y = 0.0;
  Affine2 motion;
  Affine2 inverse_motion;

  Point2 raster_coords(Point2 p) const { return {p.x - offset_x, p.y - offset_y}; }

  /// Premultiplied RGBA at raster point q; zero outside the raster.
  std::array<double, 4> sample(Point2 q) const {
    std::array<double, 4> out{0, 0, 0, 0};
    const double fx0 = std::floor(q.x);
    const double fy0 = std::floor(q.y);
    if (fx0 < -1 || fy0 < -1 || fx0 >= raster.width || fy0 >= raster.height) return out;
    const int x0 = static_cast<int>(fx0);
    const int y0 = static_cast<int>(fy0);
    const double fx = q.x - fx0;
    const double fy = q.y - fy0;
    const double weights[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    for (int t = 0; t < 4; ++t) {
      if (xs[t] < 0 || ys[t] < 0 || xs[t] >= raster.width || ys[t] >= raster.height || weights[t] == 0.0) continue;
      const double alpha = raster.at(3, ys[t], xs[t]);
      if (alpha == 0.0) continue;
      for (int c = 0; c < 3; ++c) out[c] += weights[t] * alpha * raster.at(c, ys[t], xs[t]);
      out[3] += weights[t] * alpha;
    }
    return out;
  }

  double alpha_at(Point2 q) const { return sample(q)[3]; }
};

constexpr double kOwnershipAlpha = 0.5;

struct SceneLayers {
  Image background;
  bool periodic = true;
  Affine2 bg_motion;
  Affine2 bg_inverse;
  std::vector<PlacedSprite> sprites;

  /// Topmost layer covering first-image point p (-1 = background).
  int owner_first(Point2 p) const {
    for (int i = static_cast<int>(sprites.size()) - 1; i >= 0; --i)
      if (sprites[i].alpha_at(sprites[i].raster_coords(p)) >= kOwnershipAlpha) return i;
    return -1;
  }

  /// Topmost layer covering second-image point p (-1 = background).
  int owner_second(Point2 p) const {
    for (int i = static_cast<int>(sprites.size()) - 1; i >= 0; --i) {
      const Point2 src = sprites[i].inverse_motion.apply(p);
      if (sprites[i].alpha_at(sprites[i].raster_coords(src)) >= kOwnershipAlpha) return i;
    }
    return -1;
  }

  const Affine2& motion_of(int layer) const { return layer < 0 ? bg_motion : sprites[layer].motion; }

  float background_at(int c, Point2 p) const {
    return periodic ? background.sample_bilinear_wrap(c, p.x, p.y) : background.sample_bilinear(c, p.x, p.y);
  }
};

SceneLayers build_layers(const SceneSpec& spec, const SpriteCatalog& assets) {
  SceneLayers layers;
  layers.background = assets.background(spec.background_id, spec.width, spec.height);
  layers.periodic = assets.background_periodic();
  layers.bg_motion = spec.bg_transform.matrix();
  layers.bg_inverse = layers.bg_motion.inverse();
  if (spec.sprite_rel_transforms.size() != spec.sprites.size())
    throw Error("scene spec: sprite and transform counts differ");
  for (std::size_t i = 0; i < spec.sprites.size(); ++i) {
    const SpriteSpec& s = spec.sprites[i];
    PlacedSprite placed;
    const int side = std::max(3, static_cast<int>(std::lround(s.size * spec.render_scale)));
    placed.raster = assets.sprite(s.shape_id, s.view_id, side);
    placed.offset_x = s.x - 0.5 * (side - 1);
    placed.offset_y = s.y - 0.5 * (side - 1);
    placed.motion = spec.sprite_matrix(i);
    placed.inverse_motion = placed.motion.inverse();
    layers.sprites.push_back(std::move(placed));
  }
  return layers;
}

struct Box {
  double x0, y0, x1, y1;
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

Box first_box(const PlacedSprite& s) {
  return {s.offset_x - 1, s.offset_y - 1, s.offset_x + s.raster.width, s.offset_y + s.raster.height};
}

Box second_box(const PlacedSprite& s) {
  const Box b = first_box(s);
  Box out{1e300, 1e300, -1e300, -1e300};
  for (Point2 corner : {Point2{b.x0, b.y0}, Point2{b.x1, b.y0}, Point2{b.x0, b.y1}, Point2{b.x1, b.y1}}) {
    const Point2 q = s.motion.apply(corner);
    out.x0 = std::min(out.x0, q.x);
    out.y0 = std::min(out.y0, q.y);
    out.x1 = std::max(out.x1, q.x);
    out.y1 = std::max(out.y1, q.y);
  }
  return out;
}

void composite(std::array<double, 3>& color, const std::array<double, 4>& premultiplied) {
  for (int c = 0; c < 3; ++c) color[c] = premultiplied[c] + (1.0 - premultiplied[3]) * color[c];
}

}  // namespace

Sample render_sample(const SceneSpec& spec, const SpriteCatalog& assets) {
  if (spec.width <= 0 || spec.height <= 0) throw ShapeError("scene spec has non-positive size");
  const SceneLayers layers = build_layers(spec, assets);
  const int w = spec.width;
  const int h = spec.height;

  std::vector<Box> boxes1, boxes2;
  for (const auto& s : layers.sprites) {
    boxes1.push_back(first_box(s));
    boxes2.push_back(second_box(s));
  }

  Sample out;
  out.img1 = Image(w, h, 3);
  out.img2 = Image(w, h, 3);
  out.flow = FlowField(w, h);
  out.occlusion.assign(static_cast<std::size_t>(w) * h, 0);
  out.owner.assign(static_cast<std::size_t>(w) * h, -1);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Point2 p{static_cast<double>(x), static_cast<double>(y)};
      const std::size_t idx = out.flow.index(x, y);

      // First image: background at rest plus sprites at their initial pose.
      std::array<double, 3> c1{};
      for (int c = 0; c < 3; ++c) c1[c] = layers.background.at(c, y, x);
      int owner = -1;
      for (std::size_t i = 0; i < layers.sprites.size(); ++i) {
        if (!boxes1[i].contains(p.x, p.y)) continue;
        const auto rgba = layers.sprites[i].sample(layers.sprites[i].raster_coords(p));
        composite(c1, rgba);
        if (rgba[3] >= kOwnershipAlpha) owner = static_cast<int>(i);
      }

      // Second image by inverse warping every layer.
      std::array<double, 3> c2{};
      const Point2 bg_src = layers.bg_inverse.apply(p);
      for (int c = 0; c < 3; ++c) c2[c] = layers.background_at(c, bg_src);
      for (std::size_t i = 0; i < layers.sprites.size(); ++i) {
        if (!boxes2[i].contains(p.x, p.y)) continue;
        const auto& s = layers.sprites[i];
        composite(c2, s.sample(s.raster_coords(s.inverse_motion.apply(p))));
      }

      for (int c = 0; c < 3; ++c) {
        out.img1.at(c, y, x) = static_cast<float>(c1[c]);
        out.img2.at(c, y, x) = static_cast<float>(c2[c]);
      }

      const Point2 target = layers.motion_of(owner).apply(p);
      out.flow.u[idx] = target.x - p.x;
      out.flow.v[idx] = target.y - p.y;
      out.owner[idx] = static_cast<std::int16_t>(owner);
      const bool outside = target.x < 0.0 || target.y < 0.0 || target.x > w - 1 || target.y > h - 1;
      out.occlusion[idx] = (outside || layers.owner_second(target) != owner) ? 1 : 0;
    }
  }
  return out;
}

std::vector<Sample> quarter(const Sample& sample, bool strict_occlusion) {
  const int w = sample.width();
  const int h = sample.height();
  if (w % 2 != 0 || h % 2 != 0) throw ShapeError("quarter: width and height must be even");
  const int qw = w / 2;
  const int qh = h / 2;
  std::vector<Sample> out;
  for (int qy = 0; qy < 2; ++qy) {
    for (int qx = 0; qx < 2; ++qx) {
      const int x0 = qx * qw;
      const int y0 = qy * qh;
      Sample q;
      q.img1 = sample.img1.crop(x0, y0, qw, qh);
      q.img2 = sample.img2.crop(x0, y0, qw, qh);
      q.flow = sample.flow.crop(x0, y0, qw, qh);
      q.occlusion.resize(static_cast<std::size_t>(qw) * qh);
      q.owner.resize(q.occlusion.size());
      for (int y = 0; y < qh; ++y) {
        for (int x = 0; x < qw; ++x) {
          const std::size_t src = sample.flow.index(x0 + x, y0 + y);
          const std::size_t dst = q.flow.index(x, y);
          std::uint8_t occ = sample.occlusion[src];
          if (strict_occlusion) {
            const double tx = x + sample.flow.u[src];
            const double ty = y + sample.flow.v[src];
            if (tx < 0.0 || ty < 0.0 || tx > qw - 1 || ty > qh - 1) occ = 1;
          }
          q.occlusion[dst] = occ;
          q.owner[dst] = sample.owner.empty() ? -1 : sample.owner[src];
        }
      }
      out.push_back(std::move(q));
    }
  }
  return out;
}

Histogram displacement_histogram(const std::vector<FlowField>& flows, double bin_width, double max_disp) {
  if (!(bin_width > 0.0)) throw Error("displacement_histogram: bin_width must be positive");
  if (!(max_disp > 0.0)) throw Error("displacement_histogram: max_disp must be positive");
  if (flows.empty()) throw Error("displacement_histogram: no flow fields");
  Histogram hist;
  hist.bin_width = bin_width;
  const auto bins = static_cast<std::size_t>(std::ceil(max_disp / bin_width));
  std::vector<std::uint64_t> counts(std::max<std::size_t>(bins, 1), 0);
  std::uint64_t total = 0;
  for (const FlowField& f : flows) {
    f.check_well_formed();
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (!f.valid[i]) continue;
      const double mag = std::hypot(f.u[i], f.v[i]);
      const auto bin = std::min(static_cast<std::size_t>(mag / bin_width), counts.size() - 1);
      ++counts[bin];
      ++total;
    }
  }
  if (total == 0) throw Error("displacement_histogram: no valid pixels");
  hist.mass.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) hist.mass[i] = static_cast<double>(counts[i]) / total;
  return hist;
}

}  // namespace deskflow
