#include "deskflow/augment.hpp"

#include <algorithm>
#include <cmath>

#include "deskflow/errors.hpp"

namespace deskflow {
namespace {

void check_range(const char* name, double lo, double hi) {
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw ConfigError(std::string("augment.") + name + " range is empty or not finite");
}

double draw(Rng& rng, double lo, double hi) { return lo == hi ? lo : rng.uniform(lo, hi); }

/// Bilinear sample of the flow at a fractional position; invalid if any
/// contributing tap is invalid or the point is outside the frame.
bool sample_flow(const FlowField& f, double x, double y, double& u, double& v) {
  if (!(x >= 0.0 && y >= 0.0 && x <= f.width - 1 && y <= f.height - 1)) return false;
  const int x0 = std::min(static_cast<int>(std::floor(x)), f.width - 1);
  const int y0 = std::min(static_cast<int>(std::floor(y)), f.height - 1);
  const int x1 = std::min(x0 + 1, f.width - 1);
  const int y1 = std::min(y0 + 1, f.height - 1);
  const double fx = x - x0, fy = y - y0;
  const std::size_t i00 = f.index(x0, y0), i01 = f.index(x1, y0), i10 = f.index(x0, y1), i11 = f.index(x1, y1);
  auto needed = [](double w) { return w != 0.0; };
  if ((needed((1 - fx) * (1 - fy)) && !f.valid[i00]) || (needed(fx * (1 - fy)) && !f.valid[i01]) ||
      (needed((1 - fx) * fy) && !f.valid[i10]) || (needed(fx * fy) && !f.valid[i11]))
    return false;
  u = (1 - fy) * ((1 - fx) * f.u[i00] + fx * f.u[i01]) + fy * ((1 - fx) * f.u[i10] + fx * f.u[i11]);
  v = (1 - fy) * ((1 - fx) * f.v[i00] + fx * f.v[i01]) + fy * ((1 - fx) * f.v[i10] + fx * f.v[i11]);
  return true;
}

Image warp_image(const Image& src, const Affine2& inverse) {
  Image out(src.width, src.height, src.channels);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      const Point2 p = inverse.apply({double(x), double(y)});
      for (int c = 0; c < src.channels; ++c) out.at(c, y, x) = src.sample_bilinear(c, p.x, p.y);
    }
  return out;
}

void require_invertible(const Affine2& a) {
  if (!(std::abs(a.determinant()) > 1e-12)) throw Error("augmentation transform is not invertible");
}

}  // namespace

void AugmentRanges::validate() const {
  if (!(translate >= 0.0) || !(rotate_deg >= 0.0) || !(noise_max >= 0.0) || !(brightness_sigma >= 0.0))
    throw ConfigError("augment: magnitudes must be non-negative");
  check_range("scale", scale_min, scale_max);
  check_range("contrast", contrast_min, contrast_max);
  check_range("color", color_min, color_max);
  check_range("gamma", gamma_min, gamma_max);
  if (!(scale_min > 0.0)) throw ConfigError("augment.scale_min must be positive");
  if (!(color_min >= 0.0) || !(gamma_min > 0.0)) throw ConfigError("augment: color and gamma must be positive");
  if (!(contrast_min >= -1.0)) throw ConfigError("augment.contrast_min must be >= -1");
  if (!(relative_fraction >= 0.0 && relative_fraction <= 1.0))
    throw ConfigError("augment.relative_fraction must be in [0, 1]");
}

AugmentRanges AugmentRanges::from_config(KeyValues& kv) {
  AugmentRanges r;
  r.translate = kv.take_double("augment.translate", r.translate);
  r.rotate_deg = kv.take_double("augment.rotate_deg", r.rotate_deg);
  r.scale_min = kv.take_double("augment.scale_min", r.scale_min);
  r.scale_max = kv.take_double("augment.scale_max", r.scale_max);
  r.noise_max = kv.take_double("augment.noise_max", r.noise_max);
  r.contrast_min = kv.take_double("augment.contrast_min", r.contrast_min);
  r.contrast_max = kv.take_double("augment.contrast_max", r.contrast_max);
  r.color_min = kv.take_double("augment.color_min", r.color_min);
  r.color_max = kv.take_double("augment.color_max", r.color_max);
  r.gamma_min = kv.take_double("augment.gamma_min", r.gamma_min);
  r.gamma_max = kv.take_double("augment.gamma_max", r.gamma_max);
  r.brightness_sigma = kv.take_double("augment.brightness_sigma", r.brightness_sigma);
  r.relative_fraction = kv.take_double("augment.relative_fraction", r.relative_fraction);
  r.validate();
  return r;
}

AugmentRanges AugmentRanges::none() {
  AugmentRanges r;
  r.translate = 0.0;
  r.rotate_deg = 0.0;
  r.scale_min = r.scale_max = 1.0;
  r.noise_max = 0.0;
  r.contrast_min = r.contrast_max = 0.0;
  r.color_min = r.color_max = 1.0;
  r.gamma_min = r.gamma_max = 1.0;
  r.brightness_sigma = 0.0;
  r.relative_fraction = 0.0;
  return r;
}

AugmentSpec AugmentSpec::without_photometric() const {
  AugmentSpec s = *this;
  s.photometric = false;
  return s;
}

AugmentSpec sample_augmentation(Rng& rng, const AugmentRanges& r, int width, int height) {
  r.validate();
  AugmentSpec s;
  const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
  const double t = r.translate * width;
  s.strong = {draw(rng, r.scale_min, r.scale_max), draw(rng, -r.rotate_deg, r.rotate_deg), draw(rng, -t, t),
              draw(rng, -t, t), cx, cy};
  const double f = r.relative_fraction;
  const double rt = f * t, rr = f * r.rotate_deg;
  s.relative = {draw(rng, 1.0 + f * (r.scale_min - 1.0), 1.0 + f * (r.scale_max - 1.0)), draw(rng, -rr, rr),
                draw(rng, -rt, rt), draw(rng, -rt, rt), cx, cy};
  s.noise_sigma = {draw(rng, 0.0, r.noise_max), draw(rng, 0.0, r.noise_max)};
  s.noise_seed = rng.next_u64();
  s.contrast = draw(rng, r.contrast_min, r.contrast_max);
  for (double& c : s.color) c = draw(rng, r.color_min, r.color_max);
  s.gamma = draw(rng, r.gamma_min, r.gamma_max);
  s.brightness = r.brightness_sigma > 0.0 ? rng.normal(0.0, r.brightness_sigma) : 0.0;
  return s;
}

Image apply_photometric(const Image& image, const AugmentSpec& spec, int frame) {
  Image out = image;
  const std::size_t plane = out.plane_size();
  for (int c = 0; c < out.channels; ++c) {
    const double mult = c < 3 ? spec.color[c] : 1.0;
    for (std::size_t i = 0; i < plane; ++i) {
      float& p = out.data[c * plane + i];
      const double colored = std::clamp(p * mult, 0.0, 1.0);
      p = static_cast<float>(std::pow(colored, spec.gamma) + spec.brightness);
    }
  }
  double mean = 0.0;
  for (float p : out.data) mean += p;
  mean /= static_cast<double>(out.data.size());
  Rng noise = Rng::substream(spec.noise_seed, {static_cast<std::uint64_t>(frame)});
  const double sigma = spec.noise_sigma[frame];
  for (float& p : out.data) {
    double q = (p - mean) * (1.0 + spec.contrast) + mean;
    if (sigma > 0.0) q += noise.normal(0.0, sigma);
    p = static_cast<float>(std::clamp(q, 0.0, 1.0));
  }
  return out;
}

Sample apply_geometric(const Sample& sample, const GeometricAugment& geo) {
  require_invertible(geo.a1);
  require_invertible(geo.a2);
  const Affine2 inv1 = geo.a1.inverse();
  const Affine2 inv2 = geo.a2.inverse();
  const int w = sample.width(), h = sample.height();

  Sample out;
  out.img1 = warp_image(sample.img1, inv1);
  out.img2 = warp_image(sample.img2, inv2);
  out.flow = FlowField(w, h);
  out.occlusion.assign(static_cast<std::size_t>(w) * h, 1);
  out.owner.assign(static_cast<std::size_t>(w) * h, -1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = out.flow.index(x, y);
      const Point2 p = inv1.apply({double(x), double(y)});
      double u = 0.0, v = 0.0;
      if (!sample_flow(sample.flow, p.x, p.y, u, v)) {
        out.flow.valid[i] = 0;
        continue;
      }
      const Point2 q = geo.a2.apply({p.x + u, p.y + v});
      out.flow.u[i] = q.x - x;
      out.flow.v[i] = q.y - y;
      out.flow.valid[i] = 1;
      const int nx = std::clamp(static_cast<int>(std::lround(p.x)), 0, w - 1);
      const int ny = std::clamp(static_cast<int>(std::lround(p.y)), 0, h - 1);
      const std::size_t src = sample.flow.index(nx, ny);
      if (!sample.occlusion.empty()) out.occlusion[i] = sample.occlusion[src];
      else out.occlusion[i] = 0;
      if (!sample.owner.empty()) out.owner[i] = sample.owner[src];
    }
  return out;
}

Sample apply_augmentation(const Sample& sample, const AugmentSpec& spec) {
  Sample out = apply_geometric(sample, {spec.a1(), spec.a2()});
  if (spec.photometric) {
    out.img1 = apply_photometric(out.img1, spec, 0);
    out.img2 = apply_photometric(out.img2, spec, 1);
  }
  return out;
}

}  // namespace deskflow
