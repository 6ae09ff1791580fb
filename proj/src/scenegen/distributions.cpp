#include <algorithm>
#include <cmath>

#include "deskflow/errors.hpp"
#include "deskflow/scene.hpp"

namespace deskflow {

void ClampedPowerGaussian::validate() const {
  if (!(a <= mu && mu <= b)) throw ConfigError("clamped power Gaussian needs a <= mu <= b");
  if (!(sigma >= 0.0)) throw ConfigError("clamped power Gaussian needs sigma >= 0");
  if (!(k >= 1.0)) throw ConfigError("clamped power Gaussian needs k >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("clamped power Gaussian needs p in [0, 1]");
}

double sample_param(const ClampedPowerGaussian& dist, Rng& rng) {
  // Both variates are always drawn so the stream advances by a fixed amount.
  const bool beta = rng.bernoulli(dist.p);
  const double gamma = rng.normal(dist.mu, dist.sigma);
  if (!beta) return dist.mu;
  const double powered = std::copysign(std::pow(std::fabs(gamma), dist.k), gamma);
  return std::min(std::max(powered, dist.a), dist.b);
}

namespace {

ClampedPowerGaussian take_dist(KeyValues& kv, const std::string& name, ClampedPowerGaussian d) {
  d.k = kv.take_double(name + ".k", d.k);
  d.mu = kv.take_double(name + ".mu", d.mu);
  d.sigma = kv.take_double(name + ".sigma", d.sigma);
  d.a = kv.take_double(name + ".a", d.a);
  d.b = kv.take_double(name + ".b", d.b);
  d.p = kv.take_double(name + ".p", d.p);
  return d;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (width <= 0 || height <= 0) throw ConfigError("generator: width and height must be positive");
  if (reference_width <= 0) throw ConfigError("generator: reference_width must be positive");
  if (sprite_count_min < 0 || sprite_count_max < sprite_count_min)
    throw ConfigError("generator: need 0 <= sprite_count_min <= sprite_count_max");
  if (sprite_size_min <= 0 || sprite_size_max < sprite_size_min || sprite_size_std < 0)
    throw ConfigError("generator: invalid sprite size range");
  if (background_count <= 0 || (sprite_count_max > 0 && (shape_count <= 0 || view_count <= 0)))
    throw ConfigError("generator: empty asset catalog");
  if (quarter && (width % 2 != 0 || height % 2 != 0)) throw ConfigError("generator: quartering needs even dimensions");
  for (const auto* d : {&motion.translation_bg, &motion.rotation_bg, &motion.zoom_bg, &motion.translation_ch,
                        &motion.rotation_ch, &motion.zoom_ch})
    d->validate();
  if (motion.zoom_bg.a <= 0 || motion.zoom_ch.a <= 0) throw ConfigError("generator: zoom must stay positive");
}

GeneratorConfig GeneratorConfig::from_config(KeyValues& kv) {
  GeneratorConfig c;
  c.width = static_cast<int>(kv.take_int("width", c.width));
  c.height = static_cast<int>(kv.take_int("height", c.height));
  c.reference_width = kv.take_double("reference_width", c.reference_width);
  c.sprite_count_min = static_cast<int>(kv.take_int("sprite_count_min", c.sprite_count_min));
  c.sprite_count_max = static_cast<int>(kv.take_int("sprite_count_max", c.sprite_count_max));
  c.sprite_size_mean = kv.take_double("sprite_size_mean", c.sprite_size_mean);
  c.sprite_size_std = kv.take_double("sprite_size_std", c.sprite_size_std);
  c.sprite_size_min = kv.take_double("sprite_size_min", c.sprite_size_min);
  c.sprite_size_max = kv.take_double("sprite_size_max", c.sprite_size_max);
  c.motion.translation_bg = take_dist(kv, "translation_bg", c.motion.translation_bg);
  c.motion.rotation_bg = take_dist(kv, "rotation_bg", c.motion.rotation_bg);
  c.motion.zoom_bg = take_dist(kv, "zoom_bg", c.motion.zoom_bg);
  c.motion.translation_ch = take_dist(kv, "translation_ch", c.motion.translation_ch);
  c.motion.rotation_ch = take_dist(kv, "rotation_ch", c.motion.rotation_ch);
  c.motion.zoom_ch = take_dist(kv, "zoom_ch", c.motion.zoom_ch);
  c.background_count = static_cast<int>(kv.take_int("background_count", c.background_count));
  c.shape_count = static_cast<int>(kv.take_int("shape_count", c.shape_count));
  c.view_count = static_cast<int>(kv.take_int("view_count", c.view_count));
  c.quarter = kv.take_bool("quarter", c.quarter);
  c.strict_quadrant_occlusion = kv.take_bool("strict_quadrant_occlusion", c.strict_quadrant_occlusion);
  c.asset_dir = kv.take_string("asset_dir", c.asset_dir);
  c.reference_count = kv.take_int("reference_count", c.reference_count);
  c.validate();
  return c;
}

}  // namespace deskflow
