#include <algorithm>
#include <sstream>

#include "deskflow/errors.hpp"
#include "deskflow/scene.hpp"

namespace deskflow {

Affine2 SceneSpec::sprite_matrix(std::size_t i) const {
  return compose(sprite_rel_transforms.at(i).matrix(), bg_transform.matrix());
}

SceneSpec sample_scene(const GeneratorConfig& config, Rng& rng) {
  config.validate();
  const double scale = config.scale();
  const MotionDistributions& m = config.motion;

  SceneSpec spec;
  spec.seed = rng.next_u64();
  spec.width = config.width;
  spec.height = config.height;
  spec.render_scale = scale;
  spec.background_id = static_cast<int>(rng.uniform_int(0, config.background_count - 1));

  const auto count = rng.uniform_int(config.sprite_count_min, config.sprite_count_max);
  spec.sprites.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    SpriteSpec s;
    s.shape_id = static_cast<int>(rng.uniform_int(0, config.shape_count - 1));
    s.view_id = static_cast<int>(rng.uniform_int(0, config.view_count - 1));
    s.size = std::clamp(rng.normal(config.sprite_size_mean, config.sprite_size_std), config.sprite_size_min,
                        config.sprite_size_max);
    s.x = rng.uniform(0.0, config.width);
    s.y = rng.uniform(0.0, config.height);
    spec.sprites.push_back(s);
  }

  AffineTransform& bg = spec.bg_transform;
  bg.zoom = sample_param(m.zoom_bg, rng);
  bg.rotation_deg = sample_param(m.rotation_bg, rng);
  bg.tx = scale * sample_param(m.translation_bg, rng);
  bg.ty = scale * sample_param(m.translation_bg, rng);
  bg.cx = 0.5 * (config.width - 1);
  bg.cy = 0.5 * (config.height - 1);
  const Affine2 bg_matrix = bg.matrix();

  for (const SpriteSpec& s : spec.sprites) {
    AffineTransform rel;
    rel.zoom = sample_param(m.zoom_ch, rng);
    rel.rotation_deg = sample_param(m.rotation_ch, rng);
    rel.tx = scale * sample_param(m.translation_ch, rng);
    rel.ty = scale * sample_param(m.translation_ch, rng);
    const Point2 pivot = bg_matrix.apply({s.x, s.y});
    rel.cx = pivot.x;
    rel.cy = pivot.y;
    spec.sprite_rel_transforms.push_back(rel);
  }
  return spec;
}

namespace {

std::string transform_text(const AffineTransform& t) {
  return format_double(t.zoom) + " " + format_double(t.rotation_deg) + " " + format_double(t.tx) + " " +
         format_double(t.ty) + " " + format_double(t.cx) + " " + format_double(t.cy);
}

AffineTransform parse_transform(std::istringstream& in) {
  AffineTransform t;
  if (!(in >> t.zoom >> t.rotation_deg >> t.tx >> t.ty >> t.cx >> t.cy)) throw FormatError("bad transform in scene spec");
  return t;
}

}  // namespace

std::string SceneSpec::to_text() const {
  std::string out;
  out += "seed = " + std::to_string(seed) + "\n";
  out += "width = " + std::to_string(width) + "\n";
  out += "height = " + std::to_string(height) + "\n";
  out += "render_scale = " + format_double(render_scale) + "\n";
  out += "background = " + std::to_string(background_id) + "\n";
  out += "bg_transform = " + transform_text(bg_transform) + "\n";
  out += "sprite_count = " + std::to_string(sprites.size()) + "\n";
  for (std::size_t i = 0; i < sprites.size(); ++i) {
    const SpriteSpec& s = sprites[i];
    // shape view size x y | zoom rotation tx ty cx cy
    out += "sprite = " + std::to_string(s.shape_id) + " " + std::to_string(s.view_id) + " " + format_double(s.size) +
           " " + format_double(s.x) + " " + format_double(s.y) + " " + transform_text(sprite_rel_transforms[i]) + "\n";
  }
  return out;
}

SceneSpec SceneSpec::from_text(const std::string& text) {
  SceneSpec spec;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(' ') + 1);
    std::istringstream in(line.substr(eq + 1));
    if (key == "seed") {
      in >> spec.seed;
    } else if (key == "width") {
      in >> spec.width;
    } else if (key == "height") {
      in >> spec.height;
    } else if (key == "render_scale") {
      in >> spec.render_scale;
    } else if (key == "background") {
      in >> spec.background_id;
    } else if (key == "bg_transform") {
      spec.bg_transform = parse_transform(in);
    } else if (key == "sprite") {
      SpriteSpec s;
      if (!(in >> s.shape_id >> s.view_id >> s.size >> s.x >> s.y)) throw FormatError("bad sprite line in scene spec");
      spec.sprites.push_back(s);
      spec.sprite_rel_transforms.push_back(parse_transform(in));
    } else if (key != "sprite_count") {
      throw FormatError("unknown scene spec key '" + key + "'");
    }
    if (in.fail()) throw FormatError("bad value for scene spec key '" + key + "'");
  }
  return spec;
}

}  // namespace deskflow
