#include <algorithm>
#include <cmath>

#include "deskflow/augment.hpp"
#include "deskflow/errors.hpp"
#include "doctest.h"

using namespace deskflow;

namespace {

GeneratorConfig desk(int sprites_min = 16, int sprites_max = 24) {
  GeneratorConfig c;
  c.width = 128;
  c.height = 96;
  c.sprite_count_min = sprites_min;
  c.sprite_count_max = sprites_max;
  return c;
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, double(std::abs(a.data[i] - b.data[i])));
  return m;
}

}  // namespace

TEST_CASE("sampled parameters respect the ranges") {
  Rng rng(1);
  const AugmentRanges r;
  const double t = 0.2 * 128;
  bool ok = true;
  double min_rot = 0, max_rot = 0, min_scale = 10, max_scale = 0;
  for (int i = 0; i < 100000; ++i) {
    const AugmentSpec s = sample_augmentation(rng, r, 128, 96);
    ok = ok && std::abs(s.strong.rotation_deg) <= 17.0 && s.strong.zoom >= 0.9 && s.strong.zoom <= 2.0;
    ok = ok && std::abs(s.strong.tx) <= t && std::abs(s.strong.ty) <= t;
    ok = ok && std::abs(s.relative.rotation_deg) <= 0.25 * 17.0 && std::abs(s.relative.tx) <= 0.25 * t;
    ok = ok && s.relative.zoom >= 1.0 - 0.025 && s.relative.zoom <= 1.25;
    ok = ok && s.noise_sigma[0] >= 0.0 && s.noise_sigma[0] <= 0.04 && s.noise_sigma[1] <= 0.04;
    ok = ok && s.contrast >= -0.8 && s.contrast <= 0.4 && s.gamma >= 0.7 && s.gamma <= 1.5;
    for (double c : s.color) ok = ok && c >= 0.5 && c <= 2.0;
    min_rot = std::min(min_rot, s.strong.rotation_deg);
    max_rot = std::max(max_rot, s.strong.rotation_deg);
    min_scale = std::min(min_scale, s.strong.zoom);
    max_scale = std::max(max_scale, s.strong.zoom);
  }
  CHECK(ok);
  // The draws actually explore the ranges.
  CHECK(min_rot < -16.9);
  CHECK(max_rot > 16.9);
  CHECK(min_scale < 0.91);
  CHECK(max_scale > 1.99);
}

TEST_CASE("brightness spread") {
  Rng rng(2);
  AugmentRanges r = AugmentRanges::none();
  r.brightness_sigma = 0.2;
  double sum = 0.0, sq = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double b = sample_augmentation(rng, r, 64, 48).brightness;
    sum += b;
    sq += b * b;
  }
  const double mean = sum / n;
  const double sigma = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(sigma - 0.2) < 0.002);
}

TEST_CASE("collapsed ranges give the identity") {
  Rng rng(3);
  const AugmentSpec s = sample_augmentation(rng, AugmentRanges::none(), 128, 96);
  CHECK(s.strong.is_identity());
  CHECK(s.relative.is_identity());
  CHECK(s.gamma == 1.0);
  CHECK(s.contrast == 0.0);
  CHECK(s.brightness == 0.0);
  CHECK(s.noise_sigma[0] == 0.0);

  auto assets = make_catalog(desk());
  const Sample in = generate_sample(desk(), *assets, 4, 0);
  const Sample out = apply_augmentation(in, s);
  CHECK(max_abs_diff(in.img1, out.img1) < 1e-6);
  CHECK(max_abs_diff(in.img2, out.img2) < 1e-6);
  for (std::size_t i = 0; i < in.flow.u.size(); ++i) {
    CHECK(out.flow.valid[i] == in.flow.valid[i]);
    CHECK(std::abs(out.flow.u[i] - in.flow.u[i]) < 1e-9);
  }
  CHECK(out.occlusion == in.occlusion);

  AugmentRanges bad;
  bad.scale_min = 3.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("shared translation leaves zero flow at zero") {
  Sample s;
  s.img1 = Image(32, 24, 3, 0.5f);
  s.img2 = s.img1;
  s.flow = FlowField(32, 24);
  AugmentSpec spec;
  spec.strong = {1.0, 0.0, 3.0, -2.0, 15.5, 11.5};
  spec.photometric = false;
  const Sample out = apply_augmentation(s, spec);
  int valid = 0;
  for (std::size_t i = 0; i < out.flow.u.size(); ++i) {
    if (!out.flow.valid[i]) continue;
    ++valid;
    CHECK(std::abs(out.flow.u[i]) < 1e-12);
    CHECK(std::abs(out.flow.v[i]) < 1e-12);
  }
  CHECK(valid == (32 - 3) * (24 - 2));
}

TEST_CASE("flow adaptation matches the closed-form composition") {
  const GeneratorConfig cfg = desk(0, 0);
  auto assets = make_catalog(cfg);
  Rng rng(5);
  int checked = 0;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    SceneSpec scene;
    const Sample s = generate_sample(cfg, *assets, 6, k, &scene);
    const Affine2 t = scene.bg_transform.matrix();
    const AugmentSpec spec = sample_augmentation(rng, AugmentRanges{}, cfg.width, cfg.height);
    const Sample out = apply_augmentation(s, spec);
    const Affine2 closed = compose(spec.a2(), compose(t, spec.a1().inverse()));
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        const std::size_t i = out.flow.index(x, y);
        if (!out.flow.valid[i]) continue;
        const Point2 q = closed.apply({double(x), double(y)});
        worst = std::max({worst, std::abs(out.flow.u[i] - (q.x - x)), std::abs(out.flow.v[i] - (q.y - y))});
        ++checked;
      }
  }
  CHECK(checked > 1000);
  CHECK(worst < 1e-6);
}

TEST_CASE("augmented samples stay warp consistent") {
  const GeneratorConfig cfg = desk();
  auto assets = make_catalog(cfg);
  Rng rng(7);
  for (int k = 0; k < 5; ++k) {
    const Sample s = generate_sample(cfg, *assets, 8, k);
    const Sample out = apply_augmentation(s, sample_augmentation(rng, AugmentRanges{}, cfg.width, cfg.height)
                                                 .without_photometric());
    double err = 0.0;
    int n = 0;
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        const std::size_t i = out.flow.index(x, y);
        if (!out.flow.valid[i] || out.occlusion[i]) continue;
        const double tx = x + out.flow.u[i], ty = y + out.flow.v[i];
        if (tx < 0 || ty < 0 || tx > cfg.width - 1 || ty > cfg.height - 1) continue;
        for (int c = 0; c < 3; ++c) err += std::abs(out.img2.sample_bilinear(c, tx, ty) - out.img1.at(c, y, x));
        n += 3;
      }
    REQUIRE(n > 0);
    CHECK(err / n < 0.03);
  }
}

TEST_CASE("geometric augmentations compose") {
  const GeneratorConfig cfg = desk();
  auto assets = make_catalog(cfg);
  const Sample s = generate_sample(cfg, *assets, 9, 0);
  Rng rng(10);
  AugmentRanges mild;
  mild.translate = 0.05;
  mild.scale_min = 1.0;
  mild.scale_max = 1.2;
  const AugmentSpec p = sample_augmentation(rng, mild, cfg.width, cfg.height);
  const AugmentSpec q = sample_augmentation(rng, mild, cfg.width, cfg.height);
  const Sample twice = apply_geometric(apply_geometric(s, {p.a1(), p.a2()}), {q.a1(), q.a2()});
  const Sample once = apply_geometric(s, {compose(q.a1(), p.a1()), compose(q.a2(), p.a2())});
  // Compare where both are valid and the flow is locally affine (background).
  int compared = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < once.flow.u.size(); ++i) {
    if (!once.flow.valid[i] || !twice.flow.valid[i] || once.owner[i] != -1) continue;
    const int x = static_cast<int>(i % cfg.width), y = static_cast<int>(i / cfg.width);
    bool all_bg = true;
    for (int dy = -3; dy <= 3 && all_bg; ++dy)
      for (int dx = -3; dx <= 3 && all_bg; ++dx) {
        const int xx = std::clamp(x + dx, 0, cfg.width - 1), yy = std::clamp(y + dy, 0, cfg.height - 1);
        all_bg = once.owner[once.flow.index(xx, yy)] == -1 && twice.owner[once.flow.index(xx, yy)] == -1;
      }
    if (!all_bg) continue;
    ++compared;
    worst = std::max({worst, std::abs(once.flow.u[i] - twice.flow.u[i]), std::abs(once.flow.v[i] - twice.flow.v[i])});
  }
  CHECK(compared > 100);
  CHECK(worst < 1e-5);
}

TEST_CASE("photometric chain") {
  Sample s;
  s.img1 = Image(4, 2, 3, 0.4f);
  s.img1.at(0, 0, 0) = 0.8f;
  s.img2 = s.img1;
  s.flow = FlowField(4, 2, 1.0, 0.5);
  AugmentSpec spec;
  spec.color = {1.5, 1.0, 0.5};
  spec.gamma = 1.2;
  spec.brightness = 0.05;
  spec.contrast = -0.3;

  const Sample out = apply_augmentation(s, spec);
  const Sample geo = apply_augmentation(s, spec.without_photometric());
  CHECK(out.flow.u == geo.flow.u);
  CHECK(out.flow.v == geo.flow.v);
  CHECK(out.flow.valid == geo.flow.valid);

  // Hand evaluation of color -> gamma -> brightness -> contrast.
  std::vector<double> stage;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 8; ++i) {
      const double p = s.img1.data[c * 8 + i];
      stage.push_back(std::pow(std::min(1.0, p * spec.color[c]), 1.2) + 0.05);
    }
  double mean = 0.0;
  for (double v : stage) mean += v;
  mean /= stage.size();
  for (std::size_t i = 0; i < stage.size(); ++i)
    CHECK(out.img1.data[i] == doctest::Approx(std::clamp((stage[i] - mean) * 0.7 + mean, 0.0, 1.0)).epsilon(1e-6));

  // Noise is independent per frame; everything else is shared.
  spec.noise_sigma = {0.02, 0.02};
  spec.noise_seed = 99;
  const Sample noisy = apply_augmentation(s, spec);
  CHECK(noisy.img1.data != noisy.img2.data);
  CHECK(apply_augmentation(s, spec).img1.data == noisy.img1.data);

  AugmentSpec singular;
  singular.strong.zoom = 0.0;
  CHECK_THROWS_AS(apply_augmentation(s, singular), Error);
}
