#include <algorithm>
#include <cmath>

#include "deskflow/errors.hpp"
#include "deskflow/rng.hpp"
#include "deskflow/scene.hpp"
#include "deskflow/varrefine.hpp"
#include "doctest.h"

using namespace deskflow;

namespace {

Image texture(int w, int h, std::uint64_t id) {
  ProceduralCatalog catalog(8, 1, 1, 7);
  return catalog.background(static_cast<int>(id), w, h);
}

// Periodic bilinear read; the procedural backgrounds tile seamlessly.
double periodic(const Image& img, int c, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const double ax = x - fx, ay = y - fy;
  auto at = [&](int xi, int yi) {
    xi = ((xi % img.width) + img.width) % img.width;
    yi = ((yi % img.height) + img.height) % img.height;
    return static_cast<double>(img.at(c, yi, xi));
  };
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  return (1 - ay) * ((1 - ax) * at(x0, y0) + ax * at(x0 + 1, y0)) + ay * ((1 - ax) * at(x0, y0 + 1) + ax * at(x0 + 1, y0 + 1));
}

// Band-limited analytic texture, so fractional shifts are exact.
Image waves(int w, int h, double fu, double fv, std::uint64_t seed) {
  Rng rng(seed);
  struct Wave {
    double a, wx, wy, phase;
  };
  std::vector<Wave> waves[3];
  for (auto& list : waves)
    for (int k = 0; k < 12; ++k)
      list.push_back({rng.uniform(0.02, 0.06), rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(0.0, 6.3)});
  Image out(w, h, 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0.5;
        for (const Wave& q : waves[c]) s += q.a * std::sin(q.wx * (x - fu) + q.wy * (y - fv) + q.phase);
        out.at(c, y, x) = static_cast<float>(s);
      }
  return out;
}

// img2(x + f) == img1(x) for a constant f.
Image shifted(const Image& img, double fu, double fv) {
  Image out(img.width, img.height, img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) out.at(c, y, x) = static_cast<float>(periodic(img, c, x - fu, y - fv));
  return out;
}

double mean_epe(const FlowField& a, const FlowField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::hypot(a.u[i] - b.u[i], a.v[i] - b.v[i]);
  return s / static_cast<double>(a.size());
}

FlowField upsampled(const FlowField& quarter, int w, int h) {
  VarParams p;
  p.coarse_iters = 0;
  p.fullres_iters = 0;
  return refine(quarter, Image(w, h, 3, 0.5f), Image(w, h, 3, 0.5f), p);
}

// sigma is in units of the field's own pixels; 0.25 on a quarter grid is
// one full-resolution pixel.
FlowField noisy(const FlowField& f, Rng& rng, double sigma) {
  FlowField out = f;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.u[i] += rng.normal(0.0, sigma);
    out.v[i] += rng.normal(0.0, sigma);
  }
  return out;
}

GeneratorConfig smooth_motion() {
  GeneratorConfig g;
  g.width = 128;
  g.height = 96;
  g.sprite_count_min = g.sprite_count_max = 0;
  return g;
}

}  // namespace

TEST_CASE("boundaries of a constant image vanish") {
  const Image b = detect_boundaries(Image(40, 30, 3, 0.3f));
  CHECK(b.channels == 1);
  CHECK(*std::max_element(b.data.begin(), b.data.end()) == 0.0f);
}

TEST_CASE("a vertical step gives a ridge on the edge columns") {
  Image img(32, 24, 1, 0.0f);
  for (int y = 0; y < 24; ++y)
    for (int x = 16; x < 32; ++x) img.at(0, y, x) = 1.0f;
  const Image b = detect_boundaries(img);
  for (int y = 0; y < 24; ++y) {
    const float ridge = std::max(b.at(0, y, 15), b.at(0, y, 16));
    CHECK(ridge == doctest::Approx(1.0));
    for (int x = 0; x < 32; ++x) CHECK(b.at(0, y, x) <= ridge);
    CHECK(b.at(0, y, 5) == 0.0f);
    CHECK(b.at(0, y, 27) == 0.0f);
  }
}

TEST_CASE("boundary map is invariant to affine intensity changes") {
  const Image img = texture(64, 48, 1);
  Image other = img;
  for (float& v : other.data) v = 0.4f * v + 0.25f;
  const Image a = detect_boundaries(img), b = detect_boundaries(other);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) worst = std::max(worst, double(std::abs(a.data[i] - b.data[i])));
  MESSAGE("max difference " << worst);
  CHECK(worst < 1e-6);
}

TEST_CASE("identical images keep zero flow") {
  const Image img = texture(64, 48, 2);
  const FlowField out = refine(FlowField(16, 12), img, img, VarParams{});
  CHECK(out.width == 64);
  CHECK(out.height == 48);
  double m = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) m = std::max({m, std::abs(out.u[i]), std::abs(out.v[i])});
  CHECK(m < 1e-3);
  CHECK(out.valid_count() == out.size());
}

TEST_CASE("ground-truth initialization is stable on a constant translation") {
  const Image img1 = waves(128, 96, 0.0, 0.0, 3);
  const Image img2 = waves(128, 96, 2.5, -1.5, 3);
  const FlowField gt(128, 96, 2.5, -1.5);
  const FlowField out = refine(to_quarter(gt), img1, img2, VarParams{});
  const double before = mean_epe(upsampled(to_quarter(gt), 128, 96), gt);
  const double after = mean_epe(out, gt);
  MESSAGE("EPE " << before << " -> " << after);
  CHECK(after <= before + 0.05);
}

TEST_CASE("refinement denoises a perturbed ground truth") {
  const GeneratorConfig g = smooth_motion();
  const auto assets = make_catalog(g);
  Rng rng(11);
  double before = 0.0, after = 0.0;
  const int n = 4;
  for (int i = 0; i < n; ++i) {
    const Sample s = generate_sample(g, *assets, 5, i);
    const FlowField init = noisy(to_quarter(s.flow), rng, 0.25);
    before += mean_epe(upsampled(init, s.width(), s.height()), s.flow);
    after += mean_epe(refine(init, s.img1, s.img2, VarParams{}), s.flow);
  }
  MESSAGE("mean EPE " << before / n << " -> " << after / n);
  CHECK(after < before);
}

TEST_CASE("energy never increases within a level") {
  const GeneratorConfig g = smooth_motion();
  const auto assets = make_catalog(g);
  Rng rng(12);
  const Sample s = generate_sample(g, *assets, 6, 0);
  std::vector<LevelTrace> trace;
  refine(noisy(to_quarter(s.flow), rng, 0.25), s.img1, s.img2, VarParams{}, &trace);
  REQUIRE(trace.size() == 3);
  CHECK(trace[0].width == 32);
  CHECK(trace[1].width == 64);
  CHECK(trace[2].width == 128);
  CHECK(trace[0].energies.size() == 11);
  CHECK(trace[2].energies.size() == 6);
  for (const LevelTrace& t : trace)
    for (std::size_t k = 1; k < t.energies.size(); ++k)
      CHECK(t.energies[k] <= t.energies[k - 1] * (1 + 1e-8));
}

TEST_CASE("zero boundary sensitivity matches the unmodulated solver") {
  const Image img1 = texture(64, 48, 4);
  const Image img2 = shifted(img1, 1.0, 0.5);
  Rng rng(3);
  const FlowField init = to_quarter(noisy(FlowField(64, 48, 1.0, 0.5), rng, 0.5));
  VarParams a;
  a.lambda = 0.0;
  VarParams b;
  b.modulate = false;
  const FlowField fa = refine(init, img1, img2, a), fb = refine(init, img1, img2, b);
  CHECK(fa.u == fb.u);
  CHECK(fa.v == fb.v);
}

TEST_CASE("refine rejects mismatched inputs") {
  const Image img(64, 48, 3, 0.5f);
  CHECK_THROWS_AS(refine(FlowField(16, 16), img, img, VarParams{}), ShapeError);
  CHECK_THROWS_AS(refine(FlowField(16, 12), img, Image(64, 40, 3), VarParams{}), ShapeError);
  VarParams bad;
  bad.omega = 2.5;
  CHECK_THROWS_AS(refine(FlowField(16, 12), img, img, bad), ConfigError);
  CHECK(quarter_extent(50) == 13);
}

TEST_CASE("var config keys") {
  KeyValues kv = KeyValues::parse("var.alpha_base = 0.5\nvar.modulate = false\n");
  const VarParams p = VarParams::from_config(kv);
  CHECK(p.alpha_base == 0.5);
  CHECK_FALSE(p.modulate);
  CHECK(p.coarse_iters == 20);
  kv.require_all_taken();
}
