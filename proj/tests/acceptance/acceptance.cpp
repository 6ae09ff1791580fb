// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "deskflow/augment.hpp"
#include "deskflow/correlation.hpp"
#include "deskflow/flow.hpp"
#include "deskflow/gradcheck_suite.hpp"
#include "deskflow/scene.hpp"
#include "deskflow/trainer.hpp"
#include "deskflow/varrefine.hpp"

using namespace deskflow;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

// 1 --------------------------------------------------------------------------

Outcome gradcheck() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = run_gradcheck_suite(1, 5, 1e-5, 1e-4);
  const double t = seconds_since(t0);
  std::set<std::string> ops;
  bool ok = true;
  double worst = 0.0;
  for (const auto& r : rows) {
    ops.insert(r.op);
    ok = ok && r.passed && r.cases >= 5 && r.max_rel_error < 1e-4;
    worst = std::max(worst, r.max_rel_error);
  }
  const std::set<std::string> want{"conv2d", "upconv2d", "relu", "concat", "resize", "correlation"};
  ok = ok && ops == want && t < 60.0;
  return {ok, std::to_string(ops.size()) + " ops, max rel error " + fmt(worst) + ", " + fmt(t, 3) + " s"};
}

// 2 --------------------------------------------------------------------------

using nn::Shape;
using nn::Tensor;

Tensor<double> random_tensor(Shape s, Rng& rng) {
  Tensor<double> t(s);
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

double read(const Tensor<double>& t, int n, int c, int y, int x) {
  const Shape s = t.shape();
  if (y < 0 || x < 0 || y >= s.h || x >= s.w) return 0.0;
  return t.at(n, c, y, x);
}

Tensor<double> corr_oracle(const Tensor<double>& f1, const Tensor<double>& f2, int k, int d, int s1, int s2) {
  const Shape s = f1.shape();
  const int r = d / s2, side = 2 * r + 1;
  const int oh = (s.h + s1 - 1) / s1, ow = (s.w + s1 - 1) / s1;
  Tensor<double> out({s.n, side * side, oh, ow});
  for (int n = 0; n < s.n; ++n)
    for (int iy = 0; iy < side; ++iy)
      for (int ix = 0; ix < side; ++ix)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            double sum = 0.0;
            for (int py = -k; py <= k; ++py)
              for (int px = -k; px <= k; ++px)
                for (int c = 0; c < s.c; ++c) {
                  const int y = oy * s1 + py, x = ox * s1 + px;
                  sum += read(f1, n, c, y, x) * read(f2, n, c, y + (iy - r) * s2, x + (ix - r) * s2);
                }
            out.at(n, iy * side + ix, oy, ox) = sum;
          }
  return out;
}

double inner(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

Outcome correlation() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2);
  double fwd = 0.0, adj = 0.0;
  bool shapes_ok = true;
  int configs = 0;
  for (int k = 0; k <= 2; ++k)
    for (int d = 0; d <= 3; ++d)
      for (int s1 = 1; s1 <= 2; ++s1)
        for (int s2 = 1; s2 <= 2; ++s2) {
          const nn::CorrParams p{k, d, s1, s2};
          const Shape s{1, 3, 8, 8};
          const Tensor<double> a = random_tensor(s, rng), b = random_tensor(s, rng);
          const Tensor<double> got = nn::correlate_forward(a, b, p), want = corr_oracle(a, b, k, d, s1, s2);
          if (!(got.shape() == want.shape())) {
            shapes_ok = false;
            continue;
          }
          for (std::size_t i = 0; i < got.size(); ++i) fwd = std::max(fwd, std::abs(got.data()[i] - want.data()[i]));
          const Tensor<double> d1 = random_tensor(s, rng), d2 = random_tensor(s, rng);
          const Tensor<double> g = random_tensor(got.shape(), rng);
          auto [g1, g2] = nn::correlate_backward(g, a, b, p);
          adj = std::max(adj, std::abs(inner(nn::correlate_forward(d1, b, p), g) - inner(d1, g1)));
          adj = std::max(adj, std::abs(inner(nn::correlate_forward(a, d2, p), g) - inner(d2, g2)));
          ++configs;
        }
  const Tensor<double> big = random_tensor({1, 4, 16, 16}, rng);
  const int channels = nn::correlate_forward(big, big, nn::CorrParams{0, 20, 1, 2}).shape().c;
  const double t = seconds_since(t0);
  const bool ok = shapes_ok && fwd <= 1e-9 && adj <= 1e-8 && channels == 441 && t < 30.0;
  return {ok, std::to_string(configs) + " configs, forward " + fmt(fwd) + ", adjoint " + fmt(adj) + ", " +
                  std::to_string(channels) + " channels, " + fmt(t, 3) + " s"};
}

// 3 --------------------------------------------------------------------------

Outcome flo_roundtrip() {
  Rng rng(3);
  int exact = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int w = static_cast<int>(rng.uniform_int(1, 40)), h = static_cast<int>(rng.uniform_int(1, 30));
    FlowField f(w, h);
    for (std::size_t i = 0; i < f.size(); ++i) {
      f.u[i] = static_cast<float>(rng.uniform(-100.0, 100.0));
      f.v[i] = static_cast<float>(rng.uniform(-100.0, 100.0));
    }
    const std::string bytes = flo_bytes(f);
    std::istringstream in(bytes);
    const FlowField g = read_flo(in);
    const bool same = g.width == w && g.height == h && g.u == f.u && g.v == f.v && flo_bytes(g) == bytes;
    exact += same;
  }
  // 2x1 field: (1.5, -2) and (0, 0.25), little-endian float32.
  const unsigned char raw[] = {'P', 'I', 'E', 'H', 2, 0, 0, 0, 1, 0, 0, 0, 0x00, 0x00, 0xC0, 0x3F,
                               0x00, 0x00, 0x00, 0xC0, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3E};
  const std::string fixture(reinterpret_cast<const char*>(raw), sizeof raw);
  std::istringstream in(fixture);
  const FlowField f = read_flo(in);
  const bool fixture_ok = f.width == 2 && f.height == 1 && f.u[0] == 1.5 && f.v[0] == -2.0 && f.u[1] == 0.0 &&
                          f.v[1] == 0.25 && flo_bytes(f) == fixture;
  return {exact == 100 && fixture_ok,
          std::to_string(exact) + "/100 bit-exact, fixture " + (fixture_ok ? "matches" : "differs")};
}

// 4 --------------------------------------------------------------------------

Point2 transform_point(const AffineTransform& t, Point2 p) {
  const double th = t.rotation_deg * std::numbers::pi / 180.0;
  const double dx = p.x - t.cx, dy = p.y - t.cy;
  return {t.cx + t.zoom * (std::cos(th) * dx - std::sin(th) * dy) + t.tx,
          t.cy + t.zoom * (std::sin(th) * dx + std::cos(th) * dy) + t.ty};
}

double warp_error(const Sample& s) {
  double err = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < s.height(); ++y)
    for (int x = 0; x < s.width(); ++x) {
      const std::size_t i = s.flow.index(x, y);
      if (s.occlusion[i]) continue;
      for (int c = 0; c < 3; ++c)
        err += std::fabs(s.img2.sample_bilinear(c, x + s.flow.u[i], y + s.flow.v[i]) - s.img1.at(c, y, x));
      n += 3;
    }
  return n ? err / n : 0.0;
}

double normal_cdf(double x, double mu, double sigma) {
  return 0.5 * std::erfc(-(x - mu) / (sigma * std::numbers::sqrt2));
}

Outcome generator() {
  const auto t0 = std::chrono::steady_clock::now();
  GeneratorConfig cfg;
  cfg.width = 128;
  cfg.height = 96;
  const auto assets = make_catalog(cfg);
  double worst_warp = 0.0, worst_affine = 0.0;
  bool counts_in_range = true;
  for (int k = 0; k < 50; ++k) {
    SceneSpec spec;
    const Sample s = generate_sample(cfg, *assets, 4, k, &spec);
    worst_warp = std::max(worst_warp, warp_error(s));
    const int sprites = static_cast<int>(spec.sprites.size());
    counts_in_range = counts_in_range && sprites >= 16 && sprites <= 24;
    Rng probe = Rng::substream(40, {static_cast<std::uint64_t>(k)});
    for (int j = 0; j < 10; ++j) {
      const int x = static_cast<int>(probe.uniform_int(0, cfg.width - 1));
      const int y = static_cast<int>(probe.uniform_int(0, cfg.height - 1));
      const std::size_t i = s.flow.index(x, y);
      Point2 q = transform_point(spec.bg_transform, {double(x), double(y)});
      if (s.owner[i] >= 0) q = transform_point(spec.sprite_rel_transforms[s.owner[i]], q);
      worst_affine = std::max({worst_affine, std::fabs(s.flow.u[i] - (q.x - x)), std::fabs(s.flow.v[i] - (q.y - y))});
    }
  }

  // Distribution checks on the scene sampler.
  std::map<int, int> counts;
  std::vector<double> sizes;
  const int scenes = 10000;
  for (int i = 0; i < scenes; ++i) {
    Rng rng = Rng::substream(41, {static_cast<std::uint64_t>(i)});
    const SceneSpec spec = sample_scene(cfg, rng);
    ++counts[static_cast<int>(spec.sprites.size())];
    for (const auto& sp : spec.sprites) sizes.push_back(sp.size);
  }
  double chi2 = 0.0;
  for (int c = 16; c <= 24; ++c) {
    const double e = scenes / 9.0, o = counts.count(c) ? counts[c] : 0;
    chi2 += (o - e) * (o - e) / e;
  }
  const bool counts_ok = counts_in_range && counts.size() == 9 && chi2 < 20.09;
  const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
  double mean = 0.0;
  for (double s : sizes) mean += s;
  mean /= static_cast<double>(sizes.size());
  // E[clamp(N(200, 200), 50, 640)] by quadrature.
  double expected = 50.0 * normal_cdf(50.0, 200, 200) + 640.0 * (1.0 - normal_cdf(640.0, 200, 200));
  const int steps = 100000;
  for (int i = 0; i < steps; ++i) {
    const double x = 50.0 + (i + 0.5) * 590.0 / steps;
    const double z = (x - 200.0) / 200.0;
    expected += x * std::exp(-0.5 * z * z) / (200.0 * std::sqrt(2 * std::numbers::pi)) * 590.0 / steps;
  }
  const bool sizes_ok = *lo >= 50.0 && *hi <= 640.0 && std::abs(mean - expected) < 0.01 * expected;
  const double t = seconds_since(t0);
  const bool ok = worst_warp < 0.02 && worst_affine <= 1e-9 && counts_ok && sizes_ok && t < 120.0;
  return {ok, "warp " + fmt(worst_warp) + ", affine " + fmt(worst_affine) + ", count chi2 " + fmt(chi2) +
                  ", sizes [" + fmt(*lo) + ", " + fmt(*hi) + "] mean " + fmt(mean) + " vs " + fmt(expected) + ", " +
                  fmt(t, 3) + " s"};
}

// 5 --------------------------------------------------------------------------

Outcome learning() {
  const auto t0 = std::chrono::steady_clock::now();
  GeneratorConfig g;
  g.width = 64;
  g.height = 48;
  const auto assets = make_catalog(g);
  std::vector<Sample> samples;
  for (int i = 0; i < 1000; ++i) samples.push_back(generate_sample(g, *assets, 5, i));
  const SplitSpec split = make_split(1000, 100, 5);
  const double zero = evaluate(zero_predictor(), samples, split.validation).overall.epe;

  TrainConfig c;
  c.batch_size = 8;
  c.base_lr = 1e-4;
  c.total_iters = 2000;
  c.val_every = 500;
  ModelConfig ms;
  ms.variant = Variant::simple;
  ms.channel_scale = 8;
  FlowNet<float> simple(ms);
  TrainOutputs progress;
  progress.on_log = [](const LogRow& r) {
    std::cerr << "  simple iter " << r.iter << " loss " << r.train_loss << " val " << r.val_epe << "\n";
  };
  const double epe = train(simple, samples, split, c, progress).final_val_epe;
  const double ratio = epe / zero;

  // Warmup spans 10k reference iterations; scale 10 fits it into the run.
  TrainConfig cw = c;
  cw.warmup = true;
  cw.scale = 10;
  ModelConfig mc = ms;
  mc.variant = Variant::corr;
  FlowNet<float> corr(mc);
  bool finite = true;
  double corr_epe = 0.0;
  try {
    progress.on_log = [](const LogRow& r) {
      std::cerr << "  corr iter " << r.iter << " loss " << r.train_loss << " val " << r.val_epe << "\n";
    };
    corr_epe = train(corr, samples, split, cw, progress).final_val_epe;
  } catch (const DivergenceError& e) {
    finite = false;
    std::cerr << "  " << e.what() << "\n";
  }
  const double t = seconds_since(t0);
  const bool ok = ratio < 0.75 && finite && std::isfinite(corr_epe) && t < 1800.0;
  return {ok, "simple val " + fmt(epe) + " / zero " + fmt(zero) + " = " + fmt(ratio) + " (need < 0.75), corr " +
                  (finite ? "finite, val " + fmt(corr_epe) : std::string("diverged")) + ", " + fmt(t, 4) + " s"};
}

// 6 --------------------------------------------------------------------------

Outcome schedule() {
  TrainConfig c;
  bool ok = lr_schedule(0, c) == 1e-4 && lr_schedule(299999, c) == 1e-4 && lr_schedule(300000, c) == 5e-5 &&
            lr_schedule(399999, c) == 5e-5 && lr_schedule(400000, c) == 2.5e-5 && lr_schedule(500000, c) == 1.25e-5;
  c.warmup = true;
  c.total_iters = 600000;
  ok = ok && lr_schedule(0, c) == 1e-6 && lr_schedule(10000, c) == 1e-4 && lr_schedule(299999, c) == 1e-4;
  // Linear ramp in between, same arithmetic as written out by hand.
  for (int i = 0; i < 10000; i += 1250) ok = ok && lr_schedule(i, c) == 1e-6 + (i / 10000.0) * (1e-4 - 1e-6);
  return {ok, ok ? "all breakpoints exact" : "mismatch"};
}

// 7 --------------------------------------------------------------------------

Outcome augmentation() {
  GeneratorConfig cfg;
  cfg.width = 128;
  cfg.height = 96;
  cfg.sprite_count_min = cfg.sprite_count_max = 0;
  const auto assets = make_catalog(cfg);
  Rng rng(7);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int k = 0; k < 20; ++k) {
    SceneSpec scene;
    const Sample s = generate_sample(cfg, *assets, 7, k, &scene);
    const AugmentSpec spec = sample_augmentation(rng, AugmentRanges{}, cfg.width, cfg.height);
    const Sample out = apply_augmentation(s, spec);
    const Affine2 closed = compose(spec.a2(), compose(scene.bg_transform.matrix(), spec.a1().inverse()));
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        const std::size_t i = out.flow.index(x, y);
        if (!out.flow.valid[i]) continue;
        const Point2 q = closed.apply({double(x), double(y)});
        worst = std::max({worst, std::abs(out.flow.u[i] - (q.x - x)), std::abs(out.flow.v[i] - (q.y - y))});
        ++checked;
      }
  }

  const AugmentRanges r;
  const double t = r.translate * cfg.width;
  bool ranges_ok = true;
  for (int i = 0; i < 100000; ++i) {
    const AugmentSpec s = sample_augmentation(rng, r, cfg.width, cfg.height);
    ranges_ok = ranges_ok && std::abs(s.strong.rotation_deg) <= 17.0 && s.strong.zoom >= 0.9 && s.strong.zoom <= 2.0;
    ranges_ok = ranges_ok && std::abs(s.strong.tx) <= t && std::abs(s.strong.ty) <= t;
    ranges_ok = ranges_ok && s.noise_sigma[0] >= 0.0 && s.noise_sigma[0] <= 0.04 && s.noise_sigma[1] >= 0.0 &&
                s.noise_sigma[1] <= 0.04;
    ranges_ok = ranges_ok && s.contrast >= -0.8 && s.contrast <= 0.4 && s.gamma >= 0.7 && s.gamma <= 1.5;
    for (double m : s.color) ranges_ok = ranges_ok && m >= 0.5 && m <= 2.0;
  }
  const bool ok = checked > 1000 && worst < 1e-6 && ranges_ok;
  return {ok, std::to_string(checked) + " pixels, max flow error " + fmt(worst) + ", ranges " +
                  (ranges_ok ? "respected" : "violated") + " over 1e5 draws"};
}

// 8 --------------------------------------------------------------------------

double mean_epe(const FlowField& a, const FlowField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::hypot(a.u[i] - b.u[i], a.v[i] - b.v[i]);
  return s / static_cast<double>(a.size());
}

Outcome variational() {
  const auto t0 = std::chrono::steady_clock::now();
  GeneratorConfig cfg;
  cfg.width = 128;
  cfg.height = 96;
  cfg.sprite_count_min = cfg.sprite_count_max = 0;
  const auto assets = make_catalog(cfg);
  Rng rng(8);
  VarParams none;
  none.coarse_iters = none.fullres_iters = 0;
  double before = 0.0, after = 0.0;
  bool monotone = true;
  const int n = 20;
  for (int k = 0; k < n; ++k) {
    const Sample s = generate_sample(cfg, *assets, 8, k);
    // The initialization lives on the quarter grid; sigma 0.25 there is 1 px at full resolution.
    FlowField init = to_quarter(s.flow);
    for (std::size_t i = 0; i < init.size(); ++i) {
      init.u[i] += rng.normal(0.0, 0.25);
      init.v[i] += rng.normal(0.0, 0.25);
    }
    before += mean_epe(refine(init, s.img1, s.img2, none), s.flow);
    std::vector<LevelTrace> trace;
    after += mean_epe(refine(init, s.img1, s.img2, VarParams{}, &trace), s.flow);
    for (const auto& level : trace)
      for (std::size_t j = 1; j < level.energies.size(); ++j)
        monotone = monotone && level.energies[j] <= level.energies[j - 1];
  }
  const double t = seconds_since(t0);
  const bool ok = after < before && monotone && t < 300.0;
  return {ok, "mean EPE " + fmt(before / n) + " -> " + fmt(after / n) + ", energy " +
                  (monotone ? "non-increasing" : "increased") + ", " + fmt(t, 3) + " s"};
}

// 9 --------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

fs::path fresh(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("deskflow_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Outcome determinism() {
  GeneratorConfig g;
  g.width = 64;
  g.height = 48;
  const std::string text = "width = 64\nheight = 48\n";
  std::map<std::string, std::string> gen[2], trained[2];
  std::string report[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path data = fresh("data" + std::to_string(run));
    generate_dataset(g, text, 9, 12, data);
    gen[run] = tree(data);

    const std::vector<Sample> samples = load_dataset(data);
    const SplitSpec split = make_split(12, 3, 9);
    TrainConfig c;
    c.total_iters = 10;
    c.batch_size = 4;
    c.val_every = 5;
    c.checkpoint_every = 5;
    TrainOutputs out;
    out.dir = fresh("train" + std::to_string(run));
    ModelConfig m;
    m.channel_scale = 16;
    FlowNet<float> net(m);
    train(net, samples, split, c, out);
    trained[run] = tree(*out.dir);

    const EvalResult r = evaluate_model(net, samples, split.validation, 1.0);
    report[run] = format_report({{"FlowNetS", r.overall}}) + format_sample_table(r);
  }
  const bool g_ok = gen[0] == gen[1] && !gen[0].empty();
  const bool t_ok = trained[0] == trained[1] && !trained[0].empty();
  const bool e_ok = report[0] == report[1];
  return {g_ok && t_ok && e_ok, "generate " + std::to_string(gen[0].size()) + " files " + (g_ok ? "identical" : "differ") +
                                    ", train " + std::to_string(trained[0].size()) + " files " +
                                    (t_ok ? "identical" : "differ") + ", eval " + (e_ok ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient check suite", gradcheck},
      {"correlation oracle", correlation},
      {".flo round trip", flo_roundtrip},
      {"generator validity", generator},
      {"learning smoke test", learning},
      {"schedule conformance", schedule},
      {"augmentation exactness", augmentation},
      {"variational refinement", variational},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "[" << (o.pass ? "PASS" : "FAIL") << "] " << id << " " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failed ? 1 : 0;
}
