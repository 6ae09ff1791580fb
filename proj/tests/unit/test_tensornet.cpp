#include <cmath>
#include <cstring>

#include "deskflow/adam.hpp"
#include "deskflow/checkpoint.hpp"
#include "deskflow/errors.hpp"
#include "deskflow/gradcheck.hpp"
#include "deskflow/gradcheck_suite.hpp"
#include "deskflow/ops.hpp"
#include "doctest.h"

using namespace deskflow;
using namespace deskflow::nn;

namespace {

template <typename T = double>
Tensor<T> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(s);
  for (T& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

/// Keeps inputs at least `gap` away from zero so relu kinks stay out of the
/// finite-difference stencil.
Tensor<double> away_from_zero(Tensor<double> t, double gap = 0.05) {
  for (double& v : t.values())
    if (std::abs(v) < gap) v = v < 0 ? -gap : gap;
  return t;
}

/// Random linear probe of an op's output turns any op into a scalar.
Var<double> probe(Tape<double>& tape, const Var<double>& out, std::uint64_t seed) {
  Rng rng(seed);
  return dot_constant(tape, out, random_tensor(out->value.shape(), rng));
}

const Shape kShapes[] = {{1, 2, 6, 6}, {2, 3, 5, 7}, {1, 1, 8, 4}, {2, 2, 4, 4}, {1, 4, 6, 10}};

}  // namespace

TEST_CASE("conv2d forward contracts") {
  Tape<float> tape;
  Rng rng(1);
  auto x = make_leaf(random_tensor<float>({1, 3, 5, 5}, rng), false);
  Tensor<float> eye({3, 3, 1, 1});
  for (int c = 0; c < 3; ++c) eye.at(c, c, 0, 0) = 1.0f;
  auto y = conv2d(tape, x, make_leaf(eye, false), Var<float>{}, 1, 0);
  CHECK(y->value.storage() == x->value.storage());

  auto x8 = make_leaf(Tensor<float>({1, 2, 8, 8}, 1.0f), false);
  auto w = make_leaf(Tensor<float>({5, 2, 3, 3}, 0.1f), false);
  auto y8 = conv2d(tape, x8, w, Var<float>{}, 2, 1);
  CHECK(y8->value.shape() == Shape{1, 5, 4, 4});

  CHECK_THROWS_AS(conv2d(tape, x8, make_leaf(Tensor<float>({5, 3, 3, 3}), false), Var<float>{}, 2, 1), ShapeError);
}

TEST_CASE("conv2d gradient matches central differences") {
  Rng rng(2);
  std::vector<Tensor<double>> in = {random_tensor({1, 2, 6, 6}, rng), random_tensor({3, 2, 3, 3}, rng),
                                    random_tensor({1, 3, 1, 1}, rng)};
  auto fn = [](Tape<double>& t, const std::vector<Var<double>>& v) {
    return probe(t, conv2d(t, v[0], v[1], v[2], 1, 1), 7);
  };
  CHECK(gradcheck(fn, in).max_rel_error < 1e-6);

  for (const Shape& s : kShapes) {
    std::vector<Tensor<double>> in2 = {random_tensor(s, rng), random_tensor({2, s.c, 3, 3}, rng),
                                       random_tensor({1, 2, 1, 1}, rng)};
    auto strided = [](Tape<double>& t, const std::vector<Var<double>>& v) {
      return probe(t, conv2d(t, v[0], v[1], v[2], 2, 1), 8);
    };
    CHECK(gradcheck(strided, in2).max_rel_error < 1e-4);
  }
}

TEST_CASE("upconv2d doubles and stamps its kernel") {
  Tape<double> tape;
  Rng rng(3);
  auto x = make_leaf(random_tensor({1, 1, 4, 4}, rng), false);
  auto w = make_leaf(random_tensor({1, 3, 4, 4}, rng), false);
  CHECK(upconv2d(tape, x, w, Var<double>{})->value.shape() == Shape{1, 3, 8, 8});

  // One-hot at (1, 2): output (2*1 - 1 + ky, 2*2 - 1 + kx) receives kernel (ky, kx).
  Tensor<double> onehot({1, 1, 4, 4});
  onehot.at(0, 0, 1, 2) = 1.0;
  Tensor<double> kernel({1, 1, 4, 4});
  for (int i = 0; i < 16; ++i) kernel.data()[i] = i + 1;
  auto y = upconv2d(tape, make_leaf(onehot, false), make_leaf(kernel, false), Var<double>{});
  for (int oy = 0; oy < 8; ++oy)
    for (int ox = 0; ox < 8; ++ox) {
      const int ky = oy - 1, kx = ox - 3;
      const double expected = (ky >= 0 && ky < 4 && kx >= 0 && kx < 4) ? kernel.at(0, 0, ky, kx) : 0.0;
      CHECK(y->value.at(0, 0, oy, ox) == expected);
    }
}

TEST_CASE("upconv2d equals unpooling followed by convolution") {
  Rng rng(4);
  for (const Shape& s : kShapes) {
    Tape<double> tape;
    const int cout = 3;
    Tensor<double> x = random_tensor(s, rng);
    Tensor<double> w = random_tensor({s.c, cout, 4, 4}, rng);
    auto y = upconv2d(tape, make_leaf(x, false), make_leaf(w, false), Var<double>{});

    // Reference: zero-insertion unpool, then cross-correlation with the
    // spatially flipped, channel-transposed kernel and padding 2.
    Tensor<double> flipped({cout, s.c, 4, 4});
    for (int ci = 0; ci < s.c; ++ci)
      for (int co = 0; co < cout; ++co)
        for (int ky = 0; ky < 4; ++ky)
          for (int kx = 0; kx < 4; ++kx) flipped.at(co, ci, ky, kx) = w.at(ci, co, 3 - ky, 3 - kx);
    Tensor<double> up = unpool_zero(x);
    for (int n = 0; n < s.n; ++n)
      for (int co = 0; co < cout; ++co)
        for (int oy = 0; oy < 2 * s.h; ++oy)
          for (int ox = 0; ox < 2 * s.w; ++ox) {
            double sum = 0.0;
            for (int ci = 0; ci < s.c; ++ci)
              for (int ky = 0; ky < 4; ++ky)
                for (int kx = 0; kx < 4; ++kx) {
                  const int iy = oy - 2 + ky, ix = ox - 2 + kx;
                  if (iy < 0 || ix < 0 || iy >= 2 * s.h || ix >= 2 * s.w) continue;
                  sum += up.at(n, ci, iy, ix) * flipped.at(co, ci, ky, kx);
                }
            CHECK(std::abs(y->value.at(n, co, oy, ox) - sum) < 1e-12);
          }
  }
}

TEST_CASE("upconv2d gradient matches central differences") {
  Rng rng(5);
  for (const Shape& s : kShapes) {
    std::vector<Tensor<double>> in = {random_tensor(s, rng), random_tensor({s.c, 2, 4, 4}, rng),
                                      random_tensor({1, 2, 1, 1}, rng)};
    auto fn = [](Tape<double>& t, const std::vector<Var<double>>& v) {
      return probe(t, upconv2d(t, v[0], v[1], v[2]), 9);
    };
    CHECK(gradcheck(fn, in).max_rel_error < 1e-6);
  }
}

TEST_CASE("relu, concat, resize, downsample") {
  Tape<double> tape;
  auto x = make_leaf(Tensor<double>({1, 1, 1, 2}, std::vector<double>{-1.0, 2.0}), true);
  auto y = relu(tape, x);
  CHECK(y->value.data()[0] == 0.0);
  CHECK(y->value.data()[1] == 2.0);
  tape.backward(y, Tensor<double>({1, 1, 1, 2}, 1.0));
  CHECK(x->grad.data()[0] == 0.0);
  CHECK(x->grad.data()[1] == 1.0);

  auto a = make_leaf(Tensor<double>({1, 3, 4, 5}), false);
  auto b = make_leaf(Tensor<double>({1, 5, 4, 5}), false);
  CHECK(concat_channels(tape, {a, b})->value.shape() == Shape{1, 8, 4, 5});
  CHECK_THROWS_AS(concat_channels(tape, {a, make_leaf(Tensor<double>({1, 5, 4, 6}), false)}), ShapeError);

  auto c = make_leaf(Tensor<double>({2, 2, 3, 5}, 0.375), false);
  auto back = avg_downsample(tape, bilinear_resize(tape, c, 2), 2);
  CHECK(back->value.storage() == c->value.storage());
  CHECK_THROWS_AS(bilinear_resize(tape, c, 0), ShapeError);
  CHECK_THROWS_AS(avg_downsample(tape, c, 2), ShapeError);
}

TEST_CASE("structural ops pass gradient checks on several shapes") {
  Rng rng(6);
  for (const Shape& s : kShapes) {
    std::vector<Tensor<double>> in = {away_from_zero(random_tensor(s, rng)), random_tensor(s, rng)};
    auto fn = [](Tape<double>& t, const std::vector<Var<double>>& v) {
      auto r = relu(t, v[0], 0.1);
      auto cat = concat_channels(t, {r, v[1]});
      auto up = bilinear_resize(t, cat, 2);
      auto down = avg_downsample(t, up, 2);
      auto sum = add(t, scale(t, down, 0.5), cat);
      auto odd = resize_bilinear(t, sum, 5, 3);
      return weighted_sum(t, {probe(t, odd, 10), probe(t, sum, 11)}, {0.7, -1.3});
    };
    CHECK(gradcheck(fn, in).max_rel_error < 1e-4);
  }
}

TEST_CASE("masked_epe value and gradient") {
  Rng rng(7);
  for (const Shape& base : kShapes) {
    const Shape s{base.n, 2, base.h, base.w};
    Tensor<double> target = random_tensor(s, rng);
    Tensor<double> mask({s.n, 1, s.h, s.w});
    for (double& m : mask.values()) m = rng.bernoulli(0.7) ? 1.0 : 0.0;
    mask.data()[0] = 1.0;
    auto fn = [&](Tape<double>& t, const std::vector<Var<double>>& v) { return masked_epe(t, v[0], target, mask); };
    CHECK(gradcheck(fn, {random_tensor(s, rng)}).max_rel_error < 1e-4);
  }

  Tape<double> tape;
  Tensor<double> gt({1, 2, 1, 2}, std::vector<double>{3.0, 0.0, 4.0, 0.0});
  Tensor<double> mask({1, 1, 1, 2}, 1.0);
  auto p = make_leaf(Tensor<double>({1, 2, 1, 2}), true);
  auto loss = masked_epe(tape, p, gt, mask);
  CHECK(loss->value.data()[0] == doctest::Approx(2.5));

  // Zero error: gradient is defined as zero rather than NaN.
  Tape<double> tape2;
  auto q = make_leaf(gt, true);
  tape2.backward(masked_epe(tape2, q, gt, mask));
  for (double g : q->grad.values()) CHECK(g == 0.0);
}

TEST_CASE("tape is linear in the loss") {
  Rng rng(8);
  Tensor<double> xv = random_tensor({1, 2, 6, 6}, rng);
  Tensor<double> wv = random_tensor({3, 2, 3, 3}, rng);
  auto grads = [&](int which) {
    Tape<double> tape;
    auto x = make_leaf(xv, true);
    auto w = make_leaf(wv, true);
    auto y = relu(tape, conv2d(tape, x, w, Var<double>{}, 1, 1));
    auto l1 = probe(tape, y, 20);
    auto l2 = probe(tape, y, 21);
    if (which == 0) tape.backward(weighted_sum(tape, {l1, l2}, {1.0, 1.0}));
    else tape.backward(which == 1 ? l1 : l2);
    return w->grad;
  };
  Tensor<double> both = grads(0), g1 = grads(1), g2 = grads(2);
  for (std::size_t i = 0; i < both.size(); ++i)
    CHECK(both.data()[i] == doctest::Approx(g1.data()[i] + g2.data()[i]).epsilon(1e-12));
}

TEST_CASE("forward is deterministic") {
  Rng rng(9);
  Tensor<float> xv = random_tensor<float>({2, 3, 16, 16}, rng);
  Tensor<float> wv = random_tensor<float>({8, 3, 5, 5}, rng);
  auto run = [&] {
    Tape<float> tape;
    auto y = conv2d(tape, make_leaf(xv, false), make_leaf(wv, false), Var<float>{}, 2, 2);
    return y->value;
  };
  Tensor<float> a = run(), b = run();
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor<double> p({1, 1, 1, 3}, 0.5);
    Tensor<double> g({1, 1, 1, 3}, 0.0);
    AdamState<double> st;
    adam_step<double>({&p}, {&g}, st, 0.1);
    CHECK(st.t == 1);
    for (double v : p.values()) CHECK(v == 0.5);
  }
  SUBCASE("first step of a constant gradient moves by lr") {
    // m1 = 0.1, v1 = 0.001; bias-corrected ratio = 1 up to eps.
    Tensor<double> p({1, 1, 1, 1}, 0.0);
    Tensor<double> g({1, 1, 1, 1}, 1.0);
    AdamState<double> st;
    adam_step<double>({&p}, {&g}, st, 0.1);
    CHECK(p.data()[0] == doctest::Approx(-0.1).epsilon(1e-6));
  }
  SUBCASE("minimizes a quadratic") {
    Tensor<double> x({1, 1, 1, 1}, 1.0);
    AdamState<double> st;
    for (int i = 0; i < 500; ++i) {
      Tensor<double> g({1, 1, 1, 1}, 2.0 * x.data()[0]);
      adam_step<double>({&x}, {&g}, st, 0.05);
    }
    CHECK(std::abs(x.data()[0]) < 1e-2);
    CHECK(st.t == 500);
  }
}

TEST_CASE("checkpoint round trip and validation") {
  Rng rng(10);
  ParamSet<float> params;
  params.add("conv1.w", random_tensor<float>({4, 2, 3, 3}, rng));
  params.add("conv1.b", random_tensor<float>({1, 4, 1, 1}, rng));
  const std::string bytes = checkpoint_bytes(params, "00ff");
  Checkpoint ck = parse_checkpoint(bytes);
  CHECK(ck.config_hash == "00ff");
  REQUIRE(ck.tensors.size() == 2);
  CHECK(ck.tensors[0].first == "conv1.w");
  CHECK(ck.tensors[0].second.storage() == params.get("conv1.w")->value.storage());

  ParamSet<float> other;
  other.add("conv1.w", Tensor<float>({4, 2, 3, 3}));
  other.add("conv1.b", Tensor<float>({1, 4, 1, 1}));
  assign_checkpoint(ck, other);
  CHECK(other.get("conv1.b")->value.storage() == params.get("conv1.b")->value.storage());

  ParamSet<float> wrong;
  wrong.add("conv1.w", Tensor<float>({4, 2, 5, 5}));
  wrong.add("conv1.b", Tensor<float>({1, 4, 1, 1}));
  CHECK_THROWS_AS(assign_checkpoint(ck, wrong), ShapeError);
  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 3)), LengthError);
  CHECK_THROWS_AS(parse_checkpoint("garbage"), FormatError);
  CHECK_THROWS_AS(params.add("conv1.w", Tensor<float>({1, 1, 1, 1})), Error);
}

TEST_CASE("gradcheck suite covers every op") {
  const auto rows = run_gradcheck_suite(3);
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) {
    CHECK(r.cases == 5);
    CHECK(r.passed);
  }
  CHECK(format_gradcheck_table(rows).find("all ops PASS") != std::string::npos);
}
