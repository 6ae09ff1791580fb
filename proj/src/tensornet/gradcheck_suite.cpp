#include "deskflow/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "deskflow/correlation.hpp"
#include "deskflow/gradcheck.hpp"
#include "deskflow/ops.hpp"
#include "deskflow/rng.hpp"

namespace deskflow {

using nn::Shape;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

Tensor<double> random_tensor(Shape s, Rng& rng) {
  Tensor<double> t(s);
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

int pick(Rng& rng, int lo, int hi) { return static_cast<int>(rng.uniform_int(lo, hi)); }

Var<double> probe(Tape<double>& tape, const Var<double>& out, std::uint64_t seed) {
  Rng rng(seed);
  return nn::dot_constant(tape, out, random_tensor(out->value.shape(), rng));
}

struct Case {
  std::vector<Tensor<double>> inputs;
  nn::ScalarFn fn;
};

using CaseMaker = std::function<Case(Rng&, std::uint64_t)>;

Case conv_case(Rng& rng, std::uint64_t seed) {
  const int n = pick(rng, 1, 2), c = pick(rng, 1, 4), h = pick(rng, 4, 9), w = pick(rng, 4, 9);
  const int cout = pick(rng, 1, 3), k = 2 * pick(rng, 0, 2) + 1, stride = pick(rng, 1, 2);
  Case out;
  out.inputs = {random_tensor({n, c, h, w}, rng), random_tensor({cout, c, k, k}, rng), random_tensor({1, cout, 1, 1}, rng)};
  out.fn = [=](Tape<double>& t, const std::vector<Var<double>>& v) {
    return probe(t, nn::conv2d(t, v[0], v[1], v[2], stride, k / 2), seed);
  };
  return out;
}

Case upconv_case(Rng& rng, std::uint64_t seed) {
  const int n = pick(rng, 1, 2), c = pick(rng, 1, 3), h = pick(rng, 2, 5), w = pick(rng, 2, 5), cout = pick(rng, 1, 3);
  Case out;
  out.inputs = {random_tensor({n, c, h, w}, rng), random_tensor({c, cout, 4, 4}, rng), random_tensor({1, cout, 1, 1}, rng)};
  out.fn = [=](Tape<double>& t, const std::vector<Var<double>>& v) {
    return probe(t, nn::upconv2d(t, v[0], v[1], v[2]), seed);
  };
  return out;
}

Case relu_case(Rng& rng, std::uint64_t seed) {
  Tensor<double> x = random_tensor({pick(rng, 1, 2), pick(rng, 1, 4), pick(rng, 2, 7), pick(rng, 2, 7)}, rng);
  // Keep the kink outside the difference stencil.
  for (double& v : x.values())
    if (std::abs(v) < 0.05) v = v < 0 ? -0.05 : 0.05;
  const double slope = rng.uniform() < 0.5 ? 0.0 : 0.1;
  Case out;
  out.inputs = {x};
  out.fn = [=](Tape<double>& t, const std::vector<Var<double>>& v) { return probe(t, nn::relu(t, v[0], slope), seed); };
  return out;
}

Case concat_case(Rng& rng, std::uint64_t seed) {
  const int n = pick(rng, 1, 2), h = pick(rng, 2, 6), w = pick(rng, 2, 6), parts = pick(rng, 2, 3);
  Case out;
  for (int i = 0; i < parts; ++i) out.inputs.push_back(random_tensor({n, pick(rng, 1, 3), h, w}, rng));
  out.fn = [=](Tape<double>& t, const std::vector<Var<double>>& v) { return probe(t, nn::concat_channels(t, v), seed); };
  return out;
}

Case resize_case(Rng& rng, std::uint64_t seed) {
  const int h = pick(rng, 2, 7), w = pick(rng, 2, 7), oh = pick(rng, 2, 12), ow = pick(rng, 2, 12);
  Case out;
  out.inputs = {random_tensor({pick(rng, 1, 2), pick(rng, 1, 3), h, w}, rng)};
  out.fn = [=](Tape<double>& t, const std::vector<Var<double>>& v) {
    return probe(t, nn::resize_bilinear(t, v[0], oh, ow), seed);
  };
  return out;
}

Case corr_case(Rng& rng, std::uint64_t seed) {
  const int n = pick(rng, 1, 2), c = pick(rng, 1, 3), h = pick(rng, 4, 8), w = pick(rng, 4, 8);
  nn::CorrParams p{pick(rng, 0, 1), pick(rng, 1, 3), pick(rng, 1, 2), pick(rng, 1, 2)};
  Case out;
  out.inputs = {random_tensor({n, c, h, w}, rng), random_tensor({n, c, h, w}, rng)};
  out.fn = [=](Tape<double>& t, const std::vector<Var<double>>& v) { return probe(t, nn::correlate(t, v[0], v[1], p), seed); };
  return out;
}

}  // namespace

std::vector<GradcheckRow> run_gradcheck_suite(std::uint64_t seed, int cases, double eps, double tolerance) {
  const std::vector<std::pair<std::string, CaseMaker>> ops = {
      {"conv2d", conv_case},   {"upconv2d", upconv_case}, {"relu", relu_case},
      {"concat", concat_case}, {"resize", resize_case},   {"correlation", corr_case},
  };
  std::vector<GradcheckRow> rows;
  for (std::size_t o = 0; o < ops.size(); ++o) {
    Rng rng = Rng::substream(seed, {static_cast<std::uint64_t>(o)});
    GradcheckRow row;
    row.op = ops[o].first;
    for (int i = 0; i < cases; ++i) {
      const Case c = ops[o].second(rng, seed * 1000 + o * 100 + static_cast<std::uint64_t>(i));
      const nn::GradcheckResult r = nn::gradcheck(c.fn, c.inputs, eps);
      row.max_rel_error = std::max(row.max_rel_error, r.max_rel_error);
      ++row.cases;
    }
    row.passed = row.max_rel_error < tolerance;
    rows.push_back(row);
  }
  return rows;
}

std::string format_gradcheck_table(const std::vector<GradcheckRow>& rows) {
  std::string out = "op           cases  max_rel_error  result\n";
  bool all = true;
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-12s %5d  %13.3e  %s\n", r.op.c_str(), r.cases, r.max_rel_error,
                  r.passed ? "PASS" : "FAIL");
    out += line;
    all = all && r.passed;
  }
  out += all ? "all ops PASS\n" : "some ops FAIL\n";
  return out;
}

}  // namespace deskflow
