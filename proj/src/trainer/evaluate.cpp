#include <cstdio>
#include <sstream>

#include "deskflow/trainer.hpp"

namespace deskflow {

using nn::Shape;
using nn::Tensor;

namespace {

std::vector<std::int64_t> all_or(const std::vector<std::int64_t>& indices, std::size_t n) {
  if (!indices.empty()) return indices;
  std::vector<std::int64_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<std::int64_t>(i);
  return all;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

Predictor model_predictor(const FlowNet<float>& net, double test_scale) {
  return [&net, test_scale](const Sample& s) { return predict(net, s.img1, s.img2, test_scale); };
}

Predictor zero_predictor() {
  return [](const Sample& s) { return FlowField(s.width(), s.height()); };
}

EvalResult evaluate(const Predictor& predictor, const std::vector<Sample>& samples,
                    const std::vector<std::int64_t>& indices, const Refiner& refine) {
  EvalResult result;
  MetricsAccumulator total;
  for (std::int64_t i : all_or(indices, samples.size())) {
    const Sample& s = samples.at(i);
    FlowField pred = predictor(s);
    if (refine) pred = refine(s, pred);
    total.add(pred, s.flow);
    result.samples.push_back({i, compute_metrics(pred, s.flow)});
  }
  result.overall = total.report();
  return result;
}

EvalResult evaluate_model(const FlowNet<float>& net, const std::vector<Sample>& samples,
                          const std::vector<std::int64_t>& indices, double test_scale, int batch) {
  const std::vector<std::int64_t> list = all_or(indices, samples.size());
  EvalResult result;
  MetricsAccumulator total;
  std::size_t start = 0;
  while (start < list.size()) {
    // A batch holds up to `batch` consecutive samples of one size.
    const Sample& first = samples.at(list[start]);
    const int h = first.height(), w = first.width();
    std::size_t stop = start;
    while (stop < list.size() && stop - start < static_cast<std::size_t>(batch) &&
           samples.at(list[stop]).height() == h && samples.at(list[stop]).width() == w)
      ++stop;
    const int m = static_cast<int>(stop - start);
    Tensor<float> a(Shape{m, 3, h, w}), b(Shape{m, 3, h, w});
    for (int k = 0; k < m; ++k) {
      store_image(samples.at(list[start + k]).img1, a, k);
      store_image(samples.at(list[start + k]).img2, b, k);
    }
    Tensor<float> flow = predict_batch(net, a, b, test_scale);
    for (int k = 0; k < m; ++k) {
      const Sample& s = samples.at(list[start + k]);
      FlowField pred(w, h);
      for (std::size_t i = 0; i < pred.u.size(); ++i) {
        pred.u[i] = flow.plane(k, 0)[i];
        pred.v[i] = flow.plane(k, 1)[i];
      }
      total.add(pred, s.flow);
      result.samples.push_back({list[start + k], compute_metrics(pred, s.flow)});
    }
    start = stop;
  }
  result.overall = total.report();
  return result;
}

std::string format_report(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "method\tEPE\tAAE\tEPE_s40+\tpixels\n";
  for (const auto& r : rows)
    out << r.name << '\t' << fixed(r.metrics.epe) << '\t' << fixed(r.metrics.aae) << '\t'
        << (r.metrics.epe_s40plus ? fixed(*r.metrics.epe_s40plus) : std::string("-")) << '\t' << r.metrics.n_evaluated
        << '\n';
  return out.str();
}

std::string format_sample_table(const EvalResult& result) {
  std::ostringstream out;
  out << "index\tEPE\tAAE\tpixels\n";
  for (const auto& r : result.samples)
    out << r.index << '\t' << fixed(r.metrics.epe, 6) << '\t' << fixed(r.metrics.aae, 6) << '\t' << r.metrics.n_evaluated
        << '\n';
  return out.str();
}

std::string format_log(const std::vector<LogRow>& rows) {
  std::ostringstream out;
  out << "iter\tlr\ttrain_loss\tval_epe\n";
  for (const auto& r : rows)
    out << r.iter << '\t' << format_double(r.lr) << '\t' << format_double(r.train_loss) << '\t'
        << format_double(r.val_epe) << '\n';
  return out.str();
}

}  // namespace deskflow
