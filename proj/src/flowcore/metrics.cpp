#include <algorithm>
#include <cmath>
#include <numbers>

#include "deskflow/errors.hpp"
#include "deskflow/flow.hpp"

namespace deskflow {

double angular_error_deg(double u1, double v1, double u2, double v2) {
  const double dot = u1 * u2 + v1 * v2 + 1.0;
  const double norm = std::sqrt(u1 * u1 + v1 * v1 + 1.0) * std::sqrt(u2 * u2 + v2 * v2 + 1.0);
  const double cosine = std::clamp(dot / norm, -1.0, 1.0);
  return std::acos(cosine) * 180.0 / std::numbers::pi;
}

void MetricsAccumulator::add(const FlowField& pred, const FlowField& gt) {
  pred.check_well_formed();
  gt.check_well_formed();
  if (!pred.same_size(gt)) {
    throw ShapeError("metrics: prediction " + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                     " vs ground truth " + std::to_string(gt.width) + "x" + std::to_string(gt.height));
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt.valid[i]) continue;
    const double du = pred.u[i] - gt.u[i];
    const double dv = pred.v[i] - gt.v[i];
    const double epe = std::sqrt(du * du + dv * dv);
    epe_sum += epe;
    aae_sum += angular_error_deg(pred.u[i], pred.v[i], gt.u[i], gt.v[i]);
    ++count;
    if (std::sqrt(gt.u[i] * gt.u[i] + gt.v[i] * gt.v[i]) >= 40.0) {
      s40_sum += epe;
      ++s40_count;
    }
  }
}

MetricsReport MetricsAccumulator::report() const {
  if (count == 0) throw Error("metrics: no valid ground-truth pixels to evaluate");
  MetricsReport r;
  r.epe = epe_sum / static_cast<double>(count);
  r.aae = aae_sum / static_cast<double>(count);
  if (s40_count > 0) r.epe_s40plus = s40_sum / static_cast<double>(s40_count);
  r.n_evaluated = count;
  return r;
}

MetricsReport compute_metrics(const FlowField& pred, const FlowField& gt) {
  MetricsAccumulator acc;
  acc.add(pred, gt);
  return acc.report();
}

}  // namespace deskflow
