#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "deskflow/adam.hpp"
#include "deskflow/augment.hpp"
#include "deskflow/errors.hpp"
#include "deskflow/model.hpp"

namespace deskflow {

/// Raised when the loss or a gradient stops being finite.
struct DivergenceError : Error {
  using Error::Error;
};

/// Iteration thresholds are in paper iterations and divided by `scale`.
struct TrainConfig {
  int batch_size = 8;
  double base_lr = 1e-4;
  double step_start = 300000;
  double step_every = 100000;
  double step_factor = 0.5;
  bool warmup = false;
  double warmup_start_lr = 1e-6;
  double warmup_end_lr = 1e-4;
  double warmup_span = 10000;
  std::int64_t total_iters = 2000;
  double scale = 1.0;
  double finetune_lr = 1e-6;
  std::int64_t finetune_iters = 2000;
  std::uint64_t seed = 1;
  /// Desk iterations between validation runs / checkpoints.
  std::int64_t val_every = 500;
  std::int64_t checkpoint_every = 2000;
  /// Validation samples; negative keeps the published 640 / 22,872 ratio.
  std::int64_t val_count = -1;
  bool augment = true;
  AugmentRanges ranges;
  /// Exclude occluded pixels from the loss (flow is defined there, so the default keeps them).
  bool mask_occluded = false;
  /// Scan every forward value and gradient, not just the loss.
  bool check_finite = false;
  double val_test_scale = 1.0;

  void validate() const;
  /// Reads `train.*` and `augment.*` keys.
  static TrainConfig from_config(KeyValues& kv);
};

/// Learning rate at a desk iteration.
double lr_schedule(std::int64_t iter, const TrainConfig& config);

struct SplitSpec {
  std::vector<std::int64_t> train;
  std::vector<std::int64_t> validation;
  std::uint64_t seed = 0;
};

/// Seeded random partition; both lists sorted.
SplitSpec make_split(std::int64_t n, std::int64_t val_count, std::uint64_t seed);
/// Validation size used when TrainConfig::val_count is negative.
std::int64_t default_val_count(std::int64_t n);

struct LogRow {
  std::int64_t iter = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_epe = 0.0;
};

struct TrainResult {
  std::vector<LogRow> log;
  std::vector<double> losses;  // per iteration
  double final_val_epe = 0.0;
};

struct TrainOutputs {
  /// Checkpoints and metrics.tsv go here when set.
  std::optional<std::filesystem::path> dir;
  std::string checkpoint_prefix = "checkpoint";
  std::string metrics_name = "metrics.tsv";
  /// Called after every log row (progress reporting).
  std::function<void(const LogRow&)> on_log;
};

/// Trains in place on `train` indices, validating on `validation` indices.
/// lr_override replaces the schedule with a constant (fine-tuning).
TrainResult train(FlowNet<float>& net, const std::vector<Sample>& samples, const SplitSpec& split,
                  const TrainConfig& config, const TrainOutputs& outputs = {},
                  std::optional<double> lr_override = std::nullopt);

/// Index of the smallest value (first on ties).
std::size_t argmin_index(const std::vector<double>& values);

struct FinetuneResult {
  /// Validation EPE before fine-tuning; iteration 0 is a candidate too.
  double start_val_epe = 0.0;
  std::vector<LogRow> phase1;
  std::int64_t chosen_iters = 0;
  TrainResult phase2;
};

/// Phase 1 trains on the split's train part at finetune_lr for finetune_iters,
/// measuring validation EPE every val_every iterations; phase 2 restarts from
/// the starting parameters and trains on all samples for the iteration count
/// at the best measurement (0 when no step beats the start). `net` ends
/// holding the phase 2 parameters.
FinetuneResult finetune(FlowNet<float>& net, const std::vector<Sample>& samples, const SplitSpec& split,
                        const TrainConfig& config, const TrainOutputs& outputs = {});

/// Maps a sample to a flow prediction.
using Predictor = std::function<FlowField(const Sample&)>;
/// Post-processes a prediction (the "+v" step).
using Refiner = std::function<FlowField(const Sample&, const FlowField&)>;

Predictor model_predictor(const FlowNet<float>& net, double test_scale);
Predictor zero_predictor();

struct SampleRow {
  std::int64_t index = 0;
  MetricsReport metrics;
};

struct EvalResult {
  MetricsReport overall;
  std::vector<SampleRow> samples;
};

/// Pixel-weighted metrics over the listed samples (all samples if empty).
EvalResult evaluate(const Predictor& predictor, const std::vector<Sample>& samples,
                    const std::vector<std::int64_t>& indices = {}, const Refiner& refine = {});

/// Batched model evaluation (same numbers as evaluate(model_predictor(...))).
EvalResult evaluate_model(const FlowNet<float>& net, const std::vector<Sample>& samples,
                          const std::vector<std::int64_t>& indices, double test_scale, int batch = 8);

struct ReportRow {
  std::string name;  // e.g. "FlowNetS", "FlowNetS+v", "FlowNetS+ft", "FlowNetS+ft+v"
  MetricsReport metrics;
};

/// Text table: name, EPE, AAE, s40+ EPE, pixels.
std::string format_report(const std::vector<ReportRow>& rows);
std::string format_sample_table(const EvalResult& result);
std::string format_log(const std::vector<LogRow>& rows);

}  // namespace deskflow
