#include <cmath>

#include "deskflow/trainer.hpp"

namespace deskflow {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(base_lr > 0.0) || !(finetune_lr > 0.0) || !(warmup_start_lr > 0.0) || !(warmup_end_lr > 0.0))
    throw ConfigError("train: learning rates must be positive");
  if (!(scale > 0.0)) throw ConfigError("train.scale must be positive");
  if (!(step_every > 0.0) || !(step_start >= 0.0)) throw ConfigError("train: step_start >= 0 and step_every > 0 required");
  if (!(step_factor > 0.0 && step_factor <= 1.0)) throw ConfigError("train.step_factor must be in (0, 1]");
  if (total_iters < 0 || finetune_iters < 0) throw ConfigError("train: iteration counts must be >= 0");
  if (warmup && !(warmup_span > 0.0)) throw ConfigError("train.warmup_span must be positive");
  if (warmup && total_iters > 0 && !(warmup_span / scale < static_cast<double>(total_iters)))
    throw ConfigError("train: warmup span (" + std::to_string(warmup_span / scale) +
                      " desk iterations) must be shorter than total_iters");
  if (val_every < 1 || checkpoint_every < 1) throw ConfigError("train: val_every and checkpoint_every must be >= 1");
  if (!(val_test_scale > 0.0)) throw ConfigError("train.val_test_scale must be positive");
  ranges.validate();
}

TrainConfig TrainConfig::from_config(KeyValues& kv) {
  TrainConfig c;
  c.batch_size = static_cast<int>(kv.take_int("train.batch_size", c.batch_size));
  c.base_lr = kv.take_double("train.base_lr", c.base_lr);
  c.step_start = kv.take_double("train.step_start", c.step_start);
  c.step_every = kv.take_double("train.step_every", c.step_every);
  c.step_factor = kv.take_double("train.step_factor", c.step_factor);
  c.warmup = kv.take_bool("train.warmup", c.warmup);
  c.warmup_start_lr = kv.take_double("train.warmup_start_lr", c.warmup_start_lr);
  c.warmup_end_lr = kv.take_double("train.warmup_end_lr", c.warmup_end_lr);
  c.warmup_span = kv.take_double("train.warmup_span", c.warmup_span);
  c.total_iters = kv.take_int("train.total_iters", c.total_iters);
  c.scale = kv.take_double("train.scale", c.scale);
  c.finetune_lr = kv.take_double("train.finetune_lr", c.finetune_lr);
  c.finetune_iters = kv.take_int("train.finetune_iters", c.finetune_iters);
  c.seed = kv.take_u64("train.seed", c.seed);
  c.val_every = kv.take_int("train.val_every", c.val_every);
  c.checkpoint_every = kv.take_int("train.checkpoint_every", c.checkpoint_every);
  c.val_count = kv.take_int("train.val_count", c.val_count);
  c.augment = kv.take_bool("train.augment", c.augment);
  c.mask_occluded = kv.take_bool("train.mask_occluded", c.mask_occluded);
  c.check_finite = kv.take_bool("train.check_finite", c.check_finite);
  c.val_test_scale = kv.take_double("train.val_test_scale", c.val_test_scale);
  c.ranges = AugmentRanges::from_config(kv);
  c.validate();
  return c;
}

double lr_schedule(std::int64_t iter, const TrainConfig& c) {
  const double it = static_cast<double>(iter);
  if (c.warmup) {
    const double span = c.warmup_span / c.scale;
    if (it < span) return c.warmup_start_lr + (c.warmup_end_lr - c.warmup_start_lr) * (it / span);
  }
  const double start = c.step_start / c.scale;
  if (it < start) return c.base_lr;
  const double steps = std::floor((it - start) / (c.step_every / c.scale)) + 1.0;
  return c.base_lr * std::pow(c.step_factor, steps);
}

}  // namespace deskflow
