#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "deskflow/checkpoint.hpp"
#include "deskflow/trainer.hpp"

namespace deskflow {

using nn::Shape;
using nn::Tensor;

namespace {

constexpr std::uint64_t kOrderStream = 1;
constexpr std::uint64_t kAugmentStream = 2;
constexpr std::uint64_t kSplitStream = 3;

void shuffle(std::vector<std::int64_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_int(0, static_cast<std::int64_t>(i) - 1)]);
}

/// Sample order: each epoch is an independent seeded permutation of the
/// training indices, so position p always maps to the same sample.
class Order {
 public:
  Order(std::vector<std::int64_t> indices, std::uint64_t seed) : base_(std::move(indices)), seed_(seed) {}

  std::pair<std::int64_t, std::int64_t> at(std::int64_t position) {
    const std::int64_t n = static_cast<std::int64_t>(base_.size());
    const std::int64_t epoch = position / n;
    if (epoch != epoch_) {
      perm_ = base_;
      Rng rng = Rng::substream(seed_, {kOrderStream, static_cast<std::uint64_t>(epoch)});
      shuffle(perm_, rng);
      epoch_ = epoch;
    }
    return {perm_[position % n], epoch};
  }

 private:
  std::vector<std::int64_t> base_;
  std::vector<std::int64_t> perm_;
  std::uint64_t seed_;
  std::int64_t epoch_ = -1;
};

struct Batch {
  Tensor<float> img1, img2, flow, mask;
  std::vector<std::int64_t> indices;
};

Batch make_batch(const std::vector<Sample>& samples, Order& order, std::int64_t iter, const TrainConfig& cfg) {
  const int b = cfg.batch_size;
  const Sample& first = samples.at(order.at(iter * b).first);
  const int h = first.height(), w = first.width();
  Tensor<float> i1(Shape{b, 3, h, w}), i2(Shape{b, 3, h, w}), fl(Shape{b, 2, h, w}), mk(Shape{b, 1, h, w});
  Batch batch;
  for (int k = 0; k < b; ++k) {
    const auto [index, epoch] = order.at(iter * b + k);
    batch.indices.push_back(index);
    const Sample& raw = samples.at(index);
    if (raw.height() != h || raw.width() != w) throw ShapeError("training samples must share one size");
    Sample aug;
    const Sample* s = &raw;
    if (cfg.augment) {
      Rng rng = Rng::substream(cfg.seed, {kAugmentStream, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(index)});
      aug = apply_augmentation(raw, sample_augmentation(rng, cfg.ranges, w, h));
      s = &aug;
    }
    store_image(s->img1, i1, k);
    store_image(s->img2, i2, k);
    store_flow(s->flow, fl, mk, k);
    if (cfg.mask_occluded && !s->occlusion.empty())
      for (std::size_t i = 0; i < s->occlusion.size(); ++i)
        if (s->occlusion[i]) mk.plane(k, 0)[i] = 0.0f;
  }
  const int ph = padded_extent(h), pw = padded_extent(w);
  batch.img1 = reflect_pad(i1, ph, pw);
  batch.img2 = reflect_pad(i2, ph, pw);
  batch.flow = zero_pad(fl, ph, pw);
  batch.mask = zero_pad(mk, ph, pw);
  return batch;
}

std::string divergence_message(const char* what, std::int64_t iter, double lr, const std::vector<std::int64_t>& idx) {
  std::ostringstream out;
  out << "non-finite " << what << " at iteration " << iter << " (lr=" << lr << ", batch=[";
  for (std::size_t i = 0; i < idx.size(); ++i) out << (i ? "," : "") << idx[i];
  out << "])";
  return out.str();
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, const std::string& prefix, std::int64_t iter) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-%07lld.ckpt", static_cast<long long>(iter));
  return dir / (prefix + buf);
}

}  // namespace

std::int64_t default_val_count(std::int64_t n) {
  // 640 of 22,872 pairs, at least one when there is more than one sample.
  const std::int64_t k = static_cast<std::int64_t>(std::llround(static_cast<double>(n) * 640.0 / 22872.0));
  return n > 1 ? std::clamp<std::int64_t>(k, 1, n - 1) : 0;
}

SplitSpec make_split(std::int64_t n, std::int64_t val_count, std::uint64_t seed) {
  if (n < 0 || val_count < 0 || val_count > n) throw ConfigError("split: need 0 <= val_count <= n");
  std::vector<std::int64_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  Rng rng = Rng::substream(seed, {kSplitStream});
  shuffle(all, rng);
  SplitSpec split;
  split.seed = seed;
  split.validation.assign(all.begin(), all.begin() + val_count);
  split.train.assign(all.begin() + val_count, all.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

TrainResult train(FlowNet<float>& net, const std::vector<Sample>& samples, const SplitSpec& split,
                  const TrainConfig& cfg, const TrainOutputs& outputs, std::optional<double> lr_override) {
  cfg.validate();
  if (split.train.empty() && cfg.total_iters > 0) throw ConfigError("train: empty training split");
  const std::string hash = net.config().hash();
  std::ofstream metrics;
  if (outputs.dir) {
    std::filesystem::create_directories(*outputs.dir);
    nn::save_checkpoint(checkpoint_path(*outputs.dir, outputs.checkpoint_prefix, 0), net.params(), hash);
    metrics.open(*outputs.dir / outputs.metrics_name);
    if (!metrics) throw IoError("cannot write metrics log in " + outputs.dir->string());
    metrics << "iter\tlr\ttrain_loss\tval_epe\n";
  }

  TrainResult result;
  Order order(split.train, cfg.seed);
  nn::AdamState<float> adam;
  double interval_loss = 0.0;
  std::int64_t interval_count = 0;
  auto validate_now = [&] {
    return split.validation.empty() ? 0.0
                                    : evaluate_model(net, samples, split.validation, cfg.val_test_scale).overall.epe;
  };

  for (std::int64_t it = 0; it < cfg.total_iters; ++it) {
    const double lr = lr_override ? *lr_override : lr_schedule(it, cfg);
    Batch batch = make_batch(samples, order, it, cfg);
    nn::Tape<float> tape;
    tape.set_check_finite(cfg.check_finite);
    net.params().zero_grad();
    nn::Var<float> loss;
    try {
      auto pyramid = net.forward(tape, nn::make_leaf(std::move(batch.img1), false),
                                 nn::make_leaf(std::move(batch.img2), false));
      loss = multiscale_epe_loss(tape, pyramid, batch.flow, batch.mask, net.config().loss_weights);
      const double value = loss->value.data()[0];
      if (!std::isfinite(value)) throw DivergenceError(divergence_message("loss", it, lr, batch.indices));
      tape.backward(loss);
    } catch (const DivergenceError&) {
      throw;
    } catch (const Error& e) {
      if (!cfg.check_finite) throw;
      throw DivergenceError(divergence_message("value", it, lr, batch.indices) + ": " + e.what());
    }
    for (const auto& p : net.params().items())
      if (p.var->has_grad() && !p.var->grad.all_finite())
        throw DivergenceError(divergence_message("gradient", it, lr, batch.indices) + " in " + p.name);
    tape.clear();
    nn::adam_step(net.params(), adam, lr);

    const double value = loss->value.data()[0];
    result.losses.push_back(value);
    interval_loss += value;
    ++interval_count;
    const std::int64_t done = it + 1;
    if (done % cfg.val_every == 0 || done == cfg.total_iters) {
      LogRow row{done, lr, interval_loss / interval_count, validate_now()};
      interval_loss = 0.0;
      interval_count = 0;
      result.log.push_back(row);
      if (metrics.is_open()) {
        metrics << row.iter << '\t' << format_double(row.lr) << '\t' << format_double(row.train_loss) << '\t'
                << format_double(row.val_epe) << '\n';
        metrics.flush();
      }
      if (outputs.on_log) outputs.on_log(row);
    }
    if (outputs.dir && done % cfg.checkpoint_every == 0 && done != cfg.total_iters)
      nn::save_checkpoint(checkpoint_path(*outputs.dir, outputs.checkpoint_prefix, done), net.params(), hash);
  }
  result.final_val_epe = result.log.empty() ? validate_now() : result.log.back().val_epe;
  if (outputs.dir && cfg.total_iters > 0)
    nn::save_checkpoint(*outputs.dir / (outputs.checkpoint_prefix + "-final.ckpt"), net.params(), hash);
  return result;
}

std::size_t argmin_index(const std::vector<double>& values) {
  if (values.empty()) throw Error("argmin of an empty sequence");
  return static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
}

FinetuneResult finetune(FlowNet<float>& net, const std::vector<Sample>& samples, const SplitSpec& split,
                        const TrainConfig& cfg, const TrainOutputs& outputs) {
  std::vector<Tensor<float>> start;
  for (const auto& p : net.params().items()) start.push_back(p.var->value);
  auto restore = [&] {
    const auto& items = net.params().items();
    for (std::size_t i = 0; i < items.size(); ++i) items[i].var->value = start[i];
  };

  FinetuneResult result;
  if (!split.validation.empty())
    result.start_val_epe = evaluate_model(net, samples, split.validation, cfg.val_test_scale).overall.epe;
  TrainConfig phase1 = cfg;
  phase1.total_iters = cfg.finetune_iters;
  TrainOutputs quiet;
  quiet.on_log = outputs.on_log;
  TrainResult r1 = train(net, samples, split, phase1, quiet, cfg.finetune_lr);
  result.phase1 = r1.log;
  if (!r1.log.empty()) {
    std::vector<double> epes{result.start_val_epe};
    std::vector<std::int64_t> iters{0};
    for (const auto& row : r1.log) {
      epes.push_back(row.val_epe);
      iters.push_back(row.iter);
    }
    result.chosen_iters = iters[argmin_index(epes)];
  }

  restore();
  SplitSpec full = split;
  full.train.insert(full.train.end(), split.validation.begin(), split.validation.end());
  std::sort(full.train.begin(), full.train.end());
  TrainConfig phase2 = cfg;
  phase2.total_iters = result.chosen_iters;
  TrainOutputs tagged = outputs;
  tagged.checkpoint_prefix = outputs.checkpoint_prefix + "+ft";
  tagged.metrics_name = "metrics+ft.tsv";
  result.phase2 = train(net, samples, full, phase2, tagged, cfg.finetune_lr);
  return result;
}

}  // namespace deskflow
