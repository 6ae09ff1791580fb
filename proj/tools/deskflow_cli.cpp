// deskflow command-line entry point.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "deskflow/checkpoint.hpp"
#include "deskflow/config.hpp"
#include "deskflow/errors.hpp"
#include "deskflow/gradcheck_suite.hpp"
#include "deskflow/trainer.hpp"
#include "deskflow/varrefine.hpp"

namespace fs = std::filesystem;
using namespace deskflow;

namespace {

struct Common {
  std::vector<std::string> configs;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out = true) {
  cmd->add_option("-c,--config", c.configs, "key = value config file (repeatable, later files win)");
  cmd->add_option("-s,--set", c.overrides, "key=value override (repeatable)");
  auto* o = cmd->add_option("-o,--out", c.out, "output directory");
  if (needs_out) o->required();
}

KeyValues load_kv(const Common& c) {
  KeyValues kv;
  for (const auto& path : c.configs) {
    const KeyValues file = KeyValues::load(path);
    for (const auto& [k, v] : file.entries()) kv.set(k, v);
  }
  for (const auto& o : c.overrides) kv.apply_override(o);
  return kv;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw IoError("cannot write " + path.string());
}

/// Every run leaves the configuration it actually used next to its outputs.
void finish_config(KeyValues& kv, const fs::path& out) {
  kv.require_all_taken();
  write_text(out / "resolved.cfg", kv.resolved_text());
}

/// Model config stored next to a checkpoint by `train` (or given
/// explicitly); `model.*` keys in kv take precedence. Only
/// model.test_scale may differ from the config the checkpoint was written for.
FlowNet<float> load_model(const std::string& checkpoint, const std::string& model_cfg, KeyValues& kv) {
  const fs::path cfg_path = model_cfg.empty() ? fs::path(checkpoint).parent_path() / "model.cfg" : fs::path(model_cfg);
  KeyValues stored = KeyValues::load(cfg_path);
  for (const auto& [k, v] : stored.entries())
    if (!kv.contains(k)) kv.set(k, v);
  const ModelConfig mc = ModelConfig::from_config(kv);
  const nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint);
  ModelConfig arch = mc;
  arch.test_scale = ModelConfig::from_config(stored).test_scale;
  if (ckpt.config_hash != arch.hash())
    throw ShapeError("architecture mismatch: checkpoint " + checkpoint + " has config " + ckpt.config_hash +
                     ", requested " + arch.hash());
  FlowNet<float> net(mc);
  nn::assign_checkpoint(ckpt, net.params());
  return net;
}

std::string model_label(const ModelConfig& mc) { return mc.variant == Variant::simple ? "FlowNetS" : "FlowNetC"; }

SplitSpec dataset_split(std::int64_t n, const TrainConfig& tc) {
  return make_split(n, tc.val_count < 0 ? default_val_count(n) : tc.val_count, tc.seed);
}

std::string split_text(const SplitSpec& split) {
  std::ostringstream s;
  s << "seed = " << split.seed << "\nvalidation =";
  for (auto i : split.validation) s << ' ' << i;
  s << "\ntrain =";
  for (auto i : split.train) s << ' ' << i;
  s << '\n';
  return s.str();
}

void print_progress(const LogRow& r) {
  std::printf("iter %lld  lr %.3g  train_loss %.5f  val_epe %.4f\n", static_cast<long long>(r.iter), r.lr,
              r.train_loss, r.val_epe);
  std::fflush(stdout);
}

// ---- subcommands ----

struct GenerateArgs {
  Common common;
  std::int64_t count = 0;
  std::uint64_t seed = 1;
};

int run_generate(const GenerateArgs& a) {
  KeyValues kv = load_kv(a.common);
  const GeneratorConfig g = GeneratorConfig::from_config(kv);
  g.validate();
  kv.require_all_taken();
  const fs::path out = a.common.out;
  const DatasetManifest m = generate_dataset(g, kv.resolved_text(), a.seed, a.count, out);
  write_text(out / "resolved.cfg", kv.resolved_text());
  std::printf("wrote %lld samples (%dx%d) to %s\n", static_cast<long long>(m.count), m.width, m.height,
              out.string().c_str());
  return 0;
}

struct TrainArgs {
  Common common;
  std::string data;
  bool no_augment = false;
  std::int64_t iters = -1;
};

int run_train(const TrainArgs& a) {
  KeyValues kv = load_kv(a.common);
  const ModelConfig mc = ModelConfig::from_config(kv);
  TrainConfig tc = TrainConfig::from_config(kv);
  if (a.no_augment) tc.augment = false;
  if (a.iters >= 0) tc.total_iters = a.iters;
  tc.validate();
  const fs::path out = a.common.out;
  fs::create_directories(out);
  finish_config(kv, out);

  const std::vector<Sample> samples = load_dataset(a.data);
  const SplitSpec split = dataset_split(static_cast<std::int64_t>(samples.size()), tc);
  write_text(out / "model.cfg", mc.to_text());
  write_text(out / "split.txt", split_text(split));

  FlowNet<float> net(mc);
  TrainOutputs outputs;
  outputs.dir = out;
  outputs.on_log = print_progress;
  const TrainResult r = train(net, samples, split, tc, outputs);
  std::printf("final val_epe %.4f\n", r.final_val_epe);
  return 0;
}

struct FinetuneArgs {
  Common common;
  std::string data;
  std::string checkpoint;
  std::string model_cfg;
  bool no_augment = false;
};

int run_finetune(const FinetuneArgs& a) {
  KeyValues kv = load_kv(a.common);
  TrainConfig tc = TrainConfig::from_config(kv);
  if (a.no_augment) tc.augment = false;
  tc.validate();
  FlowNet<float> net = load_model(a.checkpoint, a.model_cfg, kv);
  const fs::path out = a.common.out;
  fs::create_directories(out);
  finish_config(kv, out);

  const std::vector<Sample> samples = load_dataset(a.data);
  const SplitSpec split = dataset_split(static_cast<std::int64_t>(samples.size()), tc);
  write_text(out / "model.cfg", net.config().to_text());
  write_text(out / "split.txt", split_text(split));

  TrainOutputs outputs;
  outputs.dir = out;
  outputs.on_log = print_progress;
  const FinetuneResult r = finetune(net, samples, split, tc, outputs);
  std::printf("chosen iterations %lld  final val_epe %.4f\n", static_cast<long long>(r.chosen_iters),
              r.phase2.final_val_epe);
  return 0;
}

struct EvalArgs {
  Common common;
  std::string data;
  std::string checkpoint;
  std::string model_cfg;
  std::string subset = "val";
  double test_scale = 0.0;
  bool variational = false;
  bool zero = false;
  std::string label;
};

int run_eval(const EvalArgs& a) {
  KeyValues kv = load_kv(a.common);
  const TrainConfig tc = TrainConfig::from_config(kv);
  const VarParams vp = VarParams::from_config(kv);
  std::optional<FlowNet<float>> net;
  // A shared config may carry model keys; the zero predictor ignores them.
  if (a.zero) ModelConfig::from_config(kv);
  if (!a.zero) {
    if (a.checkpoint.empty()) throw ConfigError("eval needs --checkpoint or --zero");
    net.emplace(load_model(a.checkpoint, a.model_cfg, kv));
  }
  const fs::path out = a.common.out;
  fs::create_directories(out);
  finish_config(kv, out);

  const std::vector<Sample> samples = load_dataset(a.data);
  std::vector<std::int64_t> indices;
  if (a.subset == "val") indices = dataset_split(static_cast<std::int64_t>(samples.size()), tc).validation;
  else if (a.subset == "train") indices = dataset_split(static_cast<std::int64_t>(samples.size()), tc).train;
  else if (a.subset != "all") throw ConfigError("--subset must be val, train or all");
  if (indices.empty())
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(samples.size()); ++i) indices.push_back(i);

  Predictor predictor;
  std::string name = a.label;
  if (a.zero) {
    predictor = zero_predictor();
    if (name.empty()) name = "zero";
  } else {
    const double scale = a.test_scale > 0.0 ? a.test_scale : net->config().effective_test_scale();
    predictor = model_predictor(*net, scale);
    if (name.empty()) name = model_label(net->config());
  }

  std::vector<ReportRow> rows;
  const EvalResult base = evaluate(predictor, samples, indices);
  rows.push_back({name, base.overall});
  write_text(out / "samples.tsv", format_sample_table(base));
  if (a.variational) {
    const Refiner refiner = [&vp](const Sample& s, const FlowField& f) {
      return refine(to_quarter(f), s.img1, s.img2, vp);
    };
    const EvalResult refined = evaluate(predictor, samples, indices, refiner);
    rows.push_back({name + "+v", refined.overall});
    write_text(out / "samples+v.tsv", format_sample_table(refined));
  }
  const std::string report = format_report(rows);
  write_text(out / "report.txt", report);
  std::fputs(report.c_str(), stdout);
  return 0;
}

struct InferArgs {
  Common common;
  std::string checkpoint;
  std::string model_cfg;
  std::string img1;
  std::string img2;
  double test_scale = 0.0;
  bool variational = false;
};

Image rgb(Image img) {
  if (img.channels == 3) return img;
  Image out(img.width, img.height, 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(std::min(c, img.channels - 1), y, x);
  return out;
}

int run_infer(const InferArgs& a) {
  KeyValues kv = load_kv(a.common);
  const VarParams vp = VarParams::from_config(kv);
  const FlowNet<float> net = load_model(a.checkpoint, a.model_cfg, kv);
  const fs::path out = a.common.out;
  fs::create_directories(out);
  finish_config(kv, out);

  const Image i1 = rgb(read_png(a.img1)), i2 = rgb(read_png(a.img2));
  const double scale = a.test_scale > 0.0 ? a.test_scale : net.config().effective_test_scale();
  FlowField flow = predict(net, i1, i2, scale);
  if (a.variational) flow = refine(to_quarter(flow), i1, i2, vp);
  write_flo_file((out / "flow.flo").string(), flow);
  write_png(out / "flow.png", flow_to_color(flow));
  std::printf("wrote %s and %s\n", (out / "flow.flo").string().c_str(), (out / "flow.png").string().c_str());
  return 0;
}

struct VizArgs {
  std::string flo;
  std::string png;
  double max_magnitude = 0.0;
};

int run_viz(const VizArgs& a) {
  const FlowField flow = read_flo_file(a.flo);
  const fs::path png = a.png.empty() ? fs::path(a.flo).replace_extension(".png") : fs::path(a.png);
  write_png(png, flow_to_color(flow, a.max_magnitude));
  std::printf("wrote %s\n", png.string().c_str());
  return 0;
}

struct GradcheckArgs {
  std::uint64_t seed = 1;
  int cases = 5;
};

int run_gradcheck(const GradcheckArgs& a) {
  const auto rows = run_gradcheck_suite(a.seed, a.cases);
  std::fputs(format_gradcheck_table(rows).c_str(), stdout);
  for (const auto& r : rows)
    if (!r.passed) return 1;
  return 0;
}

std::string one_line(std::string s) {
  for (char& ch : s)
    if (ch == '\n' || ch == '\r' || ch == '\t') ch = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deskflow: synthetic optical-flow data, FlowNet training and evaluation"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "render a synthetic dataset");
  add_common(c_gen, gen.common);
  c_gen->add_option("-n,--count", gen.count, "number of samples")->required();
  c_gen->add_option("--seed", gen.seed, "dataset seed");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train a network on a generated dataset");
  add_common(c_train, tr.common);
  c_train->add_option("-d,--data", tr.data, "dataset directory")->required();
  c_train->add_flag("--no-augment", tr.no_augment, "disable online augmentation");
  c_train->add_option("--iters", tr.iters, "desk iterations (overrides train.total_iters)");

  FinetuneArgs ft;
  auto* c_ft = app.add_subcommand("finetune", "two-phase low learning-rate fine-tuning");
  add_common(c_ft, ft.common);
  c_ft->add_option("-d,--data", ft.data, "target dataset directory")->required();
  c_ft->add_option("-k,--checkpoint", ft.checkpoint, "starting checkpoint")->required();
  c_ft->add_option("--model-config", ft.model_cfg, "model config (default: model.cfg beside the checkpoint)");
  c_ft->add_flag("--no-augment", ft.no_augment, "disable online augmentation");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "metrics report over a dataset");
  add_common(c_eval, ev.common);
  c_eval->add_option("-d,--data", ev.data, "dataset directory")->required();
  c_eval->add_option("-k,--checkpoint", ev.checkpoint, "checkpoint to evaluate");
  c_eval->add_option("--model-config", ev.model_cfg, "model config (default: model.cfg beside the checkpoint)");
  c_eval->add_option("--subset", ev.subset, "val, train or all (split from train.* keys)");
  c_eval->add_option("--test-scale", ev.test_scale, "input upscaling (default: 1.0 for S, 1.25 for C)");
  c_eval->add_flag("--variational", ev.variational, "also report the refined (+v) row");
  c_eval->add_flag("--zero", ev.zero, "evaluate the constant zero-flow predictor");
  c_eval->add_option("--label", ev.label, "row name in the report");

  InferArgs inf;
  auto* c_inf = app.add_subcommand("infer", "predict flow for one image pair");
  add_common(c_inf, inf.common);
  c_inf->add_option("-k,--checkpoint", inf.checkpoint, "checkpoint")->required();
  c_inf->add_option("--model-config", inf.model_cfg, "model config (default: model.cfg beside the checkpoint)");
  c_inf->add_option("img1", inf.img1, "first image (PNG)")->required();
  c_inf->add_option("img2", inf.img2, "second image (PNG)")->required();
  c_inf->add_option("--test-scale", inf.test_scale, "input upscaling (default per variant)");
  c_inf->add_flag("--variational", inf.variational, "apply variational refinement");

  VizArgs viz;
  auto* c_viz = app.add_subcommand("viz", "render a .flo file with the Middlebury color code");
  c_viz->add_option("flo", viz.flo, ".flo file")->required();
  c_viz->add_option("-o,--out", viz.png, "PNG path (default: beside the input)");
  c_viz->add_option("--max", viz.max_magnitude, "magnitude mapped to full saturation (default: field maximum)");

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
  c_gc->add_option("--seed", gc.seed, "shape seed");
  c_gc->add_option("--cases", gc.cases, "random shapes per op");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error kind=usage message=\"%s\"\n", one_line(e.what()).c_str());
    return 2;
  }

  try {
    if (c_gen->parsed()) return run_generate(gen);
    if (c_train->parsed()) return run_train(tr);
    if (c_ft->parsed()) return run_finetune(ft);
    if (c_eval->parsed()) return run_eval(ev);
    if (c_inf->parsed()) return run_infer(inf);
    if (c_viz->parsed()) return run_viz(viz);
    if (c_gc->parsed()) return run_gradcheck(gc);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error kind=divergence message=\"%s\"\n", one_line(e.what()).c_str());
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error kind=config message=\"%s\"\n", one_line(e.what()).c_str());
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "error kind=shape message=\"%s\"\n", one_line(e.what()).c_str());
  } catch (const IoError& e) {
    std::fprintf(stderr, "error kind=io message=\"%s\"\n", one_line(e.what()).c_str());
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error kind=format message=\"%s\"\n", one_line(e.what()).c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error kind=internal message=\"%s\"\n", one_line(e.what()).c_str());
  }
  return 1;
}
