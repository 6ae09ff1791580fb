#include <cctype>
#include <cmath>
#include <sstream>

#include "deskflow/errors.hpp"
#include "deskflow/model.hpp"

namespace deskflow {
namespace {

template <typename V>
std::string join(const std::vector<V>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<V, double>) out += format_double(values[i]);
    else out += std::to_string(values[i]);
  }
  return out;
}

template <typename V>
std::vector<V> split(const std::string& key, const std::string& text) {
  std::vector<V> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      if constexpr (std::is_same_v<V, double>) out.push_back(std::stod(item, &used));
      else out.push_back(std::stoi(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad list entry '" + item + "' for key " + key);
    }
  }
  return out;
}

}  // namespace

std::string variant_name(Variant v) { return v == Variant::simple ? "simple" : "corr"; }

Variant parse_variant(const std::string& name) {
  if (name == "simple" || name == "s" || name == "flownets") return Variant::simple;
  if (name == "corr" || name == "c" || name == "flownetc") return Variant::corr;
  throw ConfigError("unknown model variant '" + name + "' (expected simple or corr)");
}

int ModelConfig::width(int reference) const { return std::max(1, reference / channel_scale); }

double ModelConfig::effective_test_scale() const {
  if (test_scale > 0.0) return test_scale;
  return variant == Variant::corr ? 1.25 : 1.0;
}

void ModelConfig::validate() const {
  if (channel_scale < 1) throw ConfigError("model.channel_scale must be >= 1");
  if (input_height <= 0 || input_width <= 0 || input_height % 64 || input_width % 64)
    throw ConfigError("model input size " + std::to_string(input_width) + "x" + std::to_string(input_height) +
                      " is not a positive multiple of 64");
  if (refinement_levels < 0 || refinement_levels > 5) throw ConfigError("model.refinement_levels must be in [0, 5]");
  if (encoder_widths.size() != 9) throw ConfigError("model.encoder_widths needs 9 entries");
  if (static_cast<int>(decoder_widths.size()) < refinement_levels)
    throw ConfigError("model.decoder_widths needs at least refinement_levels entries");
  if (static_cast<int>(loss_weights.size()) != refinement_levels + 1)
    throw ConfigError("model.loss_weights needs refinement_levels + 1 entries, got " +
                      std::to_string(loss_weights.size()));
  for (int w : encoder_widths)
    if (w < 1) throw ConfigError("model.encoder_widths entries must be positive");
  for (int w : decoder_widths)
    if (w < 1) throw ConfigError("model.decoder_widths entries must be positive");
  for (double w : loss_weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("model.loss_weights entries must be finite and >= 0");
  if (redirect_width < 1) throw ConfigError("model.redirect_width must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ConfigError("model.leaky_slope must be in [0, 1)");
  if (!(test_scale >= 0.0) || !std::isfinite(test_scale)) throw ConfigError("model.test_scale must be >= 0");
  corr.validate();
}

ModelConfig ModelConfig::from_config(KeyValues& kv) {
  ModelConfig c;
  c.variant = parse_variant(kv.take_string("model.variant", variant_name(c.variant)));
  c.channel_scale = static_cast<int>(kv.take_int("model.channel_scale", c.channel_scale));
  c.input_height = static_cast<int>(kv.take_int("model.input_height", c.input_height));
  c.input_width = static_cast<int>(kv.take_int("model.input_width", c.input_width));
  c.corr.k = static_cast<int>(kv.take_int("model.corr.k", c.corr.k));
  c.corr.d = static_cast<int>(kv.take_int("model.corr.d", c.corr.d));
  c.corr.s1 = static_cast<int>(kv.take_int("model.corr.s1", c.corr.s1));
  c.corr.s2 = static_cast<int>(kv.take_int("model.corr.s2", c.corr.s2));
  c.corr.normalize = kv.take_bool("model.corr.normalize", c.corr.normalize);
  c.refinement_levels = static_cast<int>(kv.take_int("model.refinement_levels", c.refinement_levels));
  c.leaky_slope = kv.take_double("model.leaky_slope", c.leaky_slope);
  c.encoder_widths = split<int>("model.encoder_widths", kv.take_string("model.encoder_widths", join(c.encoder_widths)));
  c.decoder_widths = split<int>("model.decoder_widths", kv.take_string("model.decoder_widths", join(c.decoder_widths)));
  c.redirect_width = static_cast<int>(kv.take_int("model.redirect_width", c.redirect_width));
  if (c.refinement_levels != 4 && !kv.contains("model.loss_weights")) {
    // Keep the coarse-heavy geometric profile for other depths.
    c.loss_weights.assign(c.refinement_levels + 1, 0.0);
    for (int i = 0; i <= c.refinement_levels; ++i) c.loss_weights[i] = i < 5 ? ModelConfig{}.loss_weights[i] : 0.005;
  }
  c.loss_weights = split<double>("model.loss_weights", kv.take_string("model.loss_weights", join(c.loss_weights)));
  c.test_scale = kv.take_double("model.test_scale", c.test_scale);
  c.init_seed = kv.take_u64("model.init_seed", c.init_seed);
  c.validate();
  return c;
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  out << "model.channel_scale = " << channel_scale << "\n"
      << "model.corr.d = " << corr.d << "\n"
      << "model.corr.k = " << corr.k << "\n"
      << "model.corr.normalize = " << (corr.normalize ? "true" : "false") << "\n"
      << "model.corr.s1 = " << corr.s1 << "\n"
      << "model.corr.s2 = " << corr.s2 << "\n"
      << "model.decoder_widths = " << join(decoder_widths) << "\n"
      << "model.encoder_widths = " << join(encoder_widths) << "\n"
      << "model.init_seed = " << init_seed << "\n"
      << "model.input_height = " << input_height << "\n"
      << "model.input_width = " << input_width << "\n"
      << "model.leaky_slope = " << format_double(leaky_slope) << "\n"
      << "model.loss_weights = " << join(loss_weights) << "\n"
      << "model.redirect_width = " << redirect_width << "\n"
      << "model.refinement_levels = " << refinement_levels << "\n"
      << "model.test_scale = " << format_double(test_scale) << "\n"
      << "model.variant = " << variant_name(variant) << "\n";
  return out.str();
}

std::string ModelConfig::hash() const { return hex64(fnv1a64(to_text())); }

}  // namespace deskflow
