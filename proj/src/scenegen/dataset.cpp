#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "deskflow/errors.hpp"
#include "deskflow/scene.hpp"

namespace deskflow {
namespace {

std::string sample_stem(std::int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%07lld", static_cast<long long>(index));
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Image occlusion_image(const Sample& s) {
  Image occ(s.width(), s.height(), 1);
  for (std::size_t i = 0; i < s.occlusion.size(); ++i) occ.data[i] = s.occlusion[i] ? 1.0f : 0.0f;
  return occ;
}

Image drop_alpha(Image img) {
  if (img.channels == 4) {
    img.channels = 3;
    img.data.resize(img.plane_size() * 3);
  } else if (img.channels == 1) {
    Image rgb(img.width, img.height, 3);
    for (int c = 0; c < 3; ++c) std::copy(img.data.begin(), img.data.end(), rgb.data.begin() + c * img.plane_size());
    return rgb;
  }
  return img;
}

}  // namespace

Sample generate_sample(const GeneratorConfig& config, const SpriteCatalog& assets, std::uint64_t seed,
                       std::int64_t index, SceneSpec* spec_out) {
  const std::int64_t scene_index = config.quarter ? index / 4 : index;
  Rng rng = Rng::substream(seed, {static_cast<std::uint64_t>(scene_index)});
  SceneSpec spec = sample_scene(config, rng);
  Sample full = render_sample(spec, assets);
  if (spec_out) *spec_out = spec;
  if (!config.quarter) return full;
  auto quadrants = quarter(full, config.strict_quadrant_occlusion);
  return std::move(quadrants[static_cast<std::size_t>(index % 4)]);
}

std::string DatasetManifest::to_text() const {
  std::string out = "format = deskflow-pairs-v1\n";
  out += "seed = " + std::to_string(seed) + "\n";
  out += "count = " + std::to_string(count) + "\n";
  out += "config_hash = " + config_hash + "\n";
  out += "reference_count = " + std::to_string(reference_count) + "\n";
  out += "width = " + std::to_string(width) + "\n";
  out += "height = " + std::to_string(height) + "\n";
  for (const ManifestEntry& e : entries)
    out += "entry = " + e.img1 + " " + e.img2 + " " + e.flow + " " + e.occlusion + " " + e.spec + "\n";
  return out;
}

DatasetManifest DatasetManifest::from_text(const std::string& text) {
  DatasetManifest m;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(' ') + 1);
    std::istringstream in(line.substr(eq + 1));
    if (key == "entry") {
      ManifestEntry e;
      if (!(in >> e.img1 >> e.img2 >> e.flow >> e.occlusion >> e.spec)) throw FormatError("bad manifest entry: " + line);
      m.entries.push_back(e);
    } else if (key == "seed") {
      in >> m.seed;
    } else if (key == "count") {
      in >> m.count;
    } else if (key == "config_hash") {
      in >> m.config_hash;
    } else if (key == "reference_count") {
      in >> m.reference_count;
    } else if (key == "width") {
      in >> m.width;
    } else if (key == "height") {
      in >> m.height;
    }
  }
  if (static_cast<std::int64_t>(m.entries.size()) != m.count) throw FormatError("manifest count does not match entries");
  return m;
}

DatasetManifest generate_dataset(const GeneratorConfig& config, const std::string& config_text, std::uint64_t seed,
                                 std::int64_t n, const std::filesystem::path& out) {
  if (n < 0) throw Error("generate_dataset: negative count");
  std::filesystem::create_directories(out);
  const auto assets = make_catalog(config);

  DatasetManifest manifest;
  manifest.seed = seed;
  manifest.count = n;
  manifest.config_hash = hex64(fnv1a64(config_text));
  manifest.reference_count = config.reference_count;
  manifest.width = config.quarter ? config.width / 2 : config.width;
  manifest.height = config.quarter ? config.height / 2 : config.height;

  for (std::int64_t i = 0; i < n; ++i) {
    SceneSpec spec;
    const Sample s = generate_sample(config, *assets, seed, i, &spec);
    const std::string stem = sample_stem(i);
    ManifestEntry e{stem + "-img1.png", stem + "-img2.png", stem + "-flow.flo", stem + "-occ.png", stem + "-spec.txt"};
    write_png(out / e.img1, s.img1);
    write_png(out / e.img2, s.img2);
    write_flo_file((out / e.flow).string(), s.flow);
    write_png(out / e.occlusion, occlusion_image(s));
    std::string spec_text = spec.to_text();
    if (config.quarter) spec_text += "quadrant = " + std::to_string(i % 4) + "\n";
    write_text(out / e.spec, spec_text);
    manifest.entries.push_back(e);
  }
  write_text(out / "manifest.txt", manifest.to_text());
  write_text(out / "config.txt", config_text);
  return manifest;
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir) {
  const DatasetManifest manifest = DatasetManifest::from_text(read_text(dir / "manifest.txt"));
  std::vector<Sample> samples;
  samples.reserve(manifest.entries.size());
  for (const ManifestEntry& e : manifest.entries) {
    Sample s;
    s.img1 = drop_alpha(read_png(dir / e.img1));
    s.img2 = drop_alpha(read_png(dir / e.img2));
    s.flow = read_flo_file((dir / e.flow).string());
    if (!s.img1.same_size(s.img2) || s.img1.width != s.flow.width || s.img1.height != s.flow.height)
      throw FormatError("sample " + e.img1 + ": raster sizes disagree");
    s.occlusion.assign(s.flow.size(), 0);
    if (!e.occlusion.empty() && std::filesystem::exists(dir / e.occlusion)) {
      const Image occ = read_png(dir / e.occlusion);
      for (std::size_t i = 0; i < s.occlusion.size() && i < occ.plane_size(); ++i)
        s.occlusion[i] = occ.data[i] > 0.5f ? 1 : 0;
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

Sample quantize_like_disk(const Sample& sample) {
  Sample out = sample;
  for (Image* img : {&out.img1, &out.img2})
    for (float& v : img->data) v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  return out;
}

}  // namespace deskflow
