#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

#include "deskflow/checkpoint.hpp"
#include "deskflow/correlation.hpp"
#include "deskflow/flow.hpp"
#include "deskflow/gradcheck_suite.hpp"
#include "deskflow/scene.hpp"
#include "deskflow/trainer.hpp"
#include "deskflow/varrefine.hpp"

namespace py = pybind11;
using namespace deskflow;

namespace {

using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Images cross the boundary as (H, W, C) float32 arrays.
Image to_image(const F32& a) {
  if (a.ndim() != 3) throw ShapeError("image must be (H, W, C)");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1)), c = static_cast<int>(a.shape(2));
  Image img(w, h, c);
  auto r = a.unchecked<3>();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) img.at(k, y, x) = r(y, x, k);
  return img;
}

F32 from_image(const Image& img) {
  F32 a({img.height, img.width, img.channels});
  auto m = a.mutable_unchecked<3>();
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int k = 0; k < img.channels; ++k) m(y, x, k) = img.at(k, y, x);
  return a;
}

// Flow fields are (H, W, 2) float64; invalid entries become NaN on the way out.
FlowField to_flow(const F64& a) {
  if (a.ndim() != 3 || a.shape(2) != 2) throw ShapeError("flow must be (H, W, 2)");
  FlowField f(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  auto r = a.unchecked<3>();
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      const std::size_t i = f.index(x, y);
      f.u[i] = r(y, x, 0);
      f.v[i] = r(y, x, 1);
      f.valid[i] = std::isfinite(f.u[i]) && std::isfinite(f.v[i]);
      if (!f.valid[i]) f.u[i] = f.v[i] = 0.0;
    }
  return f;
}

F64 from_flow(const FlowField& f) {
  F64 a({f.height, f.width, 2});
  auto m = a.mutable_unchecked<3>();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      const std::size_t i = f.index(x, y);
      m(y, x, 0) = f.valid[i] ? f.u[i] : nan;
      m(y, x, 1) = f.valid[i] ? f.v[i] : nan;
    }
  return a;
}

py::dict metrics_dict(const MetricsReport& r) {
  py::dict d;
  d["epe"] = r.epe;
  d["aae"] = r.aae;
  d["epe_s40plus"] = r.epe_s40plus ? py::cast(*r.epe_s40plus) : py::none();
  d["n_evaluated"] = r.n_evaluated;
  return d;
}

py::dict sample_dict(const Sample& s) {
  py::dict d;
  d["img1"] = from_image(s.img1);
  d["img2"] = from_image(s.img2);
  d["flow"] = from_flow(s.flow);
  py::array_t<std::uint8_t> occ({s.height(), s.width()});
  std::copy(s.occlusion.begin(), s.occlusion.end(), occ.mutable_data());
  d["occlusion"] = occ;
  return d;
}

KeyValues kv_from(const py::dict& d) {
  KeyValues kv;
  for (auto [k, v] : d) kv.set(py::str(k), py::str(v));
  return kv;
}

class Model {
 public:
  explicit Model(const ModelConfig& c) : net_(c) {}

  static Model create(const py::dict& config) {
    KeyValues kv = kv_from(config);
    const ModelConfig c = ModelConfig::from_config(kv);
    kv.require_all_taken();
    return Model(c);
  }

  static Model load(const std::string& checkpoint, const std::string& model_cfg) {
    const auto cfg = model_cfg.empty() ? std::filesystem::path(checkpoint).parent_path() / "model.cfg"
                                       : std::filesystem::path(model_cfg);
    KeyValues kv = KeyValues::load(cfg);
    Model m(ModelConfig::from_config(kv));
    const nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint);
    if (ckpt.config_hash != m.net_.config().hash()) throw ShapeError("architecture mismatch: " + checkpoint);
    nn::assign_checkpoint(ckpt, m.net_.params());
    return m;
  }

  F64 predict(const F32& img1, const F32& img2, double test_scale) const {
    const double s = test_scale > 0 ? test_scale : net_.config().effective_test_scale();
    return from_flow(deskflow::predict(net_, to_image(img1), to_image(img2), s));
  }

  py::list train(const std::string& dataset, const py::dict& config) {
    KeyValues kv = kv_from(config);
    const TrainConfig c = TrainConfig::from_config(kv);
    kv.require_all_taken();
    const std::vector<Sample> samples = load_dataset(dataset);
    const auto n = static_cast<std::int64_t>(samples.size());
    const SplitSpec split = make_split(n, c.val_count < 0 ? default_val_count(n) : c.val_count, c.seed);
    py::list rows;
    for (const LogRow& r : deskflow::train(net_, samples, split, c).log) {
      py::dict d;
      d["iter"] = r.iter;
      d["lr"] = r.lr;
      d["train_loss"] = r.train_loss;
      d["val_epe"] = r.val_epe;
      rows.append(d);
    }
    return rows;
  }

  void save(const std::string& path) const { nn::save_checkpoint(path, net_.params(), net_.config().hash()); }
  std::string config_text() const { return net_.config().to_text(); }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : net_.params().items()) n += p.var->value.size();
    return n;
  }

 private:
  FlowNet<float> net_;
};

}  // namespace

PYBIND11_MODULE(_deskflow, m) {
  m.doc() = "Optical flow with convolutional networks: native core.";

  const auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

  m.def("read_flo", [](const std::string& p) { return from_flow(read_flo_file(p)); }, py::arg("path"));
  m.def("write_flo", [](const std::string& p, const F64& f) { write_flo_file(p, to_flow(f)); }, py::arg("path"),
        py::arg("flow"));
  m.def("flow_to_color", [](const F64& f, double max_mag) { return from_image(flow_to_color(to_flow(f), max_mag)); },
        py::arg("flow"), py::arg("max_magnitude") = 0.0);
  m.def("compute_metrics", [](const F64& pred, const F64& gt) { return metrics_dict(compute_metrics(to_flow(pred), to_flow(gt))); },
        py::arg("pred"), py::arg("gt"), "NaN ground-truth entries are treated as invalid.");

  m.def(
      "correlate",
      [](const F64& f1, const F64& f2, int k, int d, int s1, int s2) {
        if (f1.ndim() != 4 || f2.ndim() != 4) throw ShapeError("features must be (N, C, H, W)");
        auto tensor = [](const F64& a) {
          nn::Tensor<double> t({static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                                static_cast<int>(a.shape(2)), static_cast<int>(a.shape(3))});
          std::copy(a.data(), a.data() + a.size(), t.data());
          return t;
        };
        const nn::Tensor<double> out = nn::correlate_forward(tensor(f1), tensor(f2), nn::CorrParams{k, d, s1, s2});
        const nn::Shape s = out.shape();
        F64 r({s.n, s.c, s.h, s.w});
        std::copy(out.data(), out.data() + out.size(), r.mutable_data());
        return r;
      },
      py::arg("f1"), py::arg("f2"), py::arg("k") = 0, py::arg("d") = 20, py::arg("s1") = 1, py::arg("s2") = 2);

  m.def(
      "generate_sample",
      [](const py::dict& config, std::uint64_t seed, std::int64_t index) {
        KeyValues kv = kv_from(config);
        const GeneratorConfig g = GeneratorConfig::from_config(kv);
        kv.require_all_taken();
        const auto assets = make_catalog(g);
        return sample_dict(generate_sample(g, *assets, seed, index));
      },
      py::arg("config") = py::dict(), py::arg("seed") = 1, py::arg("index") = 0);
  m.def(
      "generate_dataset",
      [](const std::string& out, std::int64_t n, std::uint64_t seed, const py::dict& config) {
        KeyValues kv = kv_from(config);
        const GeneratorConfig g = GeneratorConfig::from_config(kv);
        kv.require_all_taken();
        return generate_dataset(g, kv.resolved_text(), seed, n, out).count;
      },
      py::arg("out"), py::arg("n"), py::arg("seed") = 1, py::arg("config") = py::dict());

  m.def(
      "lr_schedule",
      [](std::int64_t iter, const py::dict& config) {
        KeyValues kv = kv_from(config);
        const TrainConfig c = TrainConfig::from_config(kv);
        kv.require_all_taken();
        return lr_schedule(iter, c);
      },
      py::arg("iter"), py::arg("config") = py::dict());

  m.def(
      "refine",
      [](const F64& init, const F32& img1, const F32& img2, const py::dict& config) {
        KeyValues kv = kv_from(config);
        const VarParams p = VarParams::from_config(kv);
        kv.require_all_taken();
        return from_flow(refine(to_flow(init), to_image(img1), to_image(img2), p));
      },
      py::arg("init"), py::arg("img1"), py::arg("img2"), py::arg("config") = py::dict(),
      "Refines a quarter-resolution flow to a full-resolution one.");
  m.def("to_quarter", [](const F64& f) { return from_flow(to_quarter(to_flow(f))); }, py::arg("flow"));

  m.def(
      "gradcheck",
      [](std::uint64_t seed, int cases) {
        py::list rows;
        for (const GradcheckRow& r : run_gradcheck_suite(seed, cases)) {
          py::dict d;
          d["op"] = r.op;
          d["cases"] = r.cases;
          d["max_rel_error"] = r.max_rel_error;
          d["passed"] = r.passed;
          rows.append(d);
        }
        return rows;
      },
      py::arg("seed") = 1, py::arg("cases") = 5);

  py::class_<Model>(m, "Model")
      .def(py::init(&Model::create), py::arg("config") = py::dict(), "Keys are model.* config keys.")
      .def_static("load", &Model::load, py::arg("checkpoint"), py::arg("model_cfg") = "")
      .def("predict", &Model::predict, py::arg("img1"), py::arg("img2"), py::arg("test_scale") = 0.0)
      .def("train", &Model::train, py::arg("dataset"), py::arg("config") = py::dict(),
           "Trains on a generated dataset directory; config keys are train.* / augment.*.")
      .def("save", &Model::save, py::arg("path"))
      .def_property_readonly("config_text", &Model::config_text)
      .def_property_readonly("parameter_count", &Model::parameter_count);
}
