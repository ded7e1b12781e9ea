#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sam3unet/config.hpp"
#include "sam3unet/data.hpp"
#include "sam3unet/losses.hpp"
#include "sam3unet/metrics.hpp"
#include "sam3unet/trainer.hpp"

namespace py = pybind11;
using namespace sam3unet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.ndim());
  for (int i = 0; i < a.ndim(); ++i) shape[static_cast<size_t>(i)] = a.shape(i);
  DVec values(a.data(), a.data() + a.size());
  return Tensor::from_data(std::move(shape), std::move(values));
}

py::array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.data(), t.data() + t.numel(), out.mutable_data());
  return out;
}

std::vector<std::pair<std::string, std::string>> to_overrides(const py::dict& d) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& item : d)
    out.emplace_back(py::str(item.first).cast<std::string>(),
                     py::str(item.second).cast<std::string>());
  return out;
}

FMode parse_fmode(const std::string& s) {
  if (s == "adaptive") return FMode::kAdaptive;
  if (s == "max") return FMode::kMax;
  throw ConfigError("f_mode must be 'adaptive' or 'max', got '" + s + "'");
}

/// Python-facing wrapper bundling a model with its configuration.
struct PyModel {
  RunConfig config;
  Sam3UNet model;

  PyModel(const std::string& config_path, const py::dict& overrides, uint64_t seed)
      : config(load_run_config(config_path, to_overrides(overrides))),
        model(make_model_config(config), seed) {}

  explicit PyModel(LoadedModel&& lm) : config(lm.config), model(std::move(lm.model)) {}

  py::array encode(const Array& images) {
    NoGradGuard ng;
    return to_array(model.encoder().encode(to_tensor(images)));
  }

  std::vector<py::array> forward(const Array& images) {
    NoGradGuard ng;
    DecoderOutput out = model.forward(to_tensor(images), /*training=*/false);
    std::vector<py::array> logits;
    for (const auto& l : out.logits) logits.push_back(to_array(l));
    return logits;
  }

  py::array predict(const std::string& image_path) {
    return to_array(predict_map(model, config, image_path));
  }

  void save(const std::string& path) {
    CheckpointData ckpt;
    ckpt.config_text = render_run_config(config);
    model.save_state(ckpt);
    save_checkpoint(ckpt, path);
  }

  int64_t total_parameters() const {
    return model_census(make_model_config(config)).total();
  }
  int64_t trainable_parameters() const {
    return model_census(make_model_config(config)).trainable_count();
  }
};

py::dict metrics_dict(const DatasetMetrics& m) {
  py::dict d;
  d["iou"] = m.iou;
  d["f_measure"] = m.f_measure;
  d["mae"] = m.mae;
  d["s_measure"] = m.s_measure;
  d["e_measure_mean"] = m.e_measure_mean;
  d["count"] = m.count;
  d["unmatched"] = m.unmatched;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "SAM3-UNet segmentation fine-tuning core";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<ShapeError>(m, "ShapeError");

  py::class_<PyModel>(m, "Model")
      .def(py::init<const std::string&, const py::dict&, uint64_t>(),
           py::arg("config_path") = "", py::arg("overrides") = py::dict(),
           py::arg("seed") = 0)
      .def_static(
          "load",
          [](const std::string& path) { return PyModel(load_model(path)); },
          py::arg("checkpoint"))
      .def("encode", &PyModel::encode, py::arg("images"),
           "Token grid (B, D, H/patch, W/patch) for a (B,3,H,W) batch")
      .def("forward", &PyModel::forward, py::arg("images"),
           "Per-head logit maps at full input resolution")
      .def("predict", &PyModel::predict, py::arg("image_path"),
           "Probability map in [0,1] at the image's native size")
      .def("save", &PyModel::save, py::arg("path"))
      .def_property_readonly("total_parameters", &PyModel::total_parameters)
      .def_property_readonly("trainable_parameters", &PyModel::trainable_parameters);

  m.def(
      "weight_map",
      [](const Array& gt, int pool_kernel, double gain) {
        LossConfig cfg;
        cfg.pool_kernel = pool_kernel;
        cfg.weight_gain = gain;
        return to_array(weight_map(to_tensor(gt), cfg));
      },
      py::arg("gt"), py::arg("pool_kernel") = 31, py::arg("weight_gain") = 5.0);

  m.def(
      "structure_loss",
      [](const Array& logits, const Array& gt) {
        return structure_loss(to_tensor(logits), to_tensor(gt)).item();
      },
      py::arg("logits"), py::arg("gt"),
      "Weighted BCE + weighted IoU for (B,1,H,W) logits against a binary mask");

  m.def(
      "total_loss",
      [](const std::vector<Array>& heads, const Array& gt) {
        DecoderOutput out;
        for (const auto& h : heads) out.logits.push_back(to_tensor(h));
        return total_loss(out, to_tensor(gt)).item();
      },
      py::arg("head_logits"), py::arg("gt"));

  m.def("mae", [](const Array& p, const Array& g) { return mae(to_tensor(p), to_tensor(g)); });
  m.def(
      "iou",
      [](const Array& p, const Array& g, double t) { return iou(to_tensor(p), to_tensor(g), t); },
      py::arg("pred"), py::arg("gt"), py::arg("threshold") = 0.5);
  m.def(
      "f_measure",
      [](const Array& p, const Array& g, double beta2, const std::string& mode) {
        return f_measure(to_tensor(p), to_tensor(g), beta2, parse_fmode(mode));
      },
      py::arg("pred"), py::arg("gt"), py::arg("beta2") = 0.3, py::arg("mode") = "adaptive");
  m.def(
      "s_measure",
      [](const Array& p, const Array& g, double alpha) {
        return s_measure(to_tensor(p), to_tensor(g), alpha);
      },
      py::arg("pred"), py::arg("gt"), py::arg("alpha") = 0.5);
  m.def("e_measure_mean", [](const Array& p, const Array& g) {
    return e_measure_mean(to_tensor(p), to_tensor(g));
  });

  m.def(
      "evaluate_folder",
      [](const std::string& pred_dir, const std::string& gt_dir, const std::string& mode,
         bool strict) {
        return metrics_dict(evaluate_folder(pred_dir, gt_dir, parse_fmode(mode), strict));
      },
      py::arg("pred_dir"), py::arg("gt_dir"), py::arg("f_mode") = "adaptive",
      py::arg("strict") = false);

  m.def(
      "make_synthetic",
      [](int n, int size, uint64_t seed, const std::string& out_dir) {
        make_synthetic(n, size, seed, out_dir);
      },
      py::arg("n"), py::arg("size"), py::arg("seed"), py::arg("out_dir"));

  m.def(
      "lr_at",
      [](int64_t step, int64_t total, double lr, double lr_floor) {
        TrainConfig cfg;
        cfg.lr = lr;
        cfg.lr_floor = lr_floor;
        return lr_at(step, total, cfg);
      },
      py::arg("step"), py::arg("total_steps"), py::arg("lr") = 2e-4,
      py::arg("lr_floor") = 0.0);

  m.def(
      "train_run",
      [](const std::string& config_path, const py::dict& overrides,
         const std::string& run_dir) {
        RunConfig cfg = load_run_config(config_path, to_overrides(overrides));
        IndexResult idx = index_dataset(cfg.data);
        if (idx.pairs.empty()) throw ConfigError("dataset is empty");
        Sam3UNet model(make_model_config(cfg), cfg.train.seed);
        TrainResult r = train(model, idx.pairs, cfg, run_dir);
        py::dict out;
        out["steps"] = r.history.size();
        out["final_loss"] = r.history.empty() ? 0.0 : r.history.back().loss;
        out["checkpoint"] = r.final_checkpoint.string();
        out["epochs_run"] = r.epochs_run;
        return out;
      },
      py::arg("config_path"), py::arg("overrides") = py::dict(), py::arg("run_dir"),
      "Full training loop; writes loss.csv, config snapshot and checkpoints");

  m.attr("__version__") = "0.1.0";
}
