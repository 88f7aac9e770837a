#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "cainet/aux_targets.hpp"
#include "cainet/checkpoint.hpp"
#include "cainet/gradcheck.hpp"
#include "cainet/losses.hpp"
#include "cainet/metrics.hpp"
#include "cainet/ops.hpp"
#include "cainet/trainer.hpp"

namespace py = pybind11;
using namespace cainet;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const FloatArray& a) {
    Shape shape(a.shape(), a.shape() + a.ndim());
    std::vector<float> v(a.data(), a.data() + a.size());
    return Tensor::from(std::move(shape), std::move(v));
}

FloatArray to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    FloatArray a(shape);
    std::memcpy(a.mutable_data(), t.ptr(), t.numel() * sizeof(float));
    return a;
}

LabelMap to_labels(const IntArray& a) {
    if (a.ndim() != 2) throw DimensionError("labels must be a 2-D array");
    LabelMap l(a.shape(0), a.shape(1));
    std::memcpy(l.values.data(), a.data(), l.size() * sizeof(std::int32_t));
    return l;
}

template <typename T, typename Out = T>
py::array_t<Out> grid_array(const Grid<T>& g) {
    py::array_t<Out> a({py::ssize_t(g.height), py::ssize_t(g.width)});
    auto* dst = a.mutable_data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] = Out(g.values[i]);
    return a;
}

TrainConfig config_from(const std::map<std::string, std::string>& settings, const std::string& path) {
    KeyValues kv = path.empty() ? KeyValues{} : KeyValues::load(path);
    for (const auto& [k, v] : settings) kv.set(k, v);
    return TrainConfig::from(kv);
}

py::dict sample_dict(const SegSample& s) {
    py::dict d;
    d["id"] = s.id;
    d["rgb"] = to_array(s.rgb);
    d["thermal"] = to_array(s.thermal);
    d["labels"] = grid_array<std::int32_t>(s.labels);
    return d;
}

py::dict metrics_dict(const ConfusionMatrix& cm, const MetricOptions& options) {
    py::dict d;
    d["macc"] = macc(cm, options);
    d["miou"] = miou(cm, options);
    d["class_accuracy"] = class_accuracy(cm);
    d["class_iou"] = class_iou(cm);
    d["pixels"] = cm.total();
    return d;
}

class Model {
public:
    Model(std::size_t num_classes, const std::map<std::string, std::string>& settings, const std::string& checkpoint)
        : config_(config_from(settings, "")), net_(config_.model_config(num_classes), config_.seed) {
        if (!checkpoint.empty()) load_trained(net_, checkpoint);
    }

    FloatArray logits(const FloatArray& rgb, const FloatArray& thermal) const {
        return to_array(net_.predict_logits(to_tensor(rgb), to_tensor(thermal)));
    }

    py::array_t<std::int32_t> predict(const FloatArray& rgb, const FloatArray& thermal) const {
        return grid_array<std::int32_t>(net_.predict(to_tensor(rgb), to_tensor(thermal)));
    }

    py::dict parameters() const {
        ParameterReport r = net_.parameter_report();
        py::dict d;
        d["total"] = r.total;
        d["inference"] = r.inference;
        py::dict groups;
        for (const auto& [name, n] : r.groups) groups[py::str(name)] = n;
        d["groups"] = groups;
        return d;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [name, p] : net_.params().all()) out.push_back(name);
        return out;
    }

    void save(const std::string& path) const { save_checkpoint(net_.params(), path); }

private:
    TrainConfig config_;
    CaiNet net_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "RGB-thermal semantic segmentation core";

    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<LabelRangeError>(m, "LabelRangeError", PyExc_IndexError);
    py::register_exception<PrerequisiteError>(m, "PrerequisiteError", PyExc_RuntimeError);
    py::register_exception<ClassCountError>(m, "ClassCountError", PyExc_RuntimeError);

    m.def("synth_scene", [](std::uint64_t seed, std::size_t size, std::size_t classes) {
        return sample_dict(synth_scene(seed, {size, size, classes}));
    }, py::arg("seed"), py::arg("size") = 32, py::arg("classes") = 3);

    m.def("synth_corpus", [](const std::string& root, std::size_t train, std::size_t val, std::size_t test,
                             std::uint64_t seed, std::size_t size, std::size_t classes, double darken) {
        SynthCorpusOptions o;
        o.train = train;
        o.val = val;
        o.test = test;
        o.seed = seed;
        o.scene.height = o.scene.width = size;
        o.scene.num_classes = classes;
        o.darken_factor = darken;
        write_corpus(root, synth_corpus(o));
    }, py::arg("root"), py::arg("train") = 48, py::arg("val") = 8, py::arg("test") = 8, py::arg("seed") = 7,
       py::arg("size") = 32, py::arg("classes") = 3, py::arg("darken") = 1.0);

    m.def("load_split", [](const std::string& root, const std::string& split) {
        Corpus c = load_corpus(root);
        py::list out;
        const auto& samples = split == "train" ? c.train : split == "val" ? c.val : c.test;
        for (const auto& s : samples) out.append(sample_dict(s));
        return out;
    }, py::arg("root"), py::arg("split") = "val");

    m.def("train", [](const std::map<std::string, std::string>& settings, const std::string& config) {
        TrainConfig c = config_from(settings, config);
        Corpus corpus = load_corpus(c.data, c.norm);
        std::vector<StageResult> results;
        {
            py::gil_scoped_release release;
            results = staged_train(c, corpus);
        }
        py::list out;
        for (const auto& r : results) {
            py::dict d;
            d["stage"] = stage_name(r.stage);
            d["steps"] = r.steps;
            d["early_stopped"] = r.early_stopped;
            d["best_val_miou"] = r.best_val_miou;
            d["val_history"] = r.val_history;
            d["checkpoint"] = r.checkpoint.string();
            d["log"] = r.log.string();
            out.append(d);
        }
        return out;
    }, py::arg("settings") = std::map<std::string, std::string>{}, py::arg("config") = "",
       "Staged training. `settings` holds key=value pairs layered over the optional config file.");

    m.def("evaluate", [](const std::string& checkpoint, const std::string& split,
                         const std::map<std::string, std::string>& settings) {
        TrainConfig c = config_from(settings, "");
        Corpus corpus = load_corpus(c.data, c.norm);
        CaiNet net(c.model_config(c.num_classes ? c.num_classes : corpus.manifest.num_classes), c.seed);
        load_trained(net, checkpoint);
        const auto& samples = split == "train" ? corpus.train : split == "val" ? corpus.val : corpus.test;
        return metrics_dict(evaluate(net, samples, Head::P4, c.eval_threads), c.metrics);
    }, py::arg("checkpoint"), py::arg("split") = "val",
       py::arg("settings") = std::map<std::string, std::string>{});

    py::class_<Model>(m, "Model")
        .def(py::init<std::size_t, const std::map<std::string, std::string>&, const std::string&>(),
             py::arg("num_classes") = 3, py::arg("settings") = std::map<std::string, std::string>{},
             py::arg("checkpoint") = "")
        .def("logits", &Model::logits, py::arg("rgb"), py::arg("thermal"))
        .def("predict", &Model::predict, py::arg("rgb"), py::arg("thermal"))
        .def("parameters", &Model::parameters)
        .def("parameter_names", &Model::names)
        .def("save", &Model::save, py::arg("path"));

    m.def("aux_targets", [](const IntArray& labels, std::size_t dilation, double sigma) {
        AuxTargets t = make_aux_targets(to_labels(labels), {dilation, sigma});
        return py::make_tuple(grid_array<std::uint8_t>(t.binary), grid_array<std::uint8_t>(t.boundary),
                              grid_array<float>(t.attention_q));
    }, py::arg("labels"), py::arg("dilation") = 5, py::arg("sigma") = 2.0);

    m.def("metrics", [](const IntArray& pred, const IntArray& truth, std::size_t num_classes) {
        ConfusionMatrix cm(num_classes);
        cm.accumulate(to_labels(pred), to_labels(truth));
        return metrics_dict(cm, {});
    }, py::arg("pred"), py::arg("truth"), py::arg("num_classes"));

    m.def("lovasz_softmax", [](const FloatArray& logits, const IntArray& labels) {
        return double(lovasz_softmax(to_tensor(logits), to_labels(labels)).item());
    }, py::arg("logits"), py::arg("labels"));

    m.def("attention_loss", [](const FloatArray& pred, const FloatArray& q) {
        return double(attention_loss(to_tensor(pred), to_tensor(q)).item());
    }, py::arg("pred"), py::arg("q"));

    m.def("enet_class_weights", [](const std::vector<double>& freqs) { return enet_class_weights(freqs).w; },
          py::arg("frequencies"));

    m.def("gradcheck", [](std::size_t instances, double tolerance) {
        std::vector<GradcheckLine> lines;
        {
            py::gil_scoped_release release;
            lines = run_gradchecks(module_gradchecks(), instances, tolerance);
        }
        py::list out;
        for (const auto& l : lines) out.append(py::make_tuple(l.name, l.worst, l.pass));
        return out;
    }, py::arg("instances") = 5, py::arg("tolerance") = 1e-3);
}
