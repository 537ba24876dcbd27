#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <string>

#include "phishstream/checkpoint.hpp"
#include "phishstream/datagen.hpp"
#include "phishstream/features.hpp"
#include "phishstream/train.hpp"

namespace py = pybind11;
using namespace phishstream;

namespace {

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

/// A featurized event stream with node labels.
struct Dataset {
  EventStream stream;
  NodeLabels labels;
  FeatureAudit audit;

  static Dataset build(EventStream stream, const LabelSet& label_set) {
    Dataset d;
    d.stream = std::move(stream);
    d.audit = featurize_stream(d.stream);
    d.labels = build_node_labels(d.stream, label_set);
    return d;
  }

  static Dataset generate(const GenConfig& config) {
    const auto g = generate_stream(config);
    return build(stream_events(g.records, {.strict_order = true}), g.labels);
  }

  static Dataset from_files(const std::vector<std::string>& events, const std::string& labels,
                            bool strict_order) {
    return build(stream_events_from_files(events, {.strict_order = strict_order}, nullptr),
                 load_labels(labels));
  }

  Mat features(bool normalized) const {
    Mat out(static_cast<Eigen::Index>(stream.size()), kEdgeFeatureDim);
    for (std::size_t i = 0; i < stream.size(); ++i) {
      const auto& f = normalized ? stream[i].edge_features.normalized : stream[i].edge_features.raw;
      for (std::size_t j = 0; j < kEdgeFeatureDim; ++j) {
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f[j];
      }
    }
    return out;
  }

  template <typename F>
  std::vector<std::int64_t> column(F&& f) const {
    std::vector<std::int64_t> out;
    out.reserve(stream.size());
    for (const auto& ev : stream) out.push_back(static_cast<std::int64_t>(f(ev)));
    return out;
  }
};

AttentionSource parse_source(const std::string& s) {
  if (s == "matrix") return AttentionSource::kDecayedMatrix;
  if (s == "mean") return AttentionSource::kMeanVector;
  throw InvalidConfig("attention_source must be 'matrix' or 'mean', got '" + s + "'");
}

std::string source_name(AttentionSource s) {
  return s == AttentionSource::kMeanVector ? "mean" : "matrix";
}

py::dict result_dict(const TrainResult& r) {
  py::list epochs;
  for (const auto& e : r.epochs) {
    py::dict d;
    d["epoch"] = e.epoch;
    d["loss_mean"] = e.loss_mean;
    d["val"] = to_python(to_json(e.val));
    d["test"] = to_python(to_json(e.test));
    epochs.append(d);
  }
  py::dict out;
  out["best_epoch"] = r.best_epoch;
  out["positive_weight"] = r.positive_weight;
  out["epochs"] = epochs;
  out["val"] = to_python(to_json(r.best().val));
  out["test"] = to_python(to_json(r.best().test));
  out["updates"] = r.audit.total_updates;
  out["updates_train_only"] = r.audit.clean();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Streaming phishing detection on a continuous-time transaction graph";
  m.attr("__version__") = PHISHSTREAM_VERSION;

  py::register_exception<Error>(m, "PhishstreamError", PyExc_ValueError);

  py::class_<GenConfig>(m, "GenConfig")
      .def(py::init<>())
      .def_readwrite("n_nodes", &GenConfig::n_nodes)
      .def_readwrite("n_events", &GenConfig::n_events)
      .def_readwrite("n_phishing", &GenConfig::n_phishing)
      .def_readwrite("seed", &GenConfig::seed)
      .def_readwrite("burst_size", &GenConfig::burst_size)
      .def_readwrite("funnel_count", &GenConfig::funnel_count)
      .def_readwrite("campaigns", &GenConfig::campaigns)
      .def_readwrite("n_decoys", &GenConfig::n_decoys)
      .def_readwrite("n_light_users", &GenConfig::n_light_users)
      .def("to_dict", [](const GenConfig& c) { return to_python(to_json(c)); });

  m.def(
      "write_synthetic",
      [](const GenConfig& config, const std::string& tx_path, const std::string& labels_path) {
        const auto g = generate_stream(config);
        std::ofstream tx(tx_path), lab(labels_path);
        if (!tx || !lab) throw Error("cannot open output files " + tx_path + ", " + labels_path);
        write_transactions(tx, g.records);
        write_labels(lab, g.labels);
        return g.event_count;
      },
      py::arg("config"), py::arg("tx_path"), py::arg("labels_path"),
      "Generate a synthetic stream and write transaction and label CSVs. Returns the event count.");

  py::class_<Dataset>(m, "Dataset")
      .def_static("generate", &Dataset::generate, py::arg("config") = GenConfig{})
      .def_static("from_files", &Dataset::from_files, py::arg("events"), py::arg("labels"),
                  py::arg("strict_order") = false)
      .def_property_readonly("n_events", [](const Dataset& d) { return d.stream.size(); })
      .def_property_readonly("n_nodes", [](const Dataset& d) { return d.stream.node_count(); })
      .def_property_readonly("addresses",
                             [](const Dataset& d) { return d.stream.addresses().addresses(); })
      .def_property_readonly("labels", [](const Dataset& d) { return d.labels; },
                             "Per node: 1 phishing, 0 not, -1 unlabeled.")
      .def_property_readonly("src", [](const Dataset& d) { return d.column([](auto& e) { return e.src; }); })
      .def_property_readonly("dst", [](const Dataset& d) { return d.column([](auto& e) { return e.dst; }); })
      .def_property_readonly("timestamps",
                             [](const Dataset& d) { return d.column([](auto& e) { return e.timestamp; }); })
      .def("edge_features", &Dataset::features, py::arg("normalized") = true)
      .def_property_readonly("normalization_causal", [](const Dataset& d) { return d.audit.causal(); });

  py::class_<ModelParams>(m, "ModelParams")
      .def_static("initialize", &ModelParams::initialize, py::arg("dim"), py::arg("seed"))
      .def_static("parameter_count", &ModelParams::parameter_count, py::arg("dim"))
      .def_property_readonly("dim", &ModelParams::dim)
      .def("tensors", [](const ModelParams& p) {
        py::dict out;
        p.for_each_tensor([&](std::string_view name, Eigen::Map<const Mat> t) {
          out[py::str(std::string(name))] = Mat(t);
        });
        return out;
      });

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("positive_weight", &TrainConfig::positive_weight)
      .def_readwrite("grad_clip", &TrainConfig::grad_clip)
      .def_property(
          "threshold_policy", [](const TrainConfig& c) { return c.threshold.to_string(); },
          [](TrainConfig& c, const std::string& s) { c.threshold = ThresholdPolicy::parse(s); })
      .def_property(
          "dim", [](const TrainConfig& c) { return c.engine.dim; },
          [](TrainConfig& c, Eigen::Index v) { c.engine.dim = v; })
      .def_property(
          "storage_len", [](const TrainConfig& c) { return c.engine.storage_len; },
          [](TrainConfig& c, std::size_t v) { c.engine.storage_len = v; })
      .def_property(
          "broadcast_k", [](const TrainConfig& c) { return c.engine.broadcast_k; },
          [](TrainConfig& c, std::size_t v) { c.engine.broadcast_k = v; })
      .def_property(
          "decay_gamma", [](const TrainConfig& c) { return c.engine.decay_gamma; },
          [](TrainConfig& c, double v) { c.engine.decay_gamma = v; })
      .def_property(
          "attention_source", [](const TrainConfig& c) { return source_name(c.engine.attention_source); },
          [](TrainConfig& c, const std::string& s) { c.engine.attention_source = parse_source(s); })
      .def_property(
          "disable_decay", [](const TrainConfig& c) { return c.engine.disable_decay; },
          [](TrainConfig& c, bool v) { c.engine.disable_decay = v; })
      .def_property(
          "disable_broadcast", [](const TrainConfig& c) { return c.engine.disable_broadcast; },
          [](TrainConfig& c, bool v) { c.engine.disable_broadcast = v; })
      .def_property(
          "disable_storage", [](const TrainConfig& c) { return c.engine.disable_storage; },
          [](TrainConfig& c, bool v) { c.engine.disable_storage = v; });

  m.def(
      "aggregate_storage",
      [](const Mat& contents, std::size_t capacity, double gamma, bool uniform) {
        StorageQueue q(capacity);
        for (Eigen::Index i = 0; i < contents.rows(); ++i) q.push({contents.row(i).transpose(), i});
        const auto decay =
            uniform ? DecayProfile::uniform(capacity) : DecayProfile::geometric(capacity, gamma);
        return aggregate_storage(q, decay, contents.cols()).mean;
      },
      py::arg("contents"), py::arg("capacity"), py::arg("gamma") = 0.9, py::arg("uniform") = false,
      "Push rows oldest first into a FIFO of the given capacity and return the decayed mean.");

  m.def("softmax", &softmax, py::arg("scores"));
  m.def(
      "attention_head",
      [](const Vec& query, const Mat& kv, const Mat& wq, const Mat& wk, const Mat& wv) {
        const auto h = attention_head(query, kv, HeadParams{wq, wk, wv});
        return py::make_tuple(h.weights, h.output);
      },
      py::arg("query"), py::arg("kv"), py::arg("w_query"), py::arg("w_key"), py::arg("w_value"),
      "Single scaled dot-product head. Returns (weights, output).");
  m.def(
      "multi_head_attention",
      [](const Vec& z_prev, const Mat& kv, const ModelParams& p) {
        return multi_head(z_prev, kv, p).z_tilde;
      },
      py::arg("z_prev"), py::arg("kv"), py::arg("params"));

  m.def(
      "auc",
      [](const std::vector<double>& s, const std::vector<int>& y) { return compute_auc(s, y); },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "tpr_fpr",
      [](const std::vector<double>& s, const std::vector<int>& y, double threshold) {
        const auto r = compute_tpr_fpr(s, y, threshold);
        return py::make_tuple(r.tpr, r.fpr);
      },
      py::arg("scores"), py::arg("labels"), py::arg("threshold"));
  m.def(
      "youden_threshold",
      [](const std::vector<double>& s, const std::vector<int>& y) { return youden_threshold(s, y); },
      py::arg("scores"), py::arg("labels"));

  m.def(
      "train",
      [](const Dataset& d, const TrainConfig& c) {
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train_run(d.stream, d.labels, c);
        }
        return py::make_tuple(r.params, result_dict(r));
      },
      py::arg("dataset"), py::arg("config") = TrainConfig{},
      "Train and evaluate. Returns (params, metrics dict).");
  m.def(
      "evaluate",
      [](const Dataset& d, const ModelParams& p, const TrainConfig& c) {
        EvalOutcome r;
        {
          py::gil_scoped_release release;
          r = evaluate(d.stream, d.labels, p, c);
        }
        py::dict out;
        out["val"] = to_python(to_json(r.val));
        out["test"] = to_python(to_json(r.test));
        return out;
      },
      py::arg("dataset"), py::arg("params"), py::arg("config") = TrainConfig{});
  m.def(
      "ablate",
      [](const Dataset& d, const TrainConfig& c) {
        std::vector<AblationEntry> entries;
        {
          py::gil_scoped_release release;
          entries = run_ablation(d.stream, d.labels, c);
        }
        py::dict out;
        for (const auto& e : entries) out[py::str(e.name)] = result_dict(e.result);
        return out;
      },
      py::arg("dataset"), py::arg("config") = TrainConfig{},
      "Run full, no_decay, no_broadcast and no_storage. Returns {name: metrics}.");

  m.def(
      "save_checkpoint",
      [](const std::string& path, const ModelParams& p, const TrainConfig& c, double positive_weight) {
        CheckpointMeta meta;
        meta.seed = c.seed;
        meta.engine = c.engine;
        meta.learning_rate = c.learning_rate;
        meta.epochs = static_cast<std::uint32_t>(c.epochs);
        meta.positive_weight = positive_weight;
        save_checkpoint_file(path, p, meta);
      },
      py::arg("path"), py::arg("params"), py::arg("config"), py::arg("positive_weight") = 0.0);
  m.def(
      "load_checkpoint",
      [](const std::string& path) {
        const auto ck = load_checkpoint_file(path);
        TrainConfig c;
        c.seed = ck.meta.seed;
        c.engine = ck.meta.engine;
        c.learning_rate = ck.meta.learning_rate;
        c.epochs = static_cast<int>(ck.meta.epochs);
        return py::make_tuple(ck.params, c);
      },
      py::arg("path"), "Returns (params, config).");
}
