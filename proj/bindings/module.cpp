#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "idtrack/dataset_io.hpp"
#include "idtrack/inference.hpp"
#include "idtrack/metrics.hpp"
#include "idtrack/model.hpp"
#include "idtrack/scene.hpp"
#include "idtrack/training.hpp"

namespace py = pybind11;
using namespace idtrack;

PYBIND11_MODULE(_idtrack, m) {
    m.doc() = "Multi-object tracking by in-context ID prediction: synthetic scenes, "
              "ID dictionary + transformer decoder, online tracker, CLEAR/IDF1 metrics.";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<DataError>(m, "DataError");
    py::register_exception<NumericError>(m, "NumericError");
    py::register_exception<CapacityError>(m, "CapacityError");

    py::class_<Box>(m, "Box")
        .def(py::init([](float x, float y, float w, float h) { return Box{x, y, w, h}; }),
             py::arg("x"), py::arg("y"), py::arg("w"), py::arg("h"))
        .def_readwrite("x", &Box::x)
        .def_readwrite("y", &Box::y)
        .def_readwrite("w", &Box::w)
        .def_readwrite("h", &Box::h)
        .def("__repr__", [](const Box& b) {
            return "Box(" + std::to_string(b.x) + ", " + std::to_string(b.y) + ", " +
                   std::to_string(b.w) + ", " + std::to_string(b.h) + ")";
        });
    m.def("iou", &iou, py::arg("a"), py::arg("b"));

    py::class_<Detection>(m, "Detection")
        .def(py::init<>())
        .def_readwrite("box", &Detection::box)
        .def_readwrite("confidence", &Detection::confidence)
        .def_readwrite("feature", &Detection::feature);

    py::class_<LabeledDetection>(m, "LabeledDetection")
        .def(py::init<>())
        .def_readwrite("det", &LabeledDetection::det)
        .def_readwrite("gt_track_id", &LabeledDetection::gt_track_id);

    py::class_<LabeledSequence>(m, "LabeledSequence")
        .def(py::init<>())
        .def_readwrite("feature_dim", &LabeledSequence::feature_dim)
        .def_readwrite("frames", &LabeledSequence::frames)
        .def("__len__", [](const LabeledSequence& s) { return s.frames.size(); });

    py::class_<MotLine>(m, "MotLine")
        .def(py::init<>())
        .def_readwrite("frame", &MotLine::frame)
        .def_readwrite("id", &MotLine::id)
        .def_readwrite("box", &MotLine::box)
        .def_readwrite("conf", &MotLine::conf)
        .def("__repr__", [](const MotLine& l) { return format_mot_line(l); });

    py::class_<SceneConfig>(m, "SceneConfig")
        .def(py::init<>())
        .def_readwrite("num_frames", &SceneConfig::num_frames)
        .def_readwrite("max_objects", &SceneConfig::max_objects)
        .def_readwrite("feature_dim", &SceneConfig::feature_dim)
        .def_readwrite("appearance_noise_sigma", &SceneConfig::appearance_noise_sigma)
        .def_readwrite("identity_min_separation", &SceneConfig::identity_min_separation)
        .def_readwrite("occlusion_prob_per_frame", &SceneConfig::occlusion_prob_per_frame)
        .def_readwrite("occlusion_duration_min", &SceneConfig::occlusion_duration_min)
        .def_readwrite("occlusion_duration_max", &SceneConfig::occlusion_duration_max)
        .def_readwrite("birth_prob_per_frame", &SceneConfig::birth_prob_per_frame)
        .def_readwrite("death_prob_per_frame", &SceneConfig::death_prob_per_frame)
        .def_readwrite("false_positive_rate", &SceneConfig::false_positive_rate)
        .def_readwrite("seed", &SceneConfig::seed);
    m.def("generate_sequence", &generate_sequence, py::arg("config"));
    m.def("generate_corpus", &generate_corpus, py::arg("config"), py::arg("n_sequences"),
          py::arg("base_seed"));

    m.def("write_dataset", &write_dataset, py::arg("sequences"), py::arg("dir"));
    m.def("read_dataset", &read_dataset, py::arg("dir"));
    m.def("read_mot_file", &read_mot_file, py::arg("path"));
    m.def("write_mot_file", &write_mot_file, py::arg("path"), py::arg("lines"));

    py::class_<DecoderConfig>(m, "DecoderConfig")
        .def(py::init<>())
        .def_readwrite("num_layers", &DecoderConfig::num_layers)
        .def_readwrite("num_heads", &DecoderConfig::num_heads)
        .def_readwrite("model_width", &DecoderConfig::model_width)
        .def_readwrite("feedforward_width", &DecoderConfig::feedforward_width)
        .def_readwrite("max_rel_offset", &DecoderConfig::max_rel_offset)
        .def_readwrite("self_attention_enabled", &DecoderConfig::self_attention_enabled)
        .def_readwrite("dropout_rate", &DecoderConfig::dropout_rate)
        .def_readwrite("seed", &DecoderConfig::seed);

    py::class_<Model>(m, "Model")
        .def_property_readonly("K", &Model::K)
        .def_property_readonly("C", &Model::C)
        .def_property_readonly("dictionary",
                               [](const Model& mod) { return Mat(mod.dict.words); });
    m.def("init_model", &init_model, py::arg("K"), py::arg("C"), py::arg("decoder_config"),
          py::arg("dict_init_sigma") = 0.02, py::arg("dict_seed") = 0);
    m.def("load_model", [](const std::string& path) {
        return model_from_checkpoint(load_checkpoint(path));
    }, py::arg("checkpoint_path"));
    m.def("save_model", [](const Model& mod, const std::string& path) {
        save_checkpoint(path, checkpoint_from_model(mod));
    }, py::arg("model"), py::arg("checkpoint_path"));

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("T", &TrainConfig::T)
        .def_readwrite("interval_min", &TrainConfig::interval_min)
        .def_readwrite("interval_max", &TrainConfig::interval_max)
        .def_readwrite("lambda_occ", &TrainConfig::lambda_occ)
        .def_readwrite("lambda_sw", &TrainConfig::lambda_sw)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("decay_epochs", &TrainConfig::decay_epochs)
        .def_readwrite("total_epochs", &TrainConfig::total_epochs)
        .def_readwrite("steps_per_epoch", &TrainConfig::steps_per_epoch)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("grad_clip_norm", &TrainConfig::grad_clip_norm)
        .def_readwrite("seed", &TrainConfig::seed);

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("checkpoint_path", &TrainResult::checkpoint_path)
        .def_readonly("loss_curve", &TrainResult::loss_curve)
        .def_readonly("diverged", &TrainResult::diverged)
        .def_property_readonly("model",
                               [](const TrainResult& r) { return r.model; });
    m.def("train",
          [](const std::vector<LabeledSequence>& corpus, const TrainConfig& cfg,
             const DecoderConfig& dec_cfg, int K, int C, const std::string& out_dir) {
              return train(corpus, cfg, dec_cfg, K, C, out_dir);
          },
          py::arg("corpus"), py::arg("train_config"), py::arg("decoder_config"), py::arg("K"),
          py::arg("C"), py::arg("out_dir"));

    m.def("id_loss", &id_loss, py::arg("logits"), py::arg("targets"),
          "Mean cross-entropy over targets >= 0 (label indices 0..K-1, K = newborn).");

    py::class_<InferenceConfig>(m, "InferenceConfig")
        .def(py::init<>())
        .def_readwrite("lambda_det", &InferenceConfig::lambda_det)
        .def_readwrite("lambda_new", &InferenceConfig::lambda_new)
        .def_readwrite("lambda_id", &InferenceConfig::lambda_id)
        .def_readwrite("use_hungarian", &InferenceConfig::use_hungarian)
        .def_readwrite("miss_tolerance", &InferenceConfig::miss_tolerance)
        .def_readwrite("restrict_to_active", &InferenceConfig::restrict_to_active)
        .def_readwrite("strict_dedup", &InferenceConfig::strict_dedup);
    m.def("run_sequence", &run_sequence, py::arg("sequence"), py::arg("model"),
          py::arg("config"));

    m.def("hungarian", &hungarian, py::arg("cost"),
          "Min-cost assignment; returns (row, col) pairs of size min(rows, cols).");

    py::class_<EvalCounts>(m, "EvalCounts")
        .def_readonly("idtp", &EvalCounts::idtp)
        .def_readonly("idfp", &EvalCounts::idfp)
        .def_readonly("idfn", &EvalCounts::idfn)
        .def_readonly("fp", &EvalCounts::fp)
        .def_readonly("fn", &EvalCounts::fn)
        .def_readonly("idsw", &EvalCounts::idsw)
        .def_readonly("gt_total", &EvalCounts::gt_total)
        .def_readonly("pred_total", &EvalCounts::pred_total);
    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("idf1", &EvalReport::idf1)
        .def_readonly("mota", &EvalReport::mota)
        .def_readonly("id_switches", &EvalReport::id_switches)
        .def_readonly("association_accuracy", &EvalReport::association_accuracy)
        .def_readonly("sequence_names", &EvalReport::sequence_names)
        .def_readonly("per_sequence", &EvalReport::per_sequence);
    m.def("evaluate_sequence", &evaluate_sequence, py::arg("pred"), py::arg("gt"),
          py::arg("iou_threshold") = 0.5);
    m.def("evaluate_dataset", &evaluate_dataset, py::arg("preds"), py::arg("gts"),
          py::arg("names"), py::arg("iou_threshold") = 0.5);
    m.def("idf1", &idf1, py::arg("counts"));
    m.def("mota", &mota, py::arg("counts"));
    m.def("association_accuracy", &association_accuracy, py::arg("pred"), py::arg("gt"),
          py::arg("iou_threshold") = 0.5);

    py::class_<BaselineConfig>(m, "BaselineConfig")
        .def(py::init<>())
        .def_readwrite("lambda_det", &BaselineConfig::lambda_det)
        .def_readwrite("lambda_new", &BaselineConfig::lambda_new)
        .def_readwrite("similarity_threshold", &BaselineConfig::similarity_threshold)
        .def_readwrite("window_len", &BaselineConfig::window_len)
        .def_readwrite("miss_tolerance", &BaselineConfig::miss_tolerance)
        .def_readwrite("use_hungarian", &BaselineConfig::use_hungarian);
    m.def("reid_baseline_tracker", &reid_baseline_tracker, py::arg("sequence"),
          py::arg("config"));
}
