// idtrack: synthetic multi-object tracking with in-context ID prediction.
// Subcommands: synth | train | track | eval | ablate.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "idtrack/config.hpp"
#include "idtrack/dataset_io.hpp"
#include "idtrack/inference.hpp"
#include "idtrack/metrics.hpp"
#include "idtrack/model.hpp"
#include "idtrack/scene.hpp"
#include "idtrack/training.hpp"
#include "idtrack/utils.hpp"

namespace fs = std::filesystem;
using idtrack::KVConfig;
using nlohmann::json;

namespace {

std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::string resolve(const std::string& workdir, const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (fs::path(workdir) / p).string();
}

KVConfig load_config(const std::string& path) {
    if (!fs::exists(path))
        throw idtrack::ConfigError("config file not found: " + path);
    return KVConfig::parse_file(path);
}

// IDTRACK_SEED overrides any config seed.
void apply_env_seed(KVConfig& cfg) {
    if (const char* env = std::getenv("IDTRACK_SEED")) {
        try {
            (void)std::stoull(env);
        } catch (const std::exception&) {
            throw idtrack::ConfigError(std::string("IDTRACK_SEED is not an integer: ") + env);
        }
        cfg.set("seed", env);
    }
}

struct Manifest {
    json j;
    std::string path;

    static Manifest begin(const std::string& out_dir, const std::string& subcommand,
                          const KVConfig& cfg, const std::vector<std::string>& inputs) {
        fs::create_directories(out_dir);
        Manifest m;
        m.path = (fs::path(out_dir) / "manifest.json").string();
        m.j["subcommand"] = subcommand;
        m.j["status"] = "running";
        m.j["started_utc"] = utc_now();
        m.j["seed"] = cfg.get_int("seed", 0);
        m.j["inputs"] = inputs;
        m.j["output_dir"] = out_dir;
        json kv = json::object();
        for (const auto& [k, v] : cfg.entries()) kv[k] = v;
        m.j["config"] = kv;
        m.write();
        return m;
    }

    void write() const {
        std::ofstream out(path);
        out << j.dump(2) << "\n";
    }

    void finalize(const std::string& out_dir) {
        json artifacts = json::object();
        for (const auto& entry : fs::recursive_directory_iterator(out_dir)) {
            if (!entry.is_regular_file()) continue;
            std::string rel = fs::relative(entry.path(), out_dir).string();
            if (rel == "manifest.json") continue;
            artifacts[rel] = idtrack::sha256_hex_file(entry.path().string());
        }
        j["artifacts"] = artifacts;
        j["finished_utc"] = utc_now();
        j["status"] = "done";
        write();
    }
};

idtrack::SceneConfig parse_scene_config(const KVConfig& c) {
    idtrack::SceneConfig s;
    s.num_frames = static_cast<int>(c.get_int("num_frames", s.num_frames));
    s.max_objects = static_cast<int>(c.get_int("max_objects", s.max_objects));
    s.feature_dim = static_cast<int>(c.get_int("feature_dim", s.feature_dim));
    s.appearance_noise_sigma = c.get_real("appearance_noise_sigma", s.appearance_noise_sigma);
    s.identity_min_separation = c.get_real("identity_min_separation", s.identity_min_separation);
    s.occlusion_prob_per_frame = c.get_real("occlusion_prob", s.occlusion_prob_per_frame);
    s.occlusion_duration_min =
        static_cast<int>(c.get_int("occlusion_duration_min", s.occlusion_duration_min));
    s.occlusion_duration_max =
        static_cast<int>(c.get_int("occlusion_duration_max", s.occlusion_duration_max));
    s.birth_prob_per_frame = c.get_real("birth_prob", s.birth_prob_per_frame);
    s.death_prob_per_frame = c.get_real("death_prob", s.death_prob_per_frame);
    s.false_positive_rate = c.get_real("false_positive_rate", s.false_positive_rate);
    s.confidence_lo = c.get_real("confidence_lo", s.confidence_lo);
    s.confidence_hi = c.get_real("confidence_hi", s.confidence_hi);
    s.arena_w = c.get_real("arena_w", s.arena_w);
    s.arena_h = c.get_real("arena_h", s.arena_h);
    s.velocity_sigma = c.get_real("velocity_sigma", s.velocity_sigma);
    s.seed = static_cast<std::uint64_t>(c.get_int("seed", 0));
    s.validate();
    return s;
}

idtrack::TrainConfig parse_train_config(const KVConfig& c) {
    idtrack::TrainConfig t;
    t.T = static_cast<int>(c.get_int("T", t.T));
    t.interval_min = static_cast<int>(c.get_int("interval_min", t.interval_min));
    t.interval_max = static_cast<int>(c.get_int("interval_max", t.interval_max));
    t.lambda_occ = c.get_real("lambda_occ", t.lambda_occ);
    t.lambda_sw = c.get_real("lambda_sw", t.lambda_sw);
    t.learning_rate = c.get_real("learning_rate", t.learning_rate);
    if (c.has("decay_epochs"))
        for (double v : c.get_real_list("decay_epochs"))
            t.decay_epochs.push_back(static_cast<int>(v));
    t.total_epochs = static_cast<int>(c.get_int("total_epochs", t.total_epochs));
    t.steps_per_epoch = static_cast<int>(c.get_int("steps_per_epoch", t.steps_per_epoch));
    t.batch_size = static_cast<int>(c.get_int("batch_size", t.batch_size));
    t.grad_clip_norm = c.get_real("grad_clip_norm", t.grad_clip_norm);
    t.seed = static_cast<std::uint64_t>(c.get_int("seed", 0));
    t.objective = idtrack::objective_from_string(c.get_string("objective", "id_pred"));
    t.supervise_newborns = c.get_bool("supervise_newborns", t.supervise_newborns);
    t.checkpoint_every_steps =
        static_cast<int>(c.get_int("checkpoint_every_steps", t.checkpoint_every_steps));
    t.validate();
    return t;
}

idtrack::DecoderConfig parse_decoder_config(const KVConfig& c, int C, int T) {
    idtrack::DecoderConfig d;
    d.num_layers = static_cast<int>(c.get_int("num_layers", d.num_layers));
    d.num_heads = static_cast<int>(c.get_int("num_heads", d.num_heads));
    d.model_width = 2 * C;
    d.feedforward_width = static_cast<int>(c.get_int("feedforward_width", 0));
    d.max_rel_offset = static_cast<int>(c.get_int("max_rel_offset", T));
    d.self_attention_enabled = c.get_bool("self_attention", true);
    d.dropout_rate = c.get_real("dropout_rate", 0.0);
    d.seed = static_cast<std::uint64_t>(c.get_int("seed", 0));
    d.validate();
    return d;
}

idtrack::InferenceConfig parse_infer_config(const KVConfig& c) {
    idtrack::InferenceConfig i;
    i.lambda_det = c.get_real("lambda_det", i.lambda_det);
    i.lambda_new = c.get_real("lambda_new", i.lambda_new);
    i.lambda_id = c.get_real("lambda_id", i.lambda_id);
    i.use_hungarian = c.get_bool("hungarian", i.use_hungarian);
    i.miss_tolerance = static_cast<int>(c.get_int("miss_tolerance", i.miss_tolerance));
    i.restrict_to_active = c.get_bool("restrict_to_active", i.restrict_to_active);
    i.strict_dedup = c.get_bool("strict_dedup", i.strict_dedup);
    i.validate();
    return i;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir) {
    KVConfig cfg = load_config(config_path);
    apply_env_seed(cfg);
    idtrack::SceneConfig scene = parse_scene_config(cfg);
    int n = static_cast<int>(cfg.get_int("num_sequences", 10));
    Manifest m = Manifest::begin(out_dir, "synth", cfg, {config_path});
    auto corpus = idtrack::generate_corpus(scene, n, scene.seed);
    idtrack::write_dataset(corpus, out_dir);
    m.finalize(out_dir);
    std::cout << "wrote " << n << " sequences to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, const std::string& resume_path) {
    KVConfig cfg = load_config(config_path);
    apply_env_seed(cfg);
    idtrack::TrainConfig tc = parse_train_config(cfg);
    int K = static_cast<int>(cfg.get_int("K", 50));
    int C = static_cast<int>(cfg.get_int("C", 32));
    idtrack::DecoderConfig dc = parse_decoder_config(cfg, C, tc.T);

    auto corpus = idtrack::read_dataset(data_dir);
    Manifest m = Manifest::begin(out_dir, "train", cfg, {config_path, data_dir});

    std::optional<idtrack::Model> resume;
    if (!resume_path.empty())
        resume = idtrack::model_from_checkpoint(idtrack::load_checkpoint(resume_path));
    idtrack::TrainResult res = idtrack::train(corpus, tc, dc, K, C, out_dir,
                                              resume ? &*resume : nullptr);

    idtrack::PlotSeries s;
    s.label = "train loss";
    for (std::size_t i = 0; i < res.loss_curve.size(); ++i) {
        s.x.push_back(static_cast<double>(i + 1));
        s.y.push_back(res.loss_curve[i]);
    }
    if (!s.x.empty())
        idtrack::write_svg_line_plot((fs::path(out_dir) / "loss_curve.svg").string(),
                                     "training loss", "step", "loss", {s});
    m.finalize(out_dir);
    std::cout << "checkpoint: " << res.checkpoint_path << "\n";
    return 0;
}

int cmd_track(const std::string& ckpt_path, const std::string& data_dir,
              const std::string& out_dir, const std::string& config_path, const CLI::App* sub) {
    KVConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    // flags override config file values
    auto flag_real = [&](const std::string& flag, const std::string& key) {
        if (sub->count(flag))
            cfg.set(key, idtrack::double_repr(sub->get_option(flag)->as<double>()));
    };
    flag_real("--lambda-det", "lambda_det");
    flag_real("--lambda-new", "lambda_new");
    flag_real("--lambda-id", "lambda_id");
    if (sub->count("--hungarian")) cfg.set("hungarian", "true");
    if (sub->count("--miss-tolerance"))
        cfg.set("miss_tolerance",
                std::to_string(sub->get_option("--miss-tolerance")->as<int>()));
    idtrack::InferenceConfig ic = parse_infer_config(cfg);

    idtrack::Model model = idtrack::model_from_checkpoint(idtrack::load_checkpoint(ckpt_path));
    auto dataset = idtrack::read_dataset(data_dir);
    Manifest m = Manifest::begin(out_dir, "track", cfg, {ckpt_path, data_dir});
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "seq_%04zu.txt", i);
        idtrack::run_sequence_to_file(dataset[i], model, ic,
                                      (fs::path(out_dir) / name).string());
    }
    m.finalize(out_dir);
    std::cout << "tracked " << dataset.size() << " sequences into " << out_dir << "\n";
    return 0;
}

std::vector<idtrack::MotLine> gt_lines(const std::string& path) {
    std::vector<idtrack::MotLine> out;
    for (auto& l : idtrack::read_mot_file(path))
        if (l.id != idtrack::kNoTrack) out.push_back(l);  // drop false positives
    return out;
}

idtrack::EvalReport eval_dirs(const std::string& results_dir, const std::string& gt_dir) {
    auto stems = [](const std::string& dir) {
        std::set<std::string> s;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.path().extension() != ".txt") continue;
            std::string stem = e.path().stem().string();
            if (stem == "corpus") continue;  // dataset metadata, not a sequence
            s.insert(stem);
        }
        return s;
    };
    std::set<std::string> rs = stems(results_dir), gs = stems(gt_dir);
    std::vector<std::string> orphans;
    for (const auto& s : rs)
        if (!gs.count(s)) orphans.push_back(s + " (results only)");
    for (const auto& s : gs)
        if (!rs.count(s)) orphans.push_back(s + " (gt only)");
    if (!orphans.empty()) {
        std::string msg = "mismatched sequence names:";
        for (const auto& o : orphans) msg += " " + o;
        throw idtrack::DataError(msg);
    }
    std::vector<std::vector<idtrack::MotLine>> preds, gts;
    std::vector<std::string> names(rs.begin(), rs.end());
    for (const auto& s : names) {
        preds.push_back(idtrack::read_mot_file((fs::path(results_dir) / (s + ".txt")).string()));
        gts.push_back(gt_lines((fs::path(gt_dir) / (s + ".txt")).string()));
    }
    return idtrack::evaluate_dataset(preds, gts, names);
}

int cmd_eval(const std::string& results_dir, const std::string& gt_dir,
             const std::string& out_dir) {
    idtrack::EvalReport report = eval_dirs(results_dir, gt_dir);
    std::string text = idtrack::format_report(report);
    std::cout << text;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream((fs::path(out_dir) / "report.txt").string()) << text;
        std::ofstream((fs::path(out_dir) / "report.csv").string())
            << idtrack::report_csv(report);
    }
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& out_dir,
               const std::string& workdir) {
    KVConfig cfg = load_config(config_path);
    apply_env_seed(cfg);
    std::string axis = cfg.get_string("ablate_axis");
    std::string train_data = resolve(workdir, cfg.get_string("train_data"));
    std::string eval_data = resolve(workdir, cfg.get_string("eval_data"));
    if (!fs::exists(train_data)) throw idtrack::DataError("train_data not found: " + train_data);
    if (!fs::exists(eval_data)) throw idtrack::DataError("eval_data not found: " + eval_data);

    struct Setting {
        std::string name;
        double x;
        KVConfig cfg;
        bool hungarian_only = false;  // reuse one trained model, vary inference
    };
    std::vector<Setting> settings;
    if (axis == "lambda_occ" || axis == "lambda_sw") {
        for (double v : cfg.get_real_list("ablate_values")) {
            Setting s{axis + "=" + idtrack::double_repr(v), v, cfg, false};
            s.cfg.set(axis, idtrack::double_repr(v));
            settings.push_back(std::move(s));
        }
    } else if (axis == "self_attention") {
        for (int v : {0, 1}) {
            Setting s{std::string("self_attention=") + (v ? "on" : "off"), double(v), cfg, false};
            s.cfg.set("self_attention", v ? "true" : "false");
            settings.push_back(std::move(s));
        }
    } else if (axis == "hungarian") {
        for (int v : {0, 1}) {
            Setting s{std::string("hungarian=") + (v ? "on" : "off"), double(v), cfg, true};
            s.cfg.set("hungarian", v ? "true" : "false");
            settings.push_back(std::move(s));
        }
    } else if (axis == "augmentation") {
        for (int v : {0, 1}) {
            Setting s{std::string("augmentation=") + (v ? "on" : "off"), double(v), cfg, false};
            if (!v) {
                s.cfg.set("lambda_occ", "0");
                s.cfg.set("lambda_sw", "0");
            }
            settings.push_back(std::move(s));
        }
    } else {
        throw idtrack::ConfigError("ablate_axis must be one of lambda_occ, lambda_sw, "
                                   "self_attention, hungarian, augmentation; got " + axis);
    }

    Manifest m = Manifest::begin(out_dir, "ablate", cfg, {config_path, train_data, eval_data});
    auto train_corpus = idtrack::read_dataset(train_data);
    auto eval_corpus = idtrack::read_dataset(eval_data);

    std::optional<idtrack::Model> shared_model;  // for inference-only axes
    std::ostringstream csv;
    csv << "setting,value,idf1,mota,idsw,association_accuracy\n";
    idtrack::PlotSeries p_idf1{"idf1", {}, {}}, p_mota{"mota", {}, {}};
    for (const Setting& s : settings) {
        idtrack::TrainConfig tc = parse_train_config(s.cfg);
        int K = static_cast<int>(s.cfg.get_int("K", 50));
        int C = static_cast<int>(s.cfg.get_int("C", 32));
        idtrack::DecoderConfig dc = parse_decoder_config(s.cfg, C, tc.T);
        std::string run_dir = (fs::path(out_dir) / s.name).string();

        idtrack::Model model = [&] {
            if (s.hungarian_only && shared_model) return *shared_model;
            auto res = idtrack::train(train_corpus, tc, dc, K, C, run_dir);
            if (s.hungarian_only) shared_model = res.model;
            return res.model;
        }();

        idtrack::InferenceConfig ic = parse_infer_config(s.cfg);
        std::string res_dir = (fs::path(run_dir) / "results").string();
        fs::create_directories(res_dir);
        std::vector<std::vector<idtrack::MotLine>> preds, gts;
        std::vector<std::string> names;
        for (std::size_t i = 0; i < eval_corpus.size(); ++i) {
            preds.push_back(idtrack::run_sequence(eval_corpus[i], model, ic));
            std::vector<idtrack::MotLine> g;
            for (int f = 0; f < static_cast<int>(eval_corpus[i].frames.size()); ++f)
                for (const auto& ld : eval_corpus[i].frames[f])
                    if (ld.gt_track_id != idtrack::kNoTrack) {
                        idtrack::MotLine l;
                        l.frame = f + 1;
                        l.id = ld.gt_track_id;
                        l.box = ld.det.box;
                        l.conf = ld.det.confidence;
                        g.push_back(l);
                    }
            gts.push_back(std::move(g));
            names.push_back("seq_" + std::to_string(i));
        }
        idtrack::EvalReport r = idtrack::evaluate_dataset(preds, gts, names);
        csv << s.name << "," << idtrack::double_repr(s.x) << ","
            << idtrack::double_repr(r.idf1) << "," << idtrack::double_repr(r.mota) << ","
            << r.id_switches << "," << idtrack::double_repr(r.association_accuracy) << "\n";
        p_idf1.x.push_back(s.x);
        p_idf1.y.push_back(r.idf1);
        p_mota.x.push_back(s.x);
        p_mota.y.push_back(r.mota);
        std::cout << s.name << ": IDF1 " << idtrack::double_repr(r.idf1) << ", MOTA "
                  << idtrack::double_repr(r.mota) << "\n";
    }
    std::ofstream((fs::path(out_dir) / "ablation.csv").string()) << csv.str();
    idtrack::write_svg_line_plot((fs::path(out_dir) / "ablation_idf1.svg").string(),
                                 "ablation: " + axis, axis, "IDF1", {p_idf1});
    idtrack::write_svg_line_plot((fs::path(out_dir) / "ablation_mota.svg").string(),
                                 "ablation: " + axis, axis, "MOTA", {p_mota});
    m.finalize(out_dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic multi-object tracking via in-context ID prediction"};
    app.require_subcommand(1);
    std::string workdir = ".";
    app.add_option("--workdir", workdir, "base directory for relative paths");

    std::string cfg_path, data_dir, out_dir, ckpt_path, resume_path, results_dir, gt_dir;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--config", cfg_path, "flat key=value config")->required();
    synth->add_option("--out", out_dir, "output dataset directory")->required();

    CLI::App* train = app.add_subcommand("train", "train the ID decoder + dictionary");
    train->add_option("--config", cfg_path)->required();
    train->add_option("--data", data_dir, "training dataset directory")->required();
    train->add_option("--out", out_dir)->required();
    train->add_option("--resume", resume_path, "checkpoint to resume from");

    CLI::App* track = app.add_subcommand("track", "run the online tracker");
    track->add_option("--checkpoint", ckpt_path)->required();
    track->add_option("--data", data_dir)->required();
    track->add_option("--out", out_dir)->required();
    track->add_option("--config", cfg_path, "optional inference config");
    track->add_option("--lambda-det", "detection confidence threshold");
    track->add_option("--lambda-new", "newborn confidence threshold");
    track->add_option("--lambda-id", "id probability threshold");
    track->add_flag("--hungarian", "use Hungarian assignment");
    track->add_option("--miss-tolerance", "frames before a lost track expires");

    CLI::App* eval = app.add_subcommand("eval", "score MOT results against ground truth");
    eval->add_option("--results", results_dir)->required();
    eval->add_option("--gt", gt_dir)->required();
    eval->add_option("--out", out_dir, "optional report directory");

    CLI::App* ablate = app.add_subcommand("ablate", "sweep one axis and tabulate metrics");
    ablate->add_option("--config", cfg_path)->required();
    ablate->add_option("--out", out_dir)->required();

    try {
        app.parse(argc, argv);
        if (*synth) return cmd_synth(resolve(workdir, cfg_path), resolve(workdir, out_dir));
        if (*train)
            return cmd_train(resolve(workdir, cfg_path), resolve(workdir, data_dir),
                             resolve(workdir, out_dir),
                             resume_path.empty() ? "" : resolve(workdir, resume_path));
        if (*track)
            return cmd_track(resolve(workdir, ckpt_path), resolve(workdir, data_dir),
                             resolve(workdir, out_dir),
                             cfg_path.empty() ? "" : resolve(workdir, cfg_path), track);
        if (*eval)
            return cmd_eval(resolve(workdir, results_dir), resolve(workdir, gt_dir),
                            out_dir.empty() ? "" : resolve(workdir, out_dir));
        if (*ablate) return cmd_ablate(resolve(workdir, cfg_path), resolve(workdir, out_dir),
                                       workdir);
        return 2;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const idtrack::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const idtrack::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const idtrack::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
