#include "idtrack/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>

#include "idtrack/utils.hpp"

namespace fs = std::filesystem;

namespace idtrack {

Objective objective_from_string(const std::string& s) {
    if (s == "id_pred") return Objective::id_pred;
    if (s == "re_id") return Objective::re_id;
    if (s == "contra") return Objective::contra;
    throw ConfigError("unknown objective: " + s);
}

std::string objective_to_string(Objective o) {
    switch (o) {
        case Objective::id_pred: return "id_pred";
        case Objective::re_id: return "re_id";
        case Objective::contra: return "contra";
    }
    return "?";
}

void TrainConfig::validate() const {
    if (T < 1) throw ConfigError("TrainConfig.T must be >= 1");
    if (clip_len() < 2) throw ConfigError("TrainConfig.clip_len must be >= 2");
    if (interval_min < 1 || interval_max < interval_min)
        throw ConfigError("TrainConfig.interval_range must satisfy 1 <= min <= max");
    if (lambda_occ < 0.0 || lambda_occ > 1.0) throw ConfigError("TrainConfig.lambda_occ must be in [0,1]");
    if (lambda_sw < 0.0 || lambda_sw > 1.0) throw ConfigError("TrainConfig.lambda_sw must be in [0,1]");
    if (w_cls < 0.0 || w_l1 < 0.0 || w_giou < 0.0 || w_id < 0.0)
        throw ConfigError("TrainConfig loss weights must be >= 0");
    if (learning_rate <= 0.0) throw ConfigError("TrainConfig.learning_rate must be > 0");
    if (total_epochs < 0) throw ConfigError("TrainConfig.total_epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("TrainConfig.batch_size must be >= 1");
    if (grad_clip_norm < 0.0) throw ConfigError("TrainConfig.grad_clip_norm must be >= 0");
}

ClipBatch sample_clip(const std::vector<LabeledSequence>& dataset, int T, int interval_min,
                      int interval_max, Rng& rng) {
    std::vector<int> eligible;
    for (std::size_t s = 0; s < dataset.size(); ++s) {
        int len = static_cast<int>(dataset[s].frames.size());
        if (len >= T * interval_min + 1) {
            eligible.push_back(static_cast<int>(s));
        } else {
            static bool warned = false;
            if (!warned) {
                std::cerr << "warning: excluding sequences shorter than " << T * interval_min + 1
                          << " frames from clip sampling\n";
                warned = true;
            }
        }
    }
    if (eligible.empty()) throw DataError("sample_clip: no sequence long enough for T+1 frames");

    int s = eligible[rng.uniform_int(0, static_cast<int>(eligible.size()) - 1)];
    const LabeledSequence& seq = dataset[s];
    int len = static_cast<int>(seq.frames.size());
    int feasible_max = std::min(interval_max, (len - 1) / T);
    int interval = static_cast<int>(rng.uniform_int(interval_min, feasible_max));
    int start = static_cast<int>(rng.uniform_int(0, len - 1 - T * interval));

    ClipBatch clip;
    clip.T = T;
    clip.frames.resize(T + 1);
    std::map<int, int> traj_of_gt;
    for (int f = 0; f <= T; ++f) {
        int src = start + f * interval;
        for (const auto& ld : seq.frames[src]) {
            if (ld.gt_track_id == kNoTrack) continue;  // false positives carry no trajectory
            auto [it, inserted] = traj_of_gt.try_emplace(
                ld.gt_track_id, static_cast<int>(clip.gt_track_ids.size()));
            if (inserted) clip.gt_track_ids.push_back(ld.gt_track_id);
            ClipDetection d;
            d.traj = it->second;
            d.feature = Eigen::Map<const Eigen::VectorXf>(ld.det.feature.data(),
                                                          ld.det.feature.size())
                            .cast<real_t>();
            clip.frames[f].push_back(std::move(d));
        }
    }
    return clip;
}

std::vector<int> assign_training_labels(const ClipBatch& clip, int K, Rng& rng) {
    const int M = static_cast<int>(clip.gt_track_ids.size());
    if (M > K)
        throw CapacityError("assign_training_labels: clip has " + std::to_string(M) +
                            " trajectories, K = " + std::to_string(K));
    std::vector<int> pool(K);
    std::iota(pool.begin(), pool.end(), 1);
    std::vector<int> labels(M);
    for (int i = 0; i < M; ++i) {
        int j = static_cast<int>(rng.uniform_int(i, K - 1));
        std::swap(pool[i], pool[j]);
        labels[i] = pool[i];
    }
    return labels;
}

std::vector<MemoryToken> build_training_window(const ClipBatch& clip) {
    if (clip.labels.size() != clip.gt_track_ids.size())
        throw StateError("build_training_window: labels not assigned");
    std::vector<MemoryToken> window;
    for (int f = 0; f < clip.T; ++f)
        for (const auto& d : clip.frames[f]) {
            MemoryToken tok;
            tok.traj = d.traj;
            tok.time = f;
            tok.feature = d.feature;
            tok.word_label = clip.labels[d.traj];
            window.push_back(std::move(tok));
        }
    return window;
}

void augment_occlusion(std::vector<MemoryToken>& window, double lambda_occ, Rng& rng) {
    if (lambda_occ < 0.0 || lambda_occ > 1.0)
        throw ConfigError("augment_occlusion: lambda_occ must be in [0,1]");
    if (lambda_occ == 0.0) return;
    std::vector<MemoryToken> kept;
    kept.reserve(window.size());
    for (auto& tok : window)
        if (!rng.bernoulli(lambda_occ)) kept.push_back(std::move(tok));
    window = std::move(kept);
}

void augment_swap(std::vector<MemoryToken>& window, double lambda_sw, Rng& rng) {
    if (lambda_sw < 0.0 || lambda_sw > 1.0)
        throw ConfigError("augment_swap: lambda_sw must be in [0,1]");
    if (lambda_sw == 0.0) return;
    std::map<int, std::vector<std::size_t>> by_time;
    for (std::size_t i = 0; i < window.size(); ++i) by_time[window[i].time].push_back(i);
    for (auto& [time, idx] : by_time) {
        if (idx.size() < 2) continue;
        if (!rng.bernoulli(lambda_sw)) continue;
        int n = static_cast<int>(idx.size());
        int a = static_cast<int>(rng.uniform_int(0, n - 1));
        int b = static_cast<int>(rng.uniform_int(0, n - 2));
        if (b >= a) ++b;
        std::swap(window[idx[a]].word_label, window[idx[b]].word_label);
    }
}

std::vector<int> id_targets(const ClipBatch& clip, const std::vector<MemoryToken>& window,
                            int frame, int K, bool supervise_newborns) {
    if (frame < 1 || frame > clip.T)
        throw StateError("id_targets: frame must be in 1..T");
    std::vector<int> targets;
    targets.reserve(clip.frames[frame].size());
    for (const auto& d : clip.frames[frame]) {
        bool has_history = false;
        for (const auto& tok : window)
            if (tok.traj == d.traj && tok.time < frame && tok.time >= frame - clip.T) {
                has_history = true;
                break;
            }
        if (has_history)
            targets.push_back(clip.labels[d.traj] - 1);
        else
            targets.push_back(supervise_newborns ? K : -1);
    }
    return targets;
}

real_t id_loss(const Mat& logits, const std::vector<int>& targets) {
    Mat unused;
    return id_loss_with_grad(logits, targets, unused);
}

real_t id_loss_with_grad(const Mat& logits, const std::vector<int>& targets, Mat& d_logits) {
    if (static_cast<int>(targets.size()) != logits.rows())
        throw DimensionError("id_loss: targets size != logits rows");
    d_logits = Mat::Zero(logits.rows(), logits.cols());
    int count = 0;
    for (int t : targets)
        if (t >= 0) ++count;
    if (count == 0) {
        std::cerr << "warning: id_loss called with empty supervision set\n";
        return 0.0;
    }
    real_t loss = 0.0;
    const real_t inv = 1.0 / count;
    for (int i = 0; i < logits.rows(); ++i) {
        int t = targets[i];
        if (t < 0) continue;
        if (t >= logits.cols())
            throw DimensionError("id_loss: target " + std::to_string(t) + " out of range");
        real_t mx = logits.row(i).maxCoeff();
        real_t sum = (logits.row(i).array() - mx).exp().sum();
        real_t lse = mx + std::log(sum);
        loss += (lse - logits(i, t)) * inv;
        d_logits.row(i) = ((logits.row(i).array() - lse).exp() * inv).matrix();
        d_logits(i, t) -= inv;
    }
    return loss;
}

real_t total_loss(const LossComponents& c, const TrainConfig& cfg) {
    if (cfg.w_cls < 0 || cfg.w_l1 < 0 || cfg.w_giou < 0 || cfg.w_id < 0)
        throw ConfigError("total_loss: negative loss weight");
    return cfg.w_cls * c.cls + cfg.w_l1 * c.l1 + cfg.w_giou * c.giou + cfg.w_id * c.id;
}

real_t reid_objective(const Mat& features, const std::vector<int>& identities, const Mat& head) {
    if (features.cols() != head.cols())
        throw DimensionError("reid_objective: feature dim != head dim");
    Mat logits = features * head.transpose();
    return id_loss(logits, identities);
}

real_t contra_objective(const Mat& features, const std::vector<int>& identities,
                        real_t temperature) {
    const int n = static_cast<int>(features.rows());
    if (static_cast<int>(identities.size()) != n)
        throw DimensionError("contra_objective: identities size != feature rows");
    if (n < 2) throw DimensionError("contra_objective: need at least 2 detections");
    Mat normed = features;
    for (int i = 0; i < n; ++i) {
        real_t nrm = normed.row(i).norm();
        if (nrm > 0) normed.row(i) /= nrm;
    }
    Mat sim = normed * normed.transpose() / temperature;

    real_t loss = 0.0;
    int anchors = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<int> positives;
        for (int j = 0; j < n; ++j)
            if (j != i && identities[j] == identities[i]) positives.push_back(j);
        if (positives.empty()) continue;
        // log-sum-exp over all non-anchor samples
        real_t mx = -std::numeric_limits<real_t>::infinity();
        for (int j = 0; j < n; ++j)
            if (j != i) mx = std::max(mx, sim(i, j));
        real_t denom = 0.0;
        for (int j = 0; j < n; ++j)
            if (j != i) denom += std::exp(sim(i, j) - mx);
        real_t lse = mx + std::log(denom);
        real_t acc = 0.0;
        for (int p : positives) acc += lse - sim(i, p);
        loss += acc / positives.size();
        ++anchors;
    }
    if (anchors == 0) {
        std::cerr << "warning: contra_objective batch has no positive pair\n";
        return 0.0;
    }
    return loss / anchors;
}

real_t clip_loss_and_gradients(const Model& model, const ClipBatch& clip,
                               const std::vector<MemoryToken>& window, bool supervise_newborns,
                               Model* grads) {
    const int C = model.C();
    const int K = model.K();
    const int D = 2 * C;

    // queries: all detections at frames 1..T with i^spec attached
    std::vector<int> query_times;
    std::vector<const ClipDetection*> query_dets;
    std::vector<int> targets;
    for (int f = 1; f <= clip.T; ++f) {
        std::vector<int> frame_targets =
            id_targets(clip, window, f, K, supervise_newborns);
        for (std::size_t i = 0; i < clip.frames[f].size(); ++i) {
            query_dets.push_back(&clip.frames[f][i]);
            query_times.push_back(f);
            targets.push_back(frame_targets[i]);
        }
    }
    const int N = static_cast<int>(query_dets.size());
    if (N == 0) return 0.0;

    Mat queries(N, D);
    for (int i = 0; i < N; ++i) {
        queries.row(i).head(C) = query_dets[i]->feature.transpose();
        queries.row(i).tail(C) = model.dict.special_word();
    }
    const int M = static_cast<int>(window.size());
    Mat memory(M, D);
    std::vector<int> memory_times(M);
    for (int j = 0; j < M; ++j) {
        memory.row(j).head(C) = window[j].feature.transpose();
        memory.row(j).tail(C) = model.dict.word(window[j].word_label);
        memory_times[j] = window[j].time;
    }

    DecodeCache cache;
    auto result = decoder_forward(model.dec, model.dec_cfg, queries, query_times, memory,
                                  memory_times, &cache);
    Mat d_logits;
    real_t loss = id_loss_with_grad(result.logits, targets, d_logits);

    if (grads) {
        auto back = decoder_backward(model.dec, model.dec_cfg, cache, d_logits);
        // accumulate decoder parameter grads
        std::vector<Mat*> dst;
        grads->dec.for_each_param([&](const std::string&, Mat& m) { dst.push_back(&m); });
        std::size_t idx = 0;
        back.params.for_each_param(
            [&](const std::string&, Mat& m) { *dst[idx++] += m; });
        // scatter tracklet-word gradients into the dictionary
        for (int i = 0; i < N; ++i)
            grads->dict.words.row(K) += back.d_queries.row(i).tail(C);
        for (int j = 0; j < M; ++j)
            grads->dict.words.row(window[j].word_label - 1) += back.d_memory.row(j).tail(C);
    }
    return loss;
}

namespace {

struct Adam {
    std::vector<Mat> m, v;
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void ensure_shapes(Model& model) {
        if (!m.empty()) return;
        model.for_each_param([&](const std::string&, Mat& p) {
            m.push_back(Mat::Zero(p.rows(), p.cols()));
            v.push_back(Mat::Zero(p.rows(), p.cols()));
        });
    }

    void update(Model& model, Model& grads, double lr) {
        ensure_shapes(model);
        ++step;
        double bc1 = 1.0 - std::pow(beta1, step);
        double bc2 = 1.0 - std::pow(beta2, step);
        std::vector<Mat*> gs;
        grads.for_each_param([&](const std::string&, Mat& g) { gs.push_back(&g); });
        std::size_t i = 0;
        model.for_each_param([&](const std::string&, Mat& p) {
            Mat& g = *gs[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g.cwiseProduct(g);
            Mat mh = m[i] / bc1;
            Mat vh = v[i] / bc2;
            p.array() -= lr * mh.array() / (vh.array().sqrt() + eps);
            ++i;
        });
    }
};

double grad_global_norm(Model& grads) {
    double s = 0.0;
    grads.for_each_param([&](const std::string&, Mat& g) { s += g.squaredNorm(); });
    return std::sqrt(s);
}

void scale_grads(Model& grads, double factor) {
    grads.for_each_param([&](const std::string&, Mat& g) { g *= factor; });
}

}  // namespace

TrainResult train(const std::vector<LabeledSequence>& corpus, const TrainConfig& cfg,
                  const DecoderConfig& dec_cfg, int K, int C, const std::string& out_dir,
                  const Model* resume_from) {
    cfg.validate();
    dec_cfg.validate();
    if (corpus.empty()) throw DataError("train: empty corpus");
    if (cfg.objective != Objective::id_pred)
        throw ConfigError("train: objective " + objective_to_string(cfg.objective) +
                          " has no trainable encoder in synthetic-feature mode; "
                          "use the cosine baseline tracker for comparisons");
    fs::create_directories(out_dir);

    TrainResult res;
    res.model = resume_from ? *resume_from : init_model(K, C, dec_cfg, 0.02, cfg.seed);
    Model grads = res.model;  // shape template
    Adam adam;
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    const int steps_per_epoch =
        cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : static_cast<int>(corpus.size());
    const std::string ckpt_path = (fs::path(out_dir) / "checkpoint.bin").string();
    std::ofstream metrics(fs::path(out_dir) / "metrics.txt");

    auto save = [&](long step, int epoch) {
        Checkpoint ck = checkpoint_from_model(res.model);
        ck.meta.set("step", std::to_string(step));
        ck.meta.set("epoch", std::to_string(epoch));
        ck.meta.set("optimizer", "adam(beta1=0.9,beta2=0.999,eps=1e-8)");
        ck.meta.set("learning_rate", double_repr(cfg.learning_rate));
        ck.meta.set("T", std::to_string(cfg.T));
        save_checkpoint(ckpt_path, ck);
    };

    long step = 0;
    save(step, 0);  // 0-epoch runs yield the initialization
    for (int epoch = 1; epoch <= cfg.total_epochs; ++epoch) {
        double lr = cfg.learning_rate;
        for (int de : cfg.decay_epochs)
            if (epoch >= de) lr *= 0.1;
        for (int s = 0; s < steps_per_epoch; ++s) {
            grads.for_each_param([](const std::string&, Mat& g) { g.setZero(); });
            real_t batch_loss = 0.0;
            for (int b = 0; b < cfg.batch_size; ++b) {
                ClipBatch clip;
                for (int attempt = 0;; ++attempt) {
                    clip = sample_clip(corpus, cfg.T, cfg.interval_min, cfg.interval_max, rng);
                    try {
                        clip.labels = assign_training_labels(clip, K, rng);
                        break;
                    } catch (const CapacityError&) {
                        if (attempt >= 100)
                            throw CapacityError("train: could not sample a clip with <= K trajectories");
                    }
                }
                auto window = build_training_window(clip);
                augment_occlusion(window, cfg.lambda_occ, rng);
                augment_swap(window, cfg.lambda_sw, rng);
                batch_loss += clip_loss_and_gradients(res.model, clip, window,
                                                      cfg.supervise_newborns, &grads);
            }
            batch_loss /= cfg.batch_size;
            scale_grads(grads, 1.0 / cfg.batch_size);

            if (!std::isfinite(batch_loss)) {
                res.diverged = true;
                res.checkpoint_path = ckpt_path;
                metrics << step + 1 << " nan " << double_repr(lr) << " nan\n";
                throw NumericError("train: non-finite loss at step " + std::to_string(step + 1) +
                                   "; last good checkpoint: " + ckpt_path);
            }
            double gn = grad_global_norm(grads);
            if (cfg.grad_clip_norm > 0.0 && gn > cfg.grad_clip_norm)
                scale_grads(grads, cfg.grad_clip_norm / gn);
            adam.update(res.model, grads, lr);
            ++step;
            res.loss_curve.push_back(batch_loss);
            metrics << step << " " << double_repr(batch_loss) << " " << double_repr(lr) << " "
                    << double_repr(gn) << "\n";
            if (cfg.checkpoint_every_steps > 0 && step % cfg.checkpoint_every_steps == 0)
                save(step, epoch);
        }
        save(step, epoch);
    }
    save(step, cfg.total_epochs);
    res.checkpoint_path = ckpt_path;
    return res;
}

}  // namespace idtrack
