#include "idtrack/inference.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <tuple>

#include "idtrack/metrics.hpp"

namespace idtrack {

void InferenceConfig::validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(lambda_det)) throw ConfigError("InferenceConfig.lambda_det must be in [0,1]");
    if (!in01(lambda_new)) throw ConfigError("InferenceConfig.lambda_new must be in [0,1]");
    if (!in01(lambda_id)) throw ConfigError("InferenceConfig.lambda_id must be in [0,1]");
    if (miss_tolerance < 0) throw ConfigError("InferenceConfig.miss_tolerance must be >= 0");
}

std::vector<int> hungarian_assign(const Mat& prob, double lambda_id) {
    std::vector<int> out(prob.rows(), -1);
    if (prob.rows() == 0 || prob.cols() == 0) return out;
    for (auto [i, j] : hungarian(-prob))
        if (prob(i, j) > lambda_id) out[i] = j;
    return out;
}

FrameAssignment track_frame(const std::vector<Detection>& detections, TrackerState& state,
                            TrajectoryWindow& window, const Model& model,
                            const InferenceConfig& cfg, int t) {
    cfg.validate();
    const int C = model.C();
    const int K = model.K();

    // Housekeeping before decoding so recycled labels are usable this frame
    // and memory only spans the decoder's temporal reach.
    state.expire_stale(window, t);
    window.prune(t, model.dec_cfg.max_rel_offset);

    std::vector<int> kept;  // detection indices past lambda_det
    for (int i = 0; i < static_cast<int>(detections.size()); ++i) {
        if (static_cast<int>(detections[i].feature.size()) != C)
            throw DimensionError("track_frame: detection feature dim " +
                                 std::to_string(detections[i].feature.size()) + " != C = " +
                                 std::to_string(C));
        if (detections[i].confidence > cfg.lambda_det) kept.push_back(i);
    }

    FrameAssignment out;
    auto feature_of = [&](int det_index) {
        return Eigen::Map<const Eigen::VectorXf>(detections[det_index].feature.data(), C)
            .cast<real_t>()
            .eval();
    };
    auto spawn = [&](int det_index, real_t prob) {
        int label = state.acquire_label(t);
        window.register_label(label);
        window.push_observation(
            label, form_tracklet(feature_of(det_index), model.dict.word(label), t, label));
        DetectionAssignment a;
        a.detection_index = det_index;
        a.label = label;
        a.external_id = state.external_id(label);
        a.id_probability = prob;
        a.is_newborn = true;
        out.entries.push_back(a);
    };
    auto keep = [&](int det_index, int label, real_t prob) {
        state.mark_seen(label, t);
        if (!window.has_label(label)) window.register_label(label);
        window.push_observation(
            label, form_tracklet(feature_of(det_index), model.dict.word(label), t, label));
        DetectionAssignment a;
        a.detection_index = det_index;
        a.label = label;
        a.external_id = state.external_id(label);
        a.id_probability = prob;
        a.is_newborn = false;
        out.entries.push_back(a);
    };

    if (window.empty()) {
        for (int i : kept)
            if (detections[i].confidence > cfg.lambda_new) spawn(i, 0.0);
        std::sort(out.entries.begin(), out.entries.end(),
                  [](const DetectionAssignment& a, const DetectionAssignment& b) {
                      return a.detection_index < b.detection_index;
                  });
        return out;
    }

    const int N = static_cast<int>(kept.size());
    std::vector<int> chosen_label(N, -1);  // 1..K, -1 = unassigned
    std::vector<real_t> chosen_prob(N, 0.0);

    if (N > 0) {
        Mat queries(N, 2 * C);
        for (int r = 0; r < N; ++r) {
            queries.row(r).head(C) = feature_of(kept[r]).transpose();
            queries.row(r).tail(C) = model.dict.special_word();
        }
        auto tokens = window.all_tracklets();
        const int M = static_cast<int>(tokens.size());
        Mat memory(M, 2 * C);
        std::vector<int> memory_times(M);
        for (int m = 0; m < M; ++m) {
            memory.row(m) = tokens[m]->data.transpose();
            memory_times[m] = tokens[m]->frame_index;
        }
        Mat logits = decode(queries, memory, t, memory_times, model.dec, model.dec_cfg);

        const real_t ninf = -std::numeric_limits<real_t>::infinity();
        if (cfg.restrict_to_active) {
            std::vector<char> active(K + 1, 0);
            for (int label : state.active_labels()) active[label - 1] = 1;
            for (int col = 0; col <= K; ++col)
                if (col == K || !active[col]) logits.col(col).setConstant(ninf);
        }
        Mat prob = softmax_rows(logits);

        if (cfg.use_hungarian) {
            // columns = active labels only (plus special excluded always)
            std::vector<int> cols;
            for (int label : state.active_labels()) cols.push_back(label - 1);
            Mat sub(N, cols.size());
            for (int r = 0; r < N; ++r)
                for (std::size_t j = 0; j < cols.size(); ++j) sub(r, j) = prob(r, cols[j]);
            std::vector<int> assign = hungarian_assign(sub, cfg.lambda_id);
            for (int r = 0; r < N; ++r)
                if (assign[r] >= 0) {
                    chosen_label[r] = cols[assign[r]] + 1;
                    chosen_prob[r] = sub(r, assign[r]);
                }
        } else {
            // per-detection argmax over labels 1..K (special column never wins
            // an assignment; it routes to the newborn path)
            struct Claim {
                int row;
                real_t prob;
            };
            std::map<int, std::vector<Claim>> claims;  // label -> claimants
            for (int r = 0; r < N; ++r) {
                int best = -1;
                real_t bp = ninf;
                for (int col = 0; col < K; ++col)
                    if (prob(r, col) > bp) {
                        bp = prob(r, col);
                        best = col;
                    }
                if (best >= 0 && bp > cfg.lambda_id) claims[best + 1].push_back({r, bp});
            }
            for (auto& [label, rows] : claims) {
                // highest confidence keeps the label; earlier index wins ties
                int winner = rows[0].row;
                for (const Claim& c : rows)
                    if (detections[kept[c.row]].confidence >
                        detections[kept[winner]].confidence)
                        winner = c.row;
                for (const Claim& c : rows) {
                    if (c.row == winner) {
                        chosen_label[c.row] = label;
                        chosen_prob[c.row] = c.prob;
                    } else if (!cfg.strict_dedup ||
                               detections[kept[c.row]].confidence > cfg.lambda_new) {
                        chosen_label[c.row] = 0;  // forced newborn
                    }
                }
            }
        }
    }

    // Keeps first (in detection order), then newborns, then lambda_new gate.
    for (int r = 0; r < N; ++r)
        if (chosen_label[r] > 0) keep(kept[r], chosen_label[r], chosen_prob[r]);
    for (int r = 0; r < N; ++r) {
        if (chosen_label[r] == 0) {
            spawn(kept[r], 0.0);  // dedup loser: unconditional newborn
        } else if (chosen_label[r] < 0 && detections[kept[r]].confidence > cfg.lambda_new) {
            spawn(kept[r], 0.0);
        }
    }
    std::sort(out.entries.begin(), out.entries.end(),
              [](const DetectionAssignment& a, const DetectionAssignment& b) {
                  return a.detection_index < b.detection_index;
              });
    return out;
}

std::vector<MotLine> run_sequence(const LabeledSequence& seq, const Model& model,
                                  const InferenceConfig& cfg) {
    cfg.validate();
    TrackerState state(model.K(), cfg.miss_tolerance);
    TrajectoryWindow window;
    std::vector<MotLine> out;
    for (int f = 0; f < static_cast<int>(seq.frames.size()); ++f) {
        std::vector<Detection> dets;
        dets.reserve(seq.frames[f].size());
        for (const auto& ld : seq.frames[f]) dets.push_back(ld.det);
        FrameAssignment fa = track_frame(dets, state, window, model, cfg, f);
        for (const auto& e : fa.entries) {
            MotLine l;
            l.frame = f + 1;
            l.id = e.external_id;
            l.box = dets[e.detection_index].box;
            l.conf = dets[e.detection_index].confidence;
            out.push_back(l);
        }
    }
    std::sort(out.begin(), out.end(), [](const MotLine& a, const MotLine& b) {
        return std::tie(a.frame, a.id) < std::tie(b.frame, b.id);
    });
    return out;
}

void run_sequence_to_file(const LabeledSequence& seq, const Model& model,
                          const InferenceConfig& cfg, const std::string& out_path) {
    write_mot_file(out_path, run_sequence(seq, model, cfg));
}

}  // namespace idtrack
