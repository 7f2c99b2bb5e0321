#pragma once

#include <optional>
#include <string>
#include <vector>

#include "idtrack/model.hpp"
#include "idtrack/rng.hpp"
#include "idtrack/types.hpp"

namespace idtrack {

enum class Objective { id_pred, re_id, contra };

Objective objective_from_string(const std::string& s);
std::string objective_to_string(Objective o);

struct TrainConfig {
    int T = 19;  // window length; clips span T+1 frames
    int interval_min = 1;
    int interval_max = 4;
    double lambda_occ = 0.0;
    double lambda_sw = 0.0;
    double w_cls = 2.0, w_l1 = 5.0, w_giou = 2.0, w_id = 1.0;
    double learning_rate = 1e-3;
    std::vector<int> decay_epochs;  // lr drops 10x entering these (1-based) epochs
    int total_epochs = 1;
    int steps_per_epoch = 0;  // 0 -> one step per corpus sequence
    int batch_size = 1;       // clips per optimizer step
    double grad_clip_norm = 1.0;  // 0 disables clipping
    std::uint64_t seed = 0;
    Objective objective = Objective::id_pred;
    bool supervise_newborns = true;  // false: no-history detections excluded from the loss
    int checkpoint_every_steps = 0;  // 0 -> final checkpoint only

    int clip_len() const { return T + 1; }
    void validate() const;
};

// One GT detection inside a clip, identified by clip-local trajectory index.
struct ClipDetection {
    int traj = 0;
    Vec feature;
};

struct ClipBatch {
    int T = 0;
    std::vector<int> gt_track_ids;                 // per clip-local trajectory
    std::vector<std::vector<ClipDetection>> frames;  // clip frames 0..T, GT detections only
    std::vector<int> labels;                       // assigned k_m per trajectory (1..K)
};

// A historical token of the training window: trajectory feature plus the
// label whose ID word is concatenated on. augment_swap rewrites word_label.
struct MemoryToken {
    int traj = 0;
    int time = 0;  // clip frame index
    Vec feature;
    int word_label = 0;  // 1..K
};

// Uniformly samples an eligible sequence, a constant frame interval and a
// start offset. Sequences shorter than T+1 frames are excluded.
ClipBatch sample_clip(const std::vector<LabeledSequence>& dataset, int T, int interval_min,
                      int interval_max, Rng& rng);

// Injective trajectory -> {1..K} assignment, uniform over injective maps.
std::vector<int> assign_training_labels(const ClipBatch& clip, int K, Rng& rng);

// Training window = one token per (trajectory, clip frame 0..T-1) visible pair.
std::vector<MemoryToken> build_training_window(const ClipBatch& clip);

void augment_occlusion(std::vector<MemoryToken>& window, double lambda_occ, Rng& rng);
// Per frame with >= 2 co-visible trajectories: with probability lambda_sw,
// one uniformly chosen pair exchanges ID words at that frame.
void augment_swap(std::vector<MemoryToken>& window, double lambda_sw, Rng& rng);

// Target class column for each detection of `frame_dets`: k_m - 1 when the
// trajectory has surviving history before `frame`, K (special) for newborns,
// -1 (excluded) when newborn supervision is off.
std::vector<int> id_targets(const ClipBatch& clip, const std::vector<MemoryToken>& window,
                            int frame, int K, bool supervise_newborns = true);

// Mean cross-entropy over targets >= 0. Targets of -1 are excluded.
real_t id_loss(const Mat& logits, const std::vector<int>& targets);
// Also emits d(loss)/d(logits).
real_t id_loss_with_grad(const Mat& logits, const std::vector<int>& targets, Mat& d_logits);

struct LossComponents {
    real_t cls = 0, l1 = 0, giou = 0, id = 0;
};

real_t total_loss(const LossComponents& c, const TrainConfig& cfg);

// ReID baseline objective: cross-entropy of features * head^T against fixed
// per-trajectory class indices.
real_t reid_objective(const Mat& features, const std::vector<int>& identities, const Mat& head);
// InfoNCE over cosine similarities; positives are same-identity pairs.
// Returns 0 when the batch holds no positive pair.
real_t contra_objective(const Mat& features, const std::vector<int>& identities,
                        real_t temperature);

struct TrainResult {
    Model model;
    std::string checkpoint_path;
    std::vector<real_t> loss_curve;
    bool diverged = false;
};

// Full optimizer loop (Adam, 10x decay at decay_epochs, global-norm clip).
// Writes `metrics.txt` (one `step loss lr grad_norm` line per step) and the
// final checkpoint into out_dir. On divergence, aborts and reports the last
// good checkpoint.
TrainResult train(const std::vector<LabeledSequence>& corpus, const TrainConfig& cfg,
                  const DecoderConfig& dec_cfg, int K, int C, const std::string& out_dir,
                  const Model* resume_from = nullptr);

// One forward/backward over a clip; returns the id loss and accumulates
// gradients into grads (dictionary + decoder). Exposed for tests.
real_t clip_loss_and_gradients(const Model& model, const ClipBatch& clip,
                               const std::vector<MemoryToken>& window, bool supervise_newborns,
                               Model* grads);

}  // namespace idtrack
