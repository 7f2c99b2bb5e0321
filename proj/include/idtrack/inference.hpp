#pragma once

#include <string>
#include <vector>

#include "idtrack/dataset_io.hpp"
#include "idtrack/model.hpp"
#include "idtrack/window.hpp"

namespace idtrack {

struct InferenceConfig {
    double lambda_det = 0.3;
    double lambda_new = 0.6;
    double lambda_id = 0.2;
    bool use_hungarian = false;
    int miss_tolerance = 30;
    bool restrict_to_active = true;
    // strict mode: dedup losers must also clear lambda_new to become newborn
    // (instead of becoming newborn unconditionally).
    bool strict_dedup = false;

    void validate() const;
};

struct DetectionAssignment {
    int detection_index = 0;  // into the frame's input detection list
    int label = 0;            // internal label, 1..K
    int external_id = 0;
    real_t id_probability = 0;  // 0 for newborns / empty-window starts
    bool is_newborn = false;
};

struct FrameAssignment {
    std::vector<DetectionAssignment> entries;  // detection-index ascending
};

// One online tracking step at time t: filter by lambda_det, decode against
// the window (or apply the empty-window newborn rule), assign by maximum
// probability with duplicate resolution (or Hungarian), spawn newborns,
// then update window and state. Stale labels are expired and the window is
// pruned to the decoder's temporal span before decoding.
FrameAssignment track_frame(const std::vector<Detection>& detections, TrackerState& state,
                            TrajectoryWindow& window, const Model& model,
                            const InferenceConfig& cfg, int t);

// Max-total-probability one-to-one assignment of detections to active-label
// columns; pairs with probability <= lambda_id are rejected afterwards.
// Returns per-row column index, -1 where unassigned.
std::vector<int> hungarian_assign(const Mat& prob, double lambda_id);

std::vector<MotLine> run_sequence(const LabeledSequence& seq, const Model& model,
                                  const InferenceConfig& cfg);

void run_sequence_to_file(const LabeledSequence& seq, const Model& model,
                          const InferenceConfig& cfg, const std::string& out_path);

}  // namespace idtrack
