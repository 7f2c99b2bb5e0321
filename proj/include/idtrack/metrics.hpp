#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "idtrack/dataset_io.hpp"
#include "idtrack/types.hpp"

namespace idtrack {

// Min-cost one-to-one assignment of size min(rows, cols).
// Returns (row, col) pairs. Non-finite costs are rejected.
std::vector<std::pair<int, int>> hungarian(const Mat& cost);

struct FrameMatch {
    std::vector<std::pair<int, int>> pairs;  // (pred index, gt index)
    int fp = 0;
    int fn = 0;
};

// Hungarian over cost = 1 - IoU, restricted to pairs with IoU >= threshold.
FrameMatch match_frame(const std::vector<Box>& pred, const std::vector<Box>& gt,
                       double iou_threshold = 0.5);

struct EvalCounts {
    long idtp = 0, idfp = 0, idfn = 0;  // global trajectory-level matching
    long fp = 0, fn = 0, idsw = 0;
    long gt_total = 0;    // total GT boxes
    long pred_total = 0;  // total predicted boxes
};

// Per-frame CLEAR matching plus the global IDF1 trajectory matching over a
// whole sequence of MOT lines (frames are 1-based; ids unique per frame).
EvalCounts evaluate_sequence(const std::vector<MotLine>& pred, const std::vector<MotLine>& gt,
                             double iou_threshold = 0.5);

// IDF1 = 2*IDTP / (2*IDTP + IDFP + IDFN). Throws on zero GT.
real_t idf1(const EvalCounts& c);
// MOTA = 1 - (FN + FP + IDSW) / GT. Throws on zero GT.
real_t mota(const EvalCounts& c);
long id_switches(const EvalCounts& c);

struct EvalReport {
    real_t idf1 = 0, mota = 0;
    long id_switches = 0;
    real_t association_accuracy = 0;
    std::vector<std::string> sequence_names;
    std::vector<EvalCounts> per_sequence;
    EvalCounts totals;
};

EvalReport evaluate_dataset(const std::vector<std::vector<MotLine>>& preds,
                            const std::vector<std::vector<MotLine>>& gts,
                            const std::vector<std::string>& names, double iou_threshold = 0.5);

std::string format_report(const EvalReport& report);
std::string report_csv(const EvalReport& report);

// Fraction of GT detections after their track's first appearance whose
// matched predicted id equals the id the track received when it first
// appeared. Unmatched first appearances leave no reference id, so later
// frames of that track count as misses.
real_t association_accuracy(const std::vector<MotLine>& pred, const std::vector<MotLine>& gt,
                            double iou_threshold = 0.5);

struct BaselineConfig {
    double lambda_det = 0.3;
    double lambda_new = 0.6;
    double similarity_threshold = 0.1;
    int window_len = 19;       // embeddings averaged per trajectory
    int miss_tolerance = 30;
    bool use_hungarian = false;  // false: greedy best-similarity-first
};

// Cosine-similarity tracker over raw detection embeddings; trajectory
// embedding is the unweighted mean of the last window_len embeddings.
std::vector<MotLine> reid_baseline_tracker(const LabeledSequence& seq,
                                           const BaselineConfig& cfg);

}  // namespace idtrack
