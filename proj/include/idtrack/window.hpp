#pragma once

#include <deque>
#include <map>
#include <set>
#include <vector>

#include "idtrack/dictionary.hpp"
#include "idtrack/types.hpp"

namespace idtrack {

// Sliding memory of tracklets from the last T frames, keyed by internal label.
class TrajectoryWindow {
public:
    // Pushing at time t requires tracklet.frame_index == t - 1 by convention;
    // callers push the just-processed frame before advancing.
    void push_observation(int label, const Tracklet& tracklet);
    // Drop everything with frame_index < t - T.
    void prune(int t, int T);
    void drop_label(int label);
    void clear() { per_label_.clear(); }

    bool empty() const;
    bool has_label(int label) const;
    // Labels currently holding at least one tracklet, ascending.
    std::vector<int> labels() const;
    const std::deque<Tracklet>& tracklets_of(int label) const;
    // All tracklets flattened (label-major, time ascending within label).
    std::vector<const Tracklet*> all_tracklets() const;
    std::size_t total_tracklets() const;

    void register_label(int label);  // empty entry; push target must exist

private:
    std::map<int, std::deque<Tracklet>> per_label_;
};

// Internal label lifecycle: acquisition in 1..K, recycling through a FIFO
// free pool, generation counters mapping (label, generation) to globally
// unique external track ids.
class TrackerState {
public:
    TrackerState(int K, int miss_tolerance);

    int capacity() const { return K_; }
    int miss_tolerance() const { return miss_tolerance_; }

    // Next fresh label while unexhausted, else the oldest recycled label.
    // Throws CapacityError when all K labels are active.
    int acquire_label(int t);

    // Release every active label with t - last_seen > miss_tolerance and
    // drop its window entries. Returns released labels, ascending.
    std::vector<int> expire_stale(TrajectoryWindow& window, int t);

    void mark_seen(int label, int t);

    bool is_active(int label) const { return active_.count(label) > 0; }
    const std::set<int>& active_labels() const { return active_; }
    int external_id(int label) const;  // current generation's output id
    int last_seen(int label) const;

private:
    int K_;
    int miss_tolerance_;
    int next_fresh_ = 1;
    int next_external_ = 1;
    std::set<int> active_;
    std::deque<int> free_;  // recycled labels, oldest first
    std::map<int, int> generation_;
    std::map<int, int> external_;  // label -> output id of current generation
    std::map<int, int> last_seen_;
};

}  // namespace idtrack
