#include "idtrack/window.hpp"

#include <algorithm>

namespace idtrack {

void TrajectoryWindow::push_observation(int label, const Tracklet& tracklet) {
    auto it = per_label_.find(label);
    if (it == per_label_.end())
        throw StateError("push_observation: unknown label " + std::to_string(label));
    if (!it->second.empty() && tracklet.frame_index <= it->second.back().frame_index)
        throw StateError("push_observation: frame_index " + std::to_string(tracklet.frame_index) +
                         " not increasing for label " + std::to_string(label));
    it->second.push_back(tracklet);
}

void TrajectoryWindow::prune(int t, int T) {
    for (auto& [label, dq] : per_label_)
        while (!dq.empty() && dq.front().frame_index < t - T) dq.pop_front();
}

void TrajectoryWindow::drop_label(int label) { per_label_.erase(label); }

bool TrajectoryWindow::empty() const {
    for (const auto& [label, dq] : per_label_)
        if (!dq.empty()) return false;
    return true;
}

bool TrajectoryWindow::has_label(int label) const { return per_label_.count(label) > 0; }

std::vector<int> TrajectoryWindow::labels() const {
    std::vector<int> out;
    for (const auto& [label, dq] : per_label_)
        if (!dq.empty()) out.push_back(label);
    return out;
}

const std::deque<Tracklet>& TrajectoryWindow::tracklets_of(int label) const {
    auto it = per_label_.find(label);
    if (it == per_label_.end())
        throw StateError("tracklets_of: unknown label " + std::to_string(label));
    return it->second;
}

std::vector<const Tracklet*> TrajectoryWindow::all_tracklets() const {
    std::vector<const Tracklet*> out;
    for (const auto& [label, dq] : per_label_)
        for (const auto& t : dq) out.push_back(&t);
    return out;
}

std::size_t TrajectoryWindow::total_tracklets() const {
    std::size_t n = 0;
    for (const auto& [label, dq] : per_label_) n += dq.size();
    return n;
}

void TrajectoryWindow::register_label(int label) { per_label_[label]; }

TrackerState::TrackerState(int K, int miss_tolerance) : K_(K), miss_tolerance_(miss_tolerance) {
    if (K < 1) throw ConfigError("TrackerState: K must be >= 1");
    if (miss_tolerance < 0) throw ConfigError("TrackerState: miss_tolerance must be >= 0");
}

int TrackerState::acquire_label(int t) {
    if (static_cast<int>(active_.size()) >= K_)
        throw CapacityError("acquire_label: all " + std::to_string(K_) + " labels active");
    int label;
    if (next_fresh_ <= K_) {
        label = next_fresh_++;
    } else {
        while (!free_.empty() && active_.count(free_.front())) free_.pop_front();
        if (free_.empty()) throw CapacityError("acquire_label: free pool empty");
        label = free_.front();
        free_.pop_front();
    }
    active_.insert(label);
    generation_[label] += 1;
    external_[label] = next_external_++;
    last_seen_[label] = t;
    return label;
}

std::vector<int> TrackerState::expire_stale(TrajectoryWindow& window, int t) {
    std::vector<int> released;
    for (int label : active_)
        if (t - last_seen_.at(label) > miss_tolerance_) released.push_back(label);
    for (int label : released) {
        active_.erase(label);
        free_.push_back(label);
        window.drop_label(label);
    }
    return released;
}

void TrackerState::mark_seen(int label, int t) {
    if (!active_.count(label))
        throw StateError("mark_seen: label " + std::to_string(label) + " not active");
    last_seen_[label] = t;
}

int TrackerState::external_id(int label) const {
    auto it = external_.find(label);
    if (it == external_.end())
        throw StateError("external_id: label " + std::to_string(label) + " never acquired");
    return it->second;
}

int TrackerState::last_seen(int label) const {
    auto it = last_seen_.find(label);
    if (it == last_seen_.end())
        throw StateError("last_seen: label " + std::to_string(label) + " never acquired");
    return it->second;
}

}  // namespace idtrack
