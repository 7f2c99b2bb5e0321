#include <doctest.h>

#include <map>
#include <set>
#include <vector>

#include "idtrack/dictionary.hpp"
#include "idtrack/rng.hpp"
#include "idtrack/window.hpp"

using namespace idtrack;

TEST_CASE("dictionary holds K+1 words of width C") {
    IDDictionary d = new_dictionary(50, 256, 0.02, 1);
    CHECK(d.words.rows() == 51);
    CHECK(d.words.cols() == 256);
    CHECK(d.special_index() == 50);
    CHECK(d.word(1).isApprox(d.words.row(0)));
    CHECK(d.word(50).isApprox(d.words.row(49)));
    CHECK(d.special_word().isApprox(d.words.row(50)));
    CHECK_THROWS_AS((void)d.word(0), StateError);
    CHECK_THROWS_AS((void)d.word(51), StateError);

    IDDictionary same = new_dictionary(50, 256, 0.02, 1);
    CHECK(d.words == same.words);
    IDDictionary other = new_dictionary(50, 256, 0.02, 2);
    CHECK_FALSE(d.words == other.words);
}

TEST_CASE("tracklets concatenate feature then word") {
    IDDictionary d = new_dictionary(4, 256, 0.02, 7);
    Vec f = Vec::LinSpaced(256, 0.0, 1.0);
    Tracklet t = form_tracklet(f, Vec(d.word(3).transpose()), 5, 3);
    CHECK(t.width() == 512);  // 2C at C=256
    CHECK(t.feature_half().isApprox(f));
    CHECK(t.word_half().isApprox(d.word(3).transpose()));
    CHECK(t.source_label == 3);
    CHECK(t.frame_index == 5);

    Tracklet s = attach_special(f, d, 6);
    CHECK(s.source_label == kSpecialLabel);
    CHECK(s.word_half().isApprox(d.special_word().transpose()));

    Vec bad = Vec::Ones(7);
    CHECK_THROWS_AS(form_tracklet(bad, Vec(d.word(1).transpose()), 0, 1), DimensionError);
}

namespace {
Tracklet tok(int frame, int label = 1) {
    Vec v = Vec::Constant(4, frame);
    Tracklet t;
    t.data = Vec::Zero(8);
    t.data.head(4) = v;
    t.source_label = label;
    t.frame_index = frame;
    return t;
}
}  // namespace

TEST_CASE("window pushes require registration and increasing frames") {
    TrajectoryWindow w;
    CHECK_THROWS_AS(w.push_observation(3, tok(0, 3)), StateError);
    w.register_label(3);
    w.push_observation(3, tok(0, 3));
    w.push_observation(3, tok(2, 3));
    CHECK_THROWS_AS(w.push_observation(3, tok(2, 3)), StateError);
    CHECK_THROWS_AS(w.push_observation(3, tok(1, 3)), StateError);
    CHECK(w.total_tracklets() == 2);
}

TEST_CASE("window pruning matches a shadow model") {
    TrajectoryWindow w;
    std::map<int, std::vector<int>> shadow;  // label -> frames
    Rng rng(99);
    const int T = 5;
    for (int t = 0; t < 60; ++t) {
        for (int label = 1; label <= 4; ++label) {
            if (!rng.bernoulli(0.6)) continue;
            if (!w.has_label(label)) w.register_label(label);
            w.push_observation(label, tok(t, label));
            shadow[label].push_back(t);
        }
        int cutoff = t + 1 - T;
        w.prune(t + 1, T);
        for (auto& [label, frames] : shadow) {
            std::erase_if(frames, [&](int f) { return f < cutoff; });
            if (w.has_label(label)) {
                const auto& dq = w.tracklets_of(label);
                REQUIRE(dq.size() == frames.size());
                for (std::size_t i = 0; i < frames.size(); ++i)
                    CHECK(dq[i].frame_index == frames[i]);
            } else {
                CHECK(frames.empty());
            }
        }
        std::size_t total = 0;
        for (auto& [label, frames] : shadow) total += frames.size();
        CHECK(w.total_tracklets() == total);
    }
}

TEST_CASE("tracker state recycles labels fifo with fresh external ids") {
    TrajectoryWindow w;
    TrackerState st(3, 2);
    int a = st.acquire_label(0);
    int b = st.acquire_label(0);
    int c = st.acquire_label(0);
    CHECK(a == 1);
    CHECK(b == 2);
    CHECK(c == 3);
    CHECK(st.external_id(a) == 1);
    CHECK(st.external_id(c) == 3);
    CHECK_THROWS_AS(st.acquire_label(0), CapacityError);

    // b and c go stale; a stays fresh
    st.mark_seen(a, 5);
    auto released = st.expire_stale(w, 5);
    CHECK(released == std::vector<int>{b, c});
    CHECK_FALSE(st.is_active(b));

    // recycled labels come back oldest-first with new external ids
    int d = st.acquire_label(6);
    CHECK(d == b);
    CHECK(st.external_id(d) == 4);
    int e = st.acquire_label(6);
    CHECK(e == c);
    CHECK(st.external_id(e) == 5);
    CHECK_THROWS_AS(st.acquire_label(6), CapacityError);
}

TEST_CASE("expiry drops window entries of released labels") {
    TrajectoryWindow w;
    TrackerState st(2, 1);
    int a = st.acquire_label(0);
    w.register_label(a);
    w.push_observation(a, tok(0, a));
    st.expire_stale(w, 5);
    CHECK_FALSE(st.is_active(a));
    CHECK_FALSE(w.has_label(a));
    CHECK(w.empty());
}

TEST_CASE("external ids stay globally unique across many generations") {
    TrajectoryWindow w;
    TrackerState st(4, 0);
    std::set<int> seen;
    for (int t = 0; t < 200; ++t) {
        st.expire_stale(w, t);
        int label = st.acquire_label(t);
        CHECK(label >= 1);
        CHECK(label <= 4);
        CHECK(seen.insert(st.external_id(label)).second);
    }
}
