#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "idtrack/dataset_io.hpp"
#include "idtrack/scene.hpp"
#include "idtrack/utils.hpp"

using namespace idtrack;
namespace fs = std::filesystem;

namespace {

SceneConfig small_scene(std::uint64_t seed) {
    SceneConfig c;
    c.num_frames = 40;
    c.max_objects = 5;
    c.feature_dim = 16;
    c.appearance_noise_sigma = 0.1;
    c.occlusion_prob_per_frame = 0.1;
    c.false_positive_rate = 0.3;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("scene generation is deterministic per seed") {
    auto a = generate_sequence(small_scene(11));
    auto b = generate_sequence(small_scene(11));
    auto c = generate_sequence(small_scene(12));
    CHECK(a == b);
    CHECK_FALSE(a == c);
}

TEST_CASE("scene invariants: ids, bounds, confidences, latents") {
    SceneConfig cfg = small_scene(3);
    auto gen = generate_sequence_full(cfg);

    // unit-norm latents with pairwise separation
    for (std::size_t i = 0; i < gen.tracks.size(); ++i) {
        double n2 = 0;
        for (float v : gen.tracks[i].identity_latent) n2 += double(v) * v;
        CHECK(std::sqrt(n2) == doctest::Approx(1.0).epsilon(1e-5));
        for (std::size_t j = 0; j < i; ++j) {
            double d2 = 0;
            for (int d = 0; d < cfg.feature_dim; ++d) {
                double diff = double(gen.tracks[i].identity_latent[d]) -
                              double(gen.tracks[j].identity_latent[d]);
                d2 += diff * diff;
            }
            CHECK(std::sqrt(d2) >= cfg.identity_min_separation);
        }
    }

    std::set<int> all_ids;
    for (const auto& t : gen.tracks) {
        CHECK(t.track_id >= 1);
        CHECK(all_ids.insert(t.track_id).second);
    }

    for (const auto& frame : gen.seq.frames) {
        std::set<int> frame_ids;
        int real = 0;
        for (const auto& ld : frame) {
            CHECK(ld.det.confidence >= cfg.confidence_lo);
            CHECK(ld.det.confidence <= cfg.confidence_hi);
            CHECK(static_cast<int>(ld.det.feature.size()) == cfg.feature_dim);
            CHECK(ld.det.box.w > 0.f);
            CHECK(ld.det.box.h > 0.f);
            CHECK(ld.det.box.x >= 0.f);
            CHECK(ld.det.box.x + ld.det.box.w <= static_cast<float>(cfg.arena_w) + 1e-3f);
            if (ld.gt_track_id != kNoTrack) {
                ++real;
                CHECK(frame_ids.insert(ld.gt_track_id).second);  // unique per frame
                CHECK(all_ids.count(ld.gt_track_id) == 1);
            }
        }
        CHECK(real <= cfg.max_objects);
    }
}

TEST_CASE("occluded frames emit no detection for the track") {
    SceneConfig cfg = small_scene(17);
    cfg.false_positive_rate = 0.0;
    auto gen = generate_sequence_full(cfg);
    for (const auto& t : gen.tracks)
        for (const auto& st : t.states) {
            bool detected = false;
            for (const auto& ld : gen.seq.frames[st.frame])
                if (ld.gt_track_id == t.track_id) detected = true;
            CHECK(detected == st.visible);
        }
}

TEST_CASE("noise-free features equal the identity latent") {
    SceneConfig cfg = small_scene(23);
    cfg.appearance_noise_sigma = 0.0;
    cfg.false_positive_rate = 0.0;
    auto gen = generate_sequence_full(cfg);
    std::map<int, const GroundTruthTrack*> by_id;
    for (const auto& t : gen.tracks) by_id[t.track_id] = &t;
    for (const auto& frame : gen.seq.frames)
        for (const auto& ld : frame)
            for (int d = 0; d < cfg.feature_dim; ++d)
                CHECK(ld.det.feature[d] ==
                      doctest::Approx(by_id.at(ld.gt_track_id)->identity_latent[d]));
}

TEST_CASE("corpus seeds shift per sequence") {
    SceneConfig cfg = small_scene(0);
    auto corpus = generate_corpus(cfg, 3, 100);
    SceneConfig c1 = cfg;
    c1.seed = 101;
    CHECK(corpus[1] == generate_sequence(c1));
    CHECK_FALSE(corpus[0] == corpus[1]);
}

TEST_CASE("mot line format round-trips") {
    MotLine l;
    l.frame = 12;
    l.id = 4;
    l.box = Box{1.5f, 2.25f, 10.125f, 20.0625f};
    l.conf = 0.8125f;
    MotLine back = parse_mot_line(format_mot_line(l));
    CHECK(back.frame == l.frame);
    CHECK(back.id == l.id);
    CHECK(back.box == l.box);
    CHECK(back.conf == l.conf);

    CHECK_THROWS_AS(parse_mot_line("1,2,3"), FormatError);
    CHECK_THROWS_AS(parse_mot_line("x,2,3,4,5,6,7,-1,-1,-1"), FormatError);
}

TEST_CASE("sequence round-trip through txt + feat is exact") {
    auto dir = fs::temp_directory_path() / "idtrack_io_test";
    fs::create_directories(dir);
    auto seq = generate_sequence(small_scene(31));
    std::string stem = (dir / "seq_0000").string();
    write_sequence(seq, stem);
    LabeledSequence back = read_sequence(stem);
    CHECK(back == seq);

    // writing again produces byte-identical files
    std::string stem2 = (dir / "again").string();
    write_sequence(seq, stem2);
    CHECK(sha256_hex_file(stem + ".txt") == sha256_hex_file(stem2 + ".txt"));
    CHECK(sha256_hex_file(stem + ".feat") == sha256_hex_file(stem2 + ".feat"));
    fs::remove_all(dir);
}

TEST_CASE("truncated feature sidecar is rejected") {
    auto dir = fs::temp_directory_path() / "idtrack_io_trunc";
    fs::create_directories(dir);
    auto seq = generate_sequence(small_scene(37));
    std::string stem = (dir / "seq").string();
    write_sequence(seq, stem);
    auto size = fs::file_size(stem + ".feat");
    fs::resize_file(stem + ".feat", size - 7);
    CHECK_THROWS_AS(read_sequence(stem), FormatError);
    std::ofstream(stem + ".feat", std::ios::binary) << "BAD!";
    CHECK_THROWS_AS(read_sequence(stem), FormatError);
    fs::remove_all(dir);
}

TEST_CASE("dataset round-trip preserves every sequence") {
    auto dir = fs::temp_directory_path() / "idtrack_ds_test";
    fs::remove_all(dir);
    auto corpus = generate_corpus(small_scene(0), 4, 50);
    write_dataset(corpus, dir.string());
    auto back = read_dataset(dir.string());
    REQUIRE(back.size() == corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) CHECK(back[i] == corpus[i]);
    fs::remove_all(dir);
}

TEST_CASE("empty trailing frames survive the round-trip") {
    LabeledSequence seq;
    seq.feature_dim = 4;
    seq.frames.resize(5);  // all empty
    LabeledDetection ld;
    ld.gt_track_id = 1;
    ld.det.box = Box{1, 2, 3, 4};
    ld.det.confidence = 0.9f;
    ld.det.feature = {0.1f, 0.2f, 0.3f, 0.4f};
    seq.frames[1].push_back(ld);
    auto dir = fs::temp_directory_path() / "idtrack_io_empty";
    fs::create_directories(dir);
    std::string stem = (dir / "s").string();
    write_sequence(seq, stem);
    CHECK(read_sequence(stem) == seq);
    fs::remove_all(dir);
}
