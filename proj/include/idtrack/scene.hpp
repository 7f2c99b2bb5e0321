#pragma once

#include <cstdint>
#include <vector>

#include "idtrack/rng.hpp"
#include "idtrack/types.hpp"

namespace idtrack {

// Synthetic stand-in for a detector: identity-bearing appearance features
// with controllable noise, occlusions, births/deaths and false positives.
struct SceneConfig {
    int num_frames = 60;
    int max_objects = 8;
    int feature_dim = 32;
    double appearance_noise_sigma = 0.1;
    double identity_min_separation = 0.5;
    double occlusion_prob_per_frame = 0.05;
    int occlusion_duration_min = 2;
    int occlusion_duration_max = 6;
    double birth_prob_per_frame = 0.02;
    double death_prob_per_frame = 0.005;
    double false_positive_rate = 0.0;  // expected count per frame
    double confidence_lo = 0.7;
    double confidence_hi = 1.0;
    double arena_w = 1000.0;
    double arena_h = 1000.0;
    double velocity_sigma = 2.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrackFrameState {
    int frame = 0;
    Box box;
    bool visible = true;
};

struct GroundTruthTrack {
    int track_id = 0;  // positive, unique per sequence
    std::vector<float> identity_latent;  // unit norm
    std::vector<TrackFrameState> states;
};

struct GeneratedSequence {
    LabeledSequence seq;
    std::vector<GroundTruthTrack> tracks;
};

GeneratedSequence generate_sequence_full(const SceneConfig& config);
LabeledSequence generate_sequence(const SceneConfig& config);

// Sequence i uses seed = base_seed + i.
std::vector<LabeledSequence> generate_corpus(const SceneConfig& config, int n_sequences,
                                             std::uint64_t base_seed);

// Unit-norm latents with pairwise euclidean separation >= min_sep.
// Throws GenerationError after bounded retries.
std::vector<std::vector<float>> sample_identity_latents(int count, int dim, double min_sep,
                                                        Rng& rng);

}  // namespace idtrack
