#include "idtrack/scene.hpp"

#include <algorithm>
#include <cmath>

namespace idtrack {

void SceneConfig::validate() const {
    auto prob = [](double p, const char* name) {
        if (p < 0.0 || p > 1.0) throw ConfigError(std::string("SceneConfig.") + name + " must be in [0,1]");
    };
    if (num_frames < 0) throw ConfigError("SceneConfig.num_frames must be >= 0");
    if (max_objects < 0) throw ConfigError("SceneConfig.max_objects must be >= 0");
    if (feature_dim < 2) throw ConfigError("SceneConfig.feature_dim must be >= 2");
    if (appearance_noise_sigma < 0.0) throw ConfigError("SceneConfig.appearance_noise_sigma must be >= 0");
    if (identity_min_separation < 0.0) throw ConfigError("SceneConfig.identity_min_separation must be >= 0");
    prob(occlusion_prob_per_frame, "occlusion_prob_per_frame");
    prob(birth_prob_per_frame, "birth_prob_per_frame");
    prob(death_prob_per_frame, "death_prob_per_frame");
    if (occlusion_duration_min < 1) throw ConfigError("SceneConfig.occlusion_duration_min must be >= 1");
    if (occlusion_duration_max < occlusion_duration_min)
        throw ConfigError("SceneConfig.occlusion_duration_max must be >= occlusion_duration_min");
    if (false_positive_rate < 0.0) throw ConfigError("SceneConfig.false_positive_rate must be >= 0");
    if (confidence_lo < 0.0 || confidence_hi > 1.0 || confidence_lo > confidence_hi)
        throw ConfigError("SceneConfig.confidence_range must satisfy 0 <= lo <= hi <= 1");
    if (arena_w <= 0.0 || arena_h <= 0.0) throw ConfigError("SceneConfig.arena_size must be positive");
    if (velocity_sigma < 0.0) throw ConfigError("SceneConfig.velocity_sigma must be >= 0");
}

namespace {

std::vector<float> sample_unit_vector(int dim, Rng& rng) {
    std::vector<double> v(dim);
    double norm2 = 0.0;
    for (int i = 0; i < dim; ++i) {
        v[i] = rng.gaussian();
        norm2 += v[i] * v[i];
    }
    double inv = 1.0 / std::sqrt(std::max(norm2, 1e-300));
    std::vector<float> out(dim);
    for (int i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] * inv);
    return out;
}

double latent_dist(const std::vector<float>& a, const std::vector<float>& b) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = double(a[i]) - double(b[i]);
        d2 += d * d;
    }
    return std::sqrt(d2);
}

constexpr int kLatentRetries = 1000;

std::vector<float> sample_separated_latent(int dim, double min_sep,
                                           const std::vector<const std::vector<float>*>& existing,
                                           Rng& rng) {
    for (int attempt = 0; attempt < kLatentRetries; ++attempt) {
        std::vector<float> cand = sample_unit_vector(dim, rng);
        bool ok = true;
        for (const auto* e : existing)
            if (latent_dist(cand, *e) < min_sep) {
                ok = false;
                break;
            }
        if (ok) return cand;
    }
    throw GenerationError("identity latent sampling failed separation constraint after " +
                          std::to_string(kLatentRetries) + " retries");
}

struct LiveTrack {
    int index;  // into tracks vector
    double px, py, vx, vy;
    double bw, bh;
    int occluded_until = -1;  // frame index (exclusive)
};

}  // namespace

std::vector<std::vector<float>> sample_identity_latents(int count, int dim, double min_sep, Rng& rng) {
    std::vector<std::vector<float>> latents;
    latents.reserve(count);
    for (int i = 0; i < count; ++i) {
        std::vector<const std::vector<float>*> existing;
        for (const auto& l : latents) existing.push_back(&l);
        latents.push_back(sample_separated_latent(dim, min_sep, existing, rng));
    }
    return latents;
}

GeneratedSequence generate_sequence_full(const SceneConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    GeneratedSequence out;
    out.seq.feature_dim = cfg.feature_dim;
    out.seq.frames.resize(cfg.num_frames);

    std::vector<LiveTrack> alive;
    int next_track_id = 1;

    auto spawn = [&](int /*frame*/) {
        std::vector<const std::vector<float>*> existing;
        for (const auto& t : out.tracks) existing.push_back(&t.identity_latent);
        GroundTruthTrack t;
        t.track_id = next_track_id++;
        t.identity_latent =
            sample_separated_latent(cfg.feature_dim, cfg.identity_min_separation, existing, rng);
        out.tracks.push_back(std::move(t));

        LiveTrack lt;
        lt.index = static_cast<int>(out.tracks.size()) - 1;
        lt.bw = rng.uniform(0.02, 0.06) * cfg.arena_w;
        lt.bh = rng.uniform(0.02, 0.06) * cfg.arena_h;
        lt.px = rng.uniform(0.0, cfg.arena_w - lt.bw);
        lt.py = rng.uniform(0.0, cfg.arena_h - lt.bh);
        lt.vx = rng.gaussian(cfg.velocity_sigma);
        lt.vy = rng.gaussian(cfg.velocity_sigma);
        alive.push_back(lt);
    };

    for (int i = 0; i < cfg.max_objects; ++i) spawn(0);

    for (int t = 0; t < cfg.num_frames; ++t) {
        // Motion, deaths, occlusion starts, then state recording, in track order.
        for (std::size_t i = 0; i < alive.size();) {
            LiveTrack& lt = alive[i];
            if (t > 0) {
                lt.px += lt.vx;
                lt.py += lt.vy;
                lt.vx += rng.gaussian(0.1 * cfg.velocity_sigma);
                lt.vy += rng.gaussian(0.1 * cfg.velocity_sigma);
                // reflect at arena walls
                if (lt.px < 0.0) { lt.px = -lt.px; lt.vx = -lt.vx; }
                if (lt.py < 0.0) { lt.py = -lt.py; lt.vy = -lt.vy; }
                if (lt.px + lt.bw > cfg.arena_w) { lt.px = 2 * (cfg.arena_w - lt.bw) - lt.px; lt.vx = -lt.vx; }
                if (lt.py + lt.bh > cfg.arena_h) { lt.py = 2 * (cfg.arena_h - lt.bh) - lt.py; lt.vy = -lt.vy; }
                lt.px = std::clamp(lt.px, 0.0, cfg.arena_w - lt.bw);
                lt.py = std::clamp(lt.py, 0.0, cfg.arena_h - lt.bh);
                if (rng.bernoulli(cfg.death_prob_per_frame)) {
                    alive.erase(alive.begin() + i);
                    continue;
                }
            }
            if (t >= lt.occluded_until && rng.bernoulli(cfg.occlusion_prob_per_frame)) {
                int dur = static_cast<int>(
                    rng.uniform_int(cfg.occlusion_duration_min, cfg.occlusion_duration_max));
                lt.occluded_until = t + dur;
            }
            bool visible = t >= lt.occluded_until;
            TrackFrameState st;
            st.frame = t;
            st.box = Box{static_cast<float>(lt.px), static_cast<float>(lt.py),
                         static_cast<float>(lt.bw), static_cast<float>(lt.bh)};
            st.visible = visible;
            out.tracks[lt.index].states.push_back(st);
            ++i;
        }

        if (static_cast<int>(alive.size()) < cfg.max_objects && rng.bernoulli(cfg.birth_prob_per_frame)) {
            spawn(t);
            LiveTrack& lt = alive.back();
            TrackFrameState st;
            st.frame = t;
            st.box = Box{static_cast<float>(lt.px), static_cast<float>(lt.py),
                         static_cast<float>(lt.bw), static_cast<float>(lt.bh)};
            st.visible = true;
            out.tracks[lt.index].states.push_back(st);
        }

        // Emit detections: one per visible track, then false positives.
        auto& frame = out.seq.frames[t];
        for (const LiveTrack& lt : alive) {
            const GroundTruthTrack& gt = out.tracks[lt.index];
            const TrackFrameState& st = gt.states.back();
            if (!st.visible) continue;
            LabeledDetection ld;
            ld.gt_track_id = gt.track_id;
            ld.det.box = st.box;
            ld.det.confidence = static_cast<float>(rng.uniform(cfg.confidence_lo, cfg.confidence_hi));
            ld.det.feature.resize(cfg.feature_dim);
            for (int d = 0; d < cfg.feature_dim; ++d)
                ld.det.feature[d] = static_cast<float>(double(gt.identity_latent[d]) +
                                                       rng.gaussian(cfg.appearance_noise_sigma));
            frame.push_back(std::move(ld));
        }
        int n_fp = rng.poisson(cfg.false_positive_rate);
        for (int f = 0; f < n_fp; ++f) {
            LabeledDetection ld;
            ld.gt_track_id = kNoTrack;
            double bw = rng.uniform(0.02, 0.06) * cfg.arena_w;
            double bh = rng.uniform(0.02, 0.06) * cfg.arena_h;
            ld.det.box = Box{static_cast<float>(rng.uniform(0.0, cfg.arena_w - bw)),
                             static_cast<float>(rng.uniform(0.0, cfg.arena_h - bh)),
                             static_cast<float>(bw), static_cast<float>(bh)};
            ld.det.confidence = static_cast<float>(rng.uniform(cfg.confidence_lo, cfg.confidence_hi));
            ld.det.feature = sample_unit_vector(cfg.feature_dim, rng);
            frame.push_back(std::move(ld));
        }
    }
    return out;
}

LabeledSequence generate_sequence(const SceneConfig& config) {
    return generate_sequence_full(config).seq;
}

std::vector<LabeledSequence> generate_corpus(const SceneConfig& config, int n_sequences,
                                             std::uint64_t base_seed) {
    if (n_sequences < 1) throw ConfigError("generate_corpus: n_sequences must be >= 1");
    std::vector<LabeledSequence> out;
    out.reserve(n_sequences);
    for (int i = 0; i < n_sequences; ++i) {
        SceneConfig c = config;
        c.seed = base_seed + static_cast<std::uint64_t>(i);
        out.push_back(generate_sequence(c));
    }
    return out;
}

}  // namespace idtrack
