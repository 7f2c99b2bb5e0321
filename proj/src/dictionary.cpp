#include "idtrack/dictionary.hpp"

#include "idtrack/rng.hpp"

namespace idtrack {

IDDictionary new_dictionary(int K, int C, double init_sigma, std::uint64_t seed) {
    if (K < 1) throw ConfigError("new_dictionary: K must be >= 1");
    if (C < 1) throw ConfigError("new_dictionary: C must be >= 1");
    if (init_sigma < 0.0) throw ConfigError("new_dictionary: init_sigma must be >= 0");
    IDDictionary d;
    d.K = K;
    d.C = C;
    d.words.resize(K + 1, C);
    Rng rng(seed);
    for (int r = 0; r < K + 1; ++r)
        for (int c = 0; c < C; ++c) d.words(r, c) = rng.gaussian(init_sigma);
    return d;
}

Tracklet form_tracklet(const Vec& feature, const Vec& word, int frame_index, int source_label) {
    if (feature.size() != word.size())
        throw DimensionError("form_tracklet: feature length " + std::to_string(feature.size()) +
                             " != word length " + std::to_string(word.size()));
    Tracklet t;
    t.data.resize(2 * feature.size());
    t.data.head(feature.size()) = feature;
    t.data.tail(word.size()) = word;
    t.source_label = source_label;
    t.frame_index = frame_index;
    return t;
}

Tracklet attach_special(const Vec& feature, const IDDictionary& dict, int frame_index) {
    if (feature.size() != dict.C)
        throw DimensionError("attach_special: feature length " + std::to_string(feature.size()) +
                             " != dictionary C " + std::to_string(dict.C));
    return form_tracklet(feature, dict.special_word().transpose(), frame_index, kSpecialLabel);
}

}  // namespace idtrack
