#pragma once

#include <cstdint>

#include "idtrack/types.hpp"

namespace idtrack {

inline constexpr int kSpecialLabel = 0;  // source_label value for i^spec tracklets

// (K+1) x C table of learnable identity words. Rows 0..K-1 hold the K
// regular words for labels 1..K; row K holds the special newborn word.
struct IDDictionary {
    Mat words;  // (K+1) x C
    int K = 0;
    int C = 0;

    int special_index() const { return K; }
    // Row for internal label k in 1..K.
    auto word(int label) const {
        if (label < 1 || label > K)
            throw StateError("dictionary word: label " + std::to_string(label) + " outside 1.." +
                             std::to_string(K));
        return words.row(label - 1);
    }
    auto special_word() const { return words.row(K); }
};

IDDictionary new_dictionary(int K, int C, double init_sigma, std::uint64_t seed);

// 2C tracklet: feature in [0,C), ID word in [C,2C).
struct Tracklet {
    Vec data;            // length 2C
    int source_label = kSpecialLabel;  // internal label in 1..K, or kSpecialLabel
    int frame_index = 0;

    int width() const { return static_cast<int>(data.size()); }
    auto feature_half() const { return data.head(data.size() / 2); }
    auto word_half() const { return data.tail(data.size() / 2); }
};

Tracklet form_tracklet(const Vec& feature, const Vec& word, int frame_index, int source_label);
Tracklet attach_special(const Vec& feature, const IDDictionary& dict, int frame_index);

}  // namespace idtrack
