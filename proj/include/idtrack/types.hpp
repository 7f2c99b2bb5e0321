#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace idtrack {

using real_t = double;
using Mat = Eigen::Matrix<real_t, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::Matrix<real_t, Eigen::Dynamic, 1>;
using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad configuration value; CLI maps this to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// Vector/matrix shape mismatch.
struct DimensionError : Error {
    using Error::Error;
};

// Operation on an inconsistent tracker/window state.
struct StateError : Error {
    using Error::Error;
};

// ID dictionary capacity exhausted.
struct CapacityError : Error {
    using Error::Error;
};

// Malformed file on disk; CLI maps this to exit code 3.
struct FormatError : Error {
    using Error::Error;
};

// Missing or inconsistent input data; CLI maps this to exit code 3.
struct DataError : Error {
    using Error::Error;
};

// Non-finite value encountered; CLI maps this to exit code 4.
struct NumericError : Error {
    using Error::Error;
};

// Latent sampling or similar bounded-retry procedure failed.
struct GenerationError : Error {
    using Error::Error;
};

struct Box {
    float x = 0.f, y = 0.f, w = 0.f, h = 0.f;

    bool operator==(const Box&) const = default;
};

// One per-frame observed object: box, confidence and a C-dimensional
// appearance feature.
struct Detection {
    Box box;
    float confidence = 0.f;
    std::vector<float> feature;

    bool operator==(const Detection&) const = default;
};

inline constexpr int kNoTrack = -1;  // gt id of a false positive

struct LabeledDetection {
    Detection det;
    int gt_track_id = kNoTrack;

    bool operator==(const LabeledDetection&) const = default;
};

struct LabeledSequence {
    int feature_dim = 0;
    std::vector<std::vector<LabeledDetection>> frames;

    bool operator==(const LabeledSequence&) const = default;
};

double iou(const Box& a, const Box& b);

}  // namespace idtrack
