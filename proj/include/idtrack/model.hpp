#pragma once

#include <map>
#include <string>

#include "idtrack/config.hpp"
#include "idtrack/decoder.hpp"
#include "idtrack/dictionary.hpp"

namespace idtrack {

// Everything trainable: the ID dictionary plus the decoder stack (which
// owns the relative encoding table and the classification head).
struct Model {
    IDDictionary dict;
    DecoderConfig dec_cfg;
    DecoderWeights dec;

    int K() const { return dict.K; }
    int C() const { return dict.C; }

    // Dictionary first, then decoder parameters, in a fixed order.
    void for_each_param(const std::function<void(const std::string&, Mat&)>& fn);
    void for_each_param(const std::function<void(const std::string&, const Mat&)>& fn) const;
};

Model init_model(int K, int C, const DecoderConfig& dec_cfg, double dict_init_sigma,
                 std::uint64_t dict_seed);

// Self-describing checkpoint container: magic, version, a flat key=value
// metadata block (model shape, training state), then named float64 tensors.
struct Checkpoint {
    KVConfig meta;
    std::map<std::string, Mat> tensors;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Model <-> checkpoint tensor map (tensor names = parameter names).
Checkpoint checkpoint_from_model(const Model& m);
Model model_from_checkpoint(const Checkpoint& ck);

}  // namespace idtrack
