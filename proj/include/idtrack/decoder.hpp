#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "idtrack/rng.hpp"
#include "idtrack/types.hpp"

namespace idtrack {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

struct DecoderConfig {
    int num_layers = 6;
    int num_heads = 8;
    int model_width = 512;  // 2C
    int feedforward_width = 0;  // 0 -> 4 * model_width
    int max_rel_offset = 19;  // T; time gaps clamp here
    bool self_attention_enabled = true;
    double dropout_rate = 0.0;
    std::uint64_t seed = 0;

    int ff_width() const { return feedforward_width > 0 ? feedforward_width : 4 * model_width; }
    void validate() const;
};

template <typename S>
struct LinearP {
    MatX<S> w;  // in x out
    MatX<S> b;  // out x 1
};

template <typename S>
struct LayerNormP {
    MatX<S> gamma;  // D x 1
    MatX<S> beta;   // D x 1
};

template <typename S>
struct AttnP {
    LinearP<S> q, k, v, o;
};

template <typename S>
struct LayerP {
    LayerNormP<S> ln_self;
    AttnP<S> self_attn;
    LayerNormP<S> ln_cross;
    AttnP<S> cross_attn;
    LayerNormP<S> ln_ff;
    LinearP<S> ff1, ff2;
};

// All trainable parameters of the ID Decoder: per-layer blocks, final
// normalization, the (K+1) x D classification head, and the learned
// relative temporal encoding table (row g = time gap g, g in 0..max_rel_offset).
template <typename S>
struct DecoderWeightsT {
    std::vector<LayerP<S>> layers;
    LayerNormP<S> ln_final;
    MatX<S> head_w;  // (K+1) x D
    MatX<S> head_b;  // (K+1) x 1
    MatX<S> rel;     // (max_rel_offset + 1) x D

    // Visit every parameter tensor with a stable name, in a fixed order.
    void for_each_param(const std::function<void(const std::string&, MatX<S>&)>& fn);
    void for_each_param(const std::function<void(const std::string&, const MatX<S>&)>& fn) const;

    template <typename T>
    DecoderWeightsT<T> cast() const;
};

using DecoderWeights = DecoderWeightsT<real_t>;

template <typename S>
DecoderWeightsT<S> init_weights_t(const DecoderConfig& config, int K);
DecoderWeights init_weights(const DecoderConfig& config, int K);
// Zero-valued gradient container with matching shapes.
template <typename S>
DecoderWeightsT<S> zeros_like(const DecoderWeightsT<S>& w);

// Row of the relative encoding table for a positive time gap, clamped at
// max_rel_offset.
template <typename S>
Eigen::Matrix<S, 1, Eigen::Dynamic> relative_encoding(int delta_t, const MatX<S>& table);

// Forward-pass intermediates kept for the backward pass.
template <typename S>
struct LnCacheT {
    MatX<S> xhat;
    MatX<S> inv_std;  // rows x 1
};

template <typename S>
struct LayerCacheT {
    MatX<S> x0;  // layer input
    LnCacheT<S> ln_self;
    MatX<S> sa_xn, sa_q, sa_k, sa_v, sa_concat, sa_drop;
    std::vector<MatX<S>> sa_attn;  // per head, N x N
    MatX<S> x1;
    LnCacheT<S> ln_cross;
    MatX<S> ca_xn, ca_q, ca_kbase, ca_vbase, ca_ek, ca_ev, ca_concat, ca_drop;
    std::vector<MatX<S>> ca_attn;  // per head, N x M
    std::vector<MatX<S>> ca_wacc;  // per head, N x G (attention mass per time gap)
    MatX<S> x2;
    LnCacheT<S> ln_ff;
    MatX<S> ff_xn, ff_h1, ff_act, ff_drop;
    MatX<S> x3;
};

template <typename S>
struct DecodeCacheT {
    DecoderConfig cfg;
    MatX<S> queries, memory;
    std::vector<int> query_times, memory_times;
    Eigen::MatrixXi gap;                          // N x M, clamped; valid where allowed
    Eigen::Matrix<char, Eigen::Dynamic, Eigen::Dynamic> cross_allowed;  // N x M
    Eigen::Matrix<char, Eigen::Dynamic, Eigen::Dynamic> self_allowed;   // N x N
    std::vector<LayerCacheT<S>> layers;
    LnCacheT<S> ln_final;
    MatX<S> xf;
};

template <typename S>
struct DecodeResultT {
    MatX<S> logits;  // N x (K+1)
};

// Core forward. Queries/memory are 2C-wide tracklet rows. Causality and
// same-frame self-attention are enforced through the per-token times:
// a query at time t attends memory strictly before t and other queries at
// exactly t. Rows with no attendable memory produce a zero cross-attention
// branch.
template <typename S>
DecodeResultT<S> decoder_forward(const DecoderWeightsT<S>& w, const DecoderConfig& cfg,
                                 const MatX<S>& queries, const std::vector<int>& query_times,
                                 const MatX<S>& memory, const std::vector<int>& memory_times,
                                 DecodeCacheT<S>* cache = nullptr, Rng* dropout_rng = nullptr);

// Single-frame decode: all queries share time t, all memory times must be < t.
template <typename S>
MatX<S> decode(const MatX<S>& queries, const MatX<S>& memory, int t,
               const std::vector<int>& memory_times, const DecoderWeightsT<S>& w,
               const DecoderConfig& cfg, DecodeCacheT<S>* cache = nullptr);

template <typename S>
struct DecoderGradients {
    DecoderWeightsT<S> params;  // same shapes as the weights
    MatX<S> d_queries;          // N x D
    MatX<S> d_memory;           // M x D
};

// Backward through decoder_forward given d(loss)/d(logits).
// Throws NumericError naming the first parameter with a non-finite gradient.
template <typename S>
DecoderGradients<S> decoder_backward(const DecoderWeightsT<S>& w, const DecoderConfig& cfg,
                                     const DecodeCacheT<S>& cache, const MatX<S>& d_logits);

// Row-wise softmax.
template <typename S>
MatX<S> softmax_rows(const MatX<S>& logits);

using DecodeCache = DecodeCacheT<real_t>;

}  // namespace idtrack
