#include "idtrack/decoder.hpp"

#include <cmath>
#include <limits>

namespace idtrack {

void DecoderConfig::validate() const {
    if (num_layers < 1) throw ConfigError("DecoderConfig.num_layers must be >= 1");
    if (num_heads < 1) throw ConfigError("DecoderConfig.num_heads must be >= 1");
    if (model_width < 1 || model_width % num_heads != 0)
        throw ConfigError("DecoderConfig.model_width must be a positive multiple of num_heads");
    if (max_rel_offset < 1) throw ConfigError("DecoderConfig.max_rel_offset must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("DecoderConfig.dropout_rate must be in [0,1)");
}

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInitSigma = 0.02;

template <typename S>
MatX<S> gaussian_matrix(int rows, int cols, double sigma, Rng& rng) {
    MatX<S> m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = static_cast<S>(rng.gaussian(sigma));
    return m;
}

template <typename S>
LinearP<S> init_linear(int in, int out, Rng& rng) {
    LinearP<S> l;
    l.w = gaussian_matrix<S>(in, out, kInitSigma, rng);
    l.b = MatX<S>::Zero(out, 1);
    return l;
}

template <typename S>
LayerNormP<S> init_ln(int dim) {
    LayerNormP<S> ln;
    ln.gamma = MatX<S>::Ones(dim, 1);
    ln.beta = MatX<S>::Zero(dim, 1);
    return ln;
}

template <typename S>
AttnP<S> init_attn(int dim, Rng& rng) {
    AttnP<S> a;
    a.q = init_linear<S>(dim, dim, rng);
    a.k = init_linear<S>(dim, dim, rng);
    a.v = init_linear<S>(dim, dim, rng);
    a.o = init_linear<S>(dim, dim, rng);
    return a;
}

// y = LN(x) row-wise; fills cache.
template <typename S>
MatX<S> layer_norm(const MatX<S>& x, const LayerNormP<S>& p, LnCacheT<S>& c) {
    const int n = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    c.xhat.resize(n, d);
    c.inv_std.resize(n, 1);
    MatX<S> y(n, d);
    for (int i = 0; i < n; ++i) {
        S mu = x.row(i).mean();
        S var = (x.row(i).array() - mu).square().sum() / static_cast<S>(d);
        S inv = S(1) / std::sqrt(var + static_cast<S>(kLnEps));
        c.inv_std(i, 0) = inv;
        c.xhat.row(i) = (x.row(i).array() - mu) * inv;
        y.row(i) = c.xhat.row(i).cwiseProduct(p.gamma.transpose()) + p.beta.transpose();
    }
    return y;
}

// Backward of layer_norm; accumulates parameter grads, returns dx.
template <typename S>
MatX<S> layer_norm_backward(const MatX<S>& dy, const LayerNormP<S>& p, const LnCacheT<S>& c,
                            LayerNormP<S>& g) {
    const int n = static_cast<int>(dy.rows());
    const int d = static_cast<int>(dy.cols());
    MatX<S> dx(n, d);
    for (int i = 0; i < n; ++i) {
        auto xhat = c.xhat.row(i).array();
        auto dyr = dy.row(i).array();
        g.gamma.col(0).transpose().array() += dyr * xhat;
        g.beta.col(0).transpose().array() += dyr;
        Eigen::Array<S, 1, Eigen::Dynamic> dxhat = dyr * p.gamma.col(0).transpose().array();
        S m1 = dxhat.mean();
        S m2 = (dxhat * xhat).mean();
        dx.row(i) = (c.inv_std(i, 0) * (dxhat - m1 - xhat * m2)).matrix();
    }
    return dx;
}

template <typename S>
MatX<S> linear_fwd(const MatX<S>& x, const LinearP<S>& p) {
    return (x * p.w).rowwise() + p.b.col(0).transpose();
}

// dx from dy; accumulates dW, db.
template <typename S>
MatX<S> linear_bwd(const MatX<S>& x, const MatX<S>& dy, const LinearP<S>& p, LinearP<S>& g) {
    g.w += x.transpose() * dy;
    g.b.col(0) += dy.colwise().sum().transpose();
    return dy * p.w.transpose();
}

template <typename S>
MatX<S> dropout_mask(int rows, int cols, double rate, Rng* rng) {
    MatX<S> m;
    if (rate > 0.0 && rng != nullptr) {
        m.resize(rows, cols);
        const S keep = static_cast<S>(1.0 / (1.0 - rate));
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) m(r, c) = rng->uniform() < rate ? S(0) : keep;
    }
    return m;  // empty when dropout is off
}

template <typename S>
void apply_mask_inplace(MatX<S>& x, const MatX<S>& mask) {
    if (mask.size() > 0) x = x.cwiseProduct(mask);
}

}  // namespace

template <typename S>
void DecoderWeightsT<S>::for_each_param(
    const std::function<void(const std::string&, MatX<S>&)>& fn) {
    auto lin = [&](const std::string& p, LinearP<S>& l) {
        fn(p + ".w", l.w);
        fn(p + ".b", l.b);
    };
    auto ln = [&](const std::string& p, LayerNormP<S>& l) {
        fn(p + ".gamma", l.gamma);
        fn(p + ".beta", l.beta);
    };
    auto attn = [&](const std::string& p, AttnP<S>& a) {
        lin(p + ".q", a.q);
        lin(p + ".k", a.k);
        lin(p + ".v", a.v);
        lin(p + ".o", a.o);
    };
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string p = "layers." + std::to_string(i);
        ln(p + ".ln_self", layers[i].ln_self);
        attn(p + ".self", layers[i].self_attn);
        ln(p + ".ln_cross", layers[i].ln_cross);
        attn(p + ".cross", layers[i].cross_attn);
        ln(p + ".ln_ff", layers[i].ln_ff);
        lin(p + ".ff1", layers[i].ff1);
        lin(p + ".ff2", layers[i].ff2);
    }
    ln("ln_final", ln_final);
    fn("head.w", head_w);
    fn("head.b", head_b);
    fn("rel", rel);
}

template <typename S>
void DecoderWeightsT<S>::for_each_param(
    const std::function<void(const std::string&, const MatX<S>&)>& fn) const {
    const_cast<DecoderWeightsT<S>*>(this)->for_each_param(
        [&](const std::string& name, MatX<S>& m) { fn(name, m); });
}

template <typename S>
template <typename T>
DecoderWeightsT<T> DecoderWeightsT<S>::cast() const {
    DecoderWeightsT<T> out;
    out.layers.resize(layers.size());
    auto cvt = [](const MatX<S>& m) { return m.template cast<T>().eval(); };
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerP<S>& a = layers[i];
        LayerP<T>& b = out.layers[i];
        auto cl = [&](const LinearP<S>& x, LinearP<T>& y) { y.w = cvt(x.w); y.b = cvt(x.b); };
        auto cn = [&](const LayerNormP<S>& x, LayerNormP<T>& y) {
            y.gamma = cvt(x.gamma);
            y.beta = cvt(x.beta);
        };
        cn(a.ln_self, b.ln_self);
        cl(a.self_attn.q, b.self_attn.q); cl(a.self_attn.k, b.self_attn.k);
        cl(a.self_attn.v, b.self_attn.v); cl(a.self_attn.o, b.self_attn.o);
        cn(a.ln_cross, b.ln_cross);
        cl(a.cross_attn.q, b.cross_attn.q); cl(a.cross_attn.k, b.cross_attn.k);
        cl(a.cross_attn.v, b.cross_attn.v); cl(a.cross_attn.o, b.cross_attn.o);
        cn(a.ln_ff, b.ln_ff);
        cl(a.ff1, b.ff1);
        cl(a.ff2, b.ff2);
    }
    out.ln_final.gamma = cvt(ln_final.gamma);
    out.ln_final.beta = cvt(ln_final.beta);
    out.head_w = cvt(head_w);
    out.head_b = cvt(head_b);
    out.rel = cvt(rel);
    return out;
}

template <typename S>
DecoderWeightsT<S> init_weights_t(const DecoderConfig& cfg, int K) {
    cfg.validate();
    if (K < 1) throw ConfigError("init_weights: K must be >= 1");
    Rng rng(cfg.seed);
    const int D = cfg.model_width;
    DecoderWeightsT<S> w;
    w.layers.resize(cfg.num_layers);
    for (auto& layer : w.layers) {
        layer.ln_self = init_ln<S>(D);
        layer.self_attn = init_attn<S>(D, rng);
        layer.ln_cross = init_ln<S>(D);
        layer.cross_attn = init_attn<S>(D, rng);
        layer.ln_ff = init_ln<S>(D);
        layer.ff1 = init_linear<S>(D, cfg.ff_width(), rng);
        layer.ff2 = init_linear<S>(cfg.ff_width(), D, rng);
    }
    w.ln_final = init_ln<S>(D);
    w.head_w = gaussian_matrix<S>(K + 1, D, kInitSigma, rng);
    w.head_b = MatX<S>::Zero(K + 1, 1);
    w.rel = gaussian_matrix<S>(cfg.max_rel_offset + 1, D, kInitSigma, rng);
    return w;
}

DecoderWeights init_weights(const DecoderConfig& cfg, int K) {
    return init_weights_t<real_t>(cfg, K);
}

template <typename S>
DecoderWeightsT<S> zeros_like(const DecoderWeightsT<S>& w) {
    DecoderWeightsT<S> z = w;
    z.for_each_param([](const std::string&, MatX<S>& m) { m.setZero(); });
    return z;
}

template <typename S>
Eigen::Matrix<S, 1, Eigen::Dynamic> relative_encoding(int delta_t, const MatX<S>& table) {
    if (delta_t <= 0)
        throw StateError("relative_encoding: delta_t must be >= 1, got " + std::to_string(delta_t));
    int max_off = static_cast<int>(table.rows()) - 1;
    return table.row(std::min(delta_t, max_off));
}

template <typename S>
MatX<S> softmax_rows(const MatX<S>& logits) {
    MatX<S> out(logits.rows(), logits.cols());
    for (int i = 0; i < logits.rows(); ++i) {
        S mx = logits.row(i).maxCoeff();
        Eigen::Array<S, 1, Eigen::Dynamic> e = (logits.row(i).array() - mx).exp();
        out.row(i) = (e / e.sum()).matrix();
    }
    return out;
}

template <typename S>
DecodeResultT<S> decoder_forward(const DecoderWeightsT<S>& w, const DecoderConfig& cfg,
                                 const MatX<S>& queries, const std::vector<int>& query_times,
                                 const MatX<S>& memory, const std::vector<int>& memory_times,
                                 DecodeCacheT<S>* cache, Rng* dropout_rng) {
    cfg.validate();
    const int N = static_cast<int>(queries.rows());
    const int M = static_cast<int>(memory.rows());
    const int D = cfg.model_width;
    const int H = cfg.num_heads;
    const int d = D / H;
    const int G = cfg.max_rel_offset + 1;
    const S neg_inf = -std::numeric_limits<S>::infinity();
    const S scale = S(1) / std::sqrt(static_cast<S>(d));

    if (N < 1) throw DimensionError("decoder_forward: need at least one query");
    if (queries.cols() != D)
        throw DimensionError("decoder_forward: query width " + std::to_string(queries.cols()) +
                             " != model_width " + std::to_string(D));
    if (M > 0 && memory.cols() != D)
        throw DimensionError("decoder_forward: memory width " + std::to_string(memory.cols()) +
                             " != model_width " + std::to_string(D));
    if (static_cast<int>(query_times.size()) != N)
        throw DimensionError("decoder_forward: query_times size mismatch");
    if (static_cast<int>(memory_times.size()) != M)
        throw DimensionError("decoder_forward: memory_times size mismatch");
    if (static_cast<int>(w.layers.size()) != cfg.num_layers)
        throw ConfigError("decoder_forward: weights have " + std::to_string(w.layers.size()) +
                          " layers, config says " + std::to_string(cfg.num_layers));

    DecodeCacheT<S> local;
    DecodeCacheT<S>& c = cache ? *cache : local;
    c.cfg = cfg;
    c.queries = queries;
    c.memory = memory;
    c.query_times = query_times;
    c.memory_times = memory_times;
    c.layers.assign(cfg.num_layers, LayerCacheT<S>{});

    // causality mask + clamped gaps
    c.gap.setZero(N, M);
    c.cross_allowed.setZero(N, M);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < M; ++j) {
            int g = query_times[i] - memory_times[j];
            if (g >= 1) {
                c.cross_allowed(i, j) = 1;
                c.gap(i, j) = std::min(g, cfg.max_rel_offset);
            }
        }
    c.self_allowed.setZero(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            if (query_times[i] == query_times[j]) c.self_allowed(i, j) = 1;

    MatX<S> x = queries;
    for (int li = 0; li < cfg.num_layers; ++li) {
        const LayerP<S>& lp = w.layers[li];
        LayerCacheT<S>& lc = c.layers[li];
        lc.x0 = x;

        if (cfg.self_attention_enabled) {
            lc.sa_xn = layer_norm(x, lp.ln_self, lc.ln_self);
            lc.sa_q = linear_fwd(lc.sa_xn, lp.self_attn.q);
            lc.sa_k = linear_fwd(lc.sa_xn, lp.self_attn.k);
            lc.sa_v = linear_fwd(lc.sa_xn, lp.self_attn.v);
            lc.sa_attn.resize(H);
            lc.sa_concat.resize(N, D);
            for (int h = 0; h < H; ++h) {
                auto Qh = lc.sa_q.middleCols(h * d, d);
                auto Kh = lc.sa_k.middleCols(h * d, d);
                auto Vh = lc.sa_v.middleCols(h * d, d);
                MatX<S> scores = Qh * Kh.transpose() * scale;
                for (int i = 0; i < N; ++i)
                    for (int j = 0; j < N; ++j)
                        if (!c.self_allowed(i, j)) scores(i, j) = neg_inf;
                lc.sa_attn[h] = softmax_rows(scores);
                lc.sa_concat.middleCols(h * d, d) = lc.sa_attn[h] * Vh;
            }
            MatX<S> y = linear_fwd(lc.sa_concat, lp.self_attn.o);
            lc.sa_drop = dropout_mask<S>(N, D, cfg.dropout_rate, dropout_rng);
            apply_mask_inplace(y, lc.sa_drop);
            x = x + y;
        }
        lc.x1 = x;

        if (M > 0) {
            lc.ca_xn = layer_norm(x, lp.ln_cross, lc.ln_cross);
            lc.ca_q = linear_fwd(lc.ca_xn, lp.cross_attn.q);
            lc.ca_kbase = linear_fwd(memory, lp.cross_attn.k);
            lc.ca_vbase = linear_fwd(memory, lp.cross_attn.v);
            lc.ca_ek = w.rel * lp.cross_attn.k.w;  // G x D, no bias
            lc.ca_ev = w.rel * lp.cross_attn.v.w;
            lc.ca_attn.resize(H);
            lc.ca_wacc.resize(H);
            lc.ca_concat.resize(N, D);
            for (int h = 0; h < H; ++h) {
                auto Qh = lc.ca_q.middleCols(h * d, d);
                auto Kh = lc.ca_kbase.middleCols(h * d, d);
                auto Vh = lc.ca_vbase.middleCols(h * d, d);
                auto Ekh = lc.ca_ek.middleCols(h * d, d);
                auto Evh = lc.ca_ev.middleCols(h * d, d);
                MatX<S> qk = Qh * Kh.transpose();         // N x M
                MatX<S> qe = Qh * Ekh.transpose();        // N x G
                MatX<S>& A = lc.ca_attn[h];
                A.setZero(N, M);
                for (int i = 0; i < N; ++i) {
                    S mx = neg_inf;
                    for (int j = 0; j < M; ++j)
                        if (c.cross_allowed(i, j)) {
                            S s = (qk(i, j) + qe(i, c.gap(i, j))) * scale;
                            A(i, j) = s;
                            mx = std::max(mx, s);
                        }
                    if (mx == neg_inf) {
                        A.row(i).setZero();  // no attendable memory
                        continue;
                    }
                    S sum = S(0);
                    for (int j = 0; j < M; ++j) {
                        if (c.cross_allowed(i, j)) {
                            A(i, j) = std::exp(A(i, j) - mx);
                            sum += A(i, j);
                        } else {
                            A(i, j) = S(0);
                        }
                    }
                    A.row(i) /= sum;
                }
                MatX<S>& Wacc = lc.ca_wacc[h];
                Wacc.setZero(N, G);
                for (int i = 0; i < N; ++i)
                    for (int j = 0; j < M; ++j)
                        if (c.cross_allowed(i, j)) Wacc(i, c.gap(i, j)) += A(i, j);
                lc.ca_concat.middleCols(h * d, d) = A * Vh + Wacc * Evh;
            }
            MatX<S> y = linear_fwd(lc.ca_concat, lp.cross_attn.o);
            lc.ca_drop = dropout_mask<S>(N, D, cfg.dropout_rate, dropout_rng);
            apply_mask_inplace(y, lc.ca_drop);
            x = x + y;
        }
        lc.x2 = x;

        lc.ff_xn = layer_norm(x, lp.ln_ff, lc.ln_ff);
        lc.ff_h1 = linear_fwd(lc.ff_xn, lp.ff1);
        lc.ff_act = lc.ff_h1.cwiseMax(S(0));
        MatX<S> y = linear_fwd(lc.ff_act, lp.ff2);
        lc.ff_drop = dropout_mask<S>(N, D, cfg.dropout_rate, dropout_rng);
        apply_mask_inplace(y, lc.ff_drop);
        x = x + y;
        lc.x3 = x;
    }

    c.xf = layer_norm(x, w.ln_final, c.ln_final);
    DecodeResultT<S> out;
    out.logits = (c.xf * w.head_w.transpose()).rowwise() + w.head_b.col(0).transpose();
    return out;
}

template <typename S>
MatX<S> decode(const MatX<S>& queries, const MatX<S>& memory, int t,
               const std::vector<int>& memory_times, const DecoderWeightsT<S>& w,
               const DecoderConfig& cfg, DecodeCacheT<S>* cache) {
    if (memory.rows() == 0)
        throw StateError("decode: empty memory; caller must short-circuit the empty-window case");
    for (int mt : memory_times)
        if (mt >= t)
            throw StateError("decode: memory time " + std::to_string(mt) +
                             " not before query time " + std::to_string(t));
    std::vector<int> qt(static_cast<std::size_t>(queries.rows()), t);
    return decoder_forward(w, cfg, queries, qt, memory, memory_times, cache).logits;
}

template <typename S>
DecoderGradients<S> decoder_backward(const DecoderWeightsT<S>& w, const DecoderConfig& cfg,
                                     const DecodeCacheT<S>& c, const MatX<S>& d_logits) {
    const int N = static_cast<int>(c.queries.rows());
    const int M = static_cast<int>(c.memory.rows());
    const int D = cfg.model_width;
    const int H = cfg.num_heads;
    const int d = D / H;
    const S scale = S(1) / std::sqrt(static_cast<S>(d));

    DecoderGradients<S> out;
    out.params = zeros_like(w);
    out.d_memory = MatX<S>::Zero(std::max(M, 0), D);
    DecoderWeightsT<S>& g = out.params;

    // head + final norm
    g.head_w += d_logits.transpose() * c.xf;
    g.head_b.col(0) += d_logits.colwise().sum().transpose();
    MatX<S> dx = layer_norm_backward<S>(d_logits * w.head_w, w.ln_final, c.ln_final, g.ln_final);

    for (int li = cfg.num_layers - 1; li >= 0; --li) {
        const LayerP<S>& lp = w.layers[li];
        const LayerCacheT<S>& lc = c.layers[li];
        LayerP<S>& lg = g.layers[li];

        // ffn
        {
            MatX<S> dbranch = dx;
            apply_mask_inplace(dbranch, lc.ff_drop);
            MatX<S> da = linear_bwd(lc.ff_act, dbranch, lp.ff2, lg.ff2);
            MatX<S> dh1 = (lc.ff_h1.array() > S(0)).template cast<S>().matrix().cwiseProduct(da);
            MatX<S> dxn = linear_bwd(lc.ff_xn, dh1, lp.ff1, lg.ff1);
            dx += layer_norm_backward(dxn, lp.ln_ff, lc.ln_ff, lg.ln_ff);
        }

        // cross attention
        if (M > 0) {
            MatX<S> dbranch = dx;
            apply_mask_inplace(dbranch, lc.ca_drop);
            MatX<S> dconcat = linear_bwd(lc.ca_concat, dbranch, lp.cross_attn.o, lg.cross_attn.o);
            MatX<S> dQ = MatX<S>::Zero(N, D);
            MatX<S> dKbase = MatX<S>::Zero(M, D);
            MatX<S> dVbase = MatX<S>::Zero(M, D);
            MatX<S> dEk = MatX<S>::Zero(c.cfg.max_rel_offset + 1, D);
            MatX<S> dEv = MatX<S>::Zero(c.cfg.max_rel_offset + 1, D);
            for (int h = 0; h < H; ++h) {
                auto Qh = lc.ca_q.middleCols(h * d, d);
                auto Kh = lc.ca_kbase.middleCols(h * d, d);
                auto Vh = lc.ca_vbase.middleCols(h * d, d);
                auto Ekh = lc.ca_ek.middleCols(h * d, d);
                auto Evh = lc.ca_ev.middleCols(h * d, d);
                const MatX<S>& A = lc.ca_attn[h];
                const MatX<S>& Wacc = lc.ca_wacc[h];
                auto dout = dconcat.middleCols(h * d, d);

                // dA_ij = dout_i . (Vh_j + Evh_{gap_ij})
                MatX<S> dA = dout * Vh.transpose();        // N x M
                MatX<S> doe = dout * Evh.transpose();      // N x G
                for (int i = 0; i < N; ++i)
                    for (int j = 0; j < M; ++j)
                        if (c.cross_allowed(i, j)) dA(i, j) += doe(i, c.gap(i, j));

                dVbase.middleCols(h * d, d) += A.transpose() * dout;
                dEv.middleCols(h * d, d) += Wacc.transpose() * dout;

                // softmax backward (masked entries have A = 0)
                MatX<S> dS(N, M);
                for (int i = 0; i < N; ++i) {
                    S dot = A.row(i).dot(dA.row(i));
                    dS.row(i) = A.row(i).cwiseProduct(dA.row(i).array().matrix()) - dot * A.row(i);
                }
                MatX<S> dsacc = MatX<S>::Zero(N, c.cfg.max_rel_offset + 1);
                for (int i = 0; i < N; ++i)
                    for (int j = 0; j < M; ++j)
                        if (c.cross_allowed(i, j)) dsacc(i, c.gap(i, j)) += dS(i, j);

                dQ.middleCols(h * d, d) += (dS * Kh + dsacc * Ekh) * scale;
                dKbase.middleCols(h * d, d) += dS.transpose() * Qh * scale;
                dEk.middleCols(h * d, d) += dsacc.transpose() * Qh * scale;
            }
            MatX<S> dxn = linear_bwd(lc.ca_xn, dQ, lp.cross_attn.q, lg.cross_attn.q);
            out.d_memory += dKbase * lp.cross_attn.k.w.transpose();
            out.d_memory += dVbase * lp.cross_attn.v.w.transpose();
            lg.cross_attn.k.w += c.memory.transpose() * dKbase + w.rel.transpose() * dEk;
            lg.cross_attn.k.b.col(0) += dKbase.colwise().sum().transpose();
            lg.cross_attn.v.w += c.memory.transpose() * dVbase + w.rel.transpose() * dEv;
            lg.cross_attn.v.b.col(0) += dVbase.colwise().sum().transpose();
            g.rel += dEk * lp.cross_attn.k.w.transpose() + dEv * lp.cross_attn.v.w.transpose();
            dx += layer_norm_backward(dxn, lp.ln_cross, lc.ln_cross, lg.ln_cross);
        }

        // self attention
        if (cfg.self_attention_enabled) {
            MatX<S> dbranch = dx;
            apply_mask_inplace(dbranch, lc.sa_drop);
            MatX<S> dconcat = linear_bwd(lc.sa_concat, dbranch, lp.self_attn.o, lg.self_attn.o);
            MatX<S> dQ = MatX<S>::Zero(N, D);
            MatX<S> dK = MatX<S>::Zero(N, D);
            MatX<S> dV = MatX<S>::Zero(N, D);
            for (int h = 0; h < H; ++h) {
                auto Qh = lc.sa_q.middleCols(h * d, d);
                auto Kh = lc.sa_k.middleCols(h * d, d);
                auto Vh = lc.sa_v.middleCols(h * d, d);
                const MatX<S>& A = lc.sa_attn[h];
                auto dout = dconcat.middleCols(h * d, d);
                MatX<S> dA = dout * Vh.transpose();
                dV.middleCols(h * d, d) += A.transpose() * dout;
                MatX<S> dS(N, N);
                for (int i = 0; i < N; ++i) {
                    S dot = A.row(i).dot(dA.row(i));
                    dS.row(i) = A.row(i).cwiseProduct(dA.row(i)) - dot * A.row(i);
                }
                dQ.middleCols(h * d, d) += dS * Kh * scale;
                dK.middleCols(h * d, d) += dS.transpose() * Qh * scale;
            }
            MatX<S> dxn = linear_bwd(lc.sa_xn, dQ, lp.self_attn.q, lg.self_attn.q);
            dxn += linear_bwd(lc.sa_xn, dK, lp.self_attn.k, lg.self_attn.k);
            dxn += linear_bwd(lc.sa_xn, dV, lp.self_attn.v, lg.self_attn.v);
            dx += layer_norm_backward(dxn, lp.ln_self, lc.ln_self, lg.ln_self);
        }
    }

    out.d_queries = dx;

    g.for_each_param([](const std::string& name, MatX<S>& m) {
        if (!m.allFinite()) throw NumericError("non-finite gradient in parameter " + name);
    });
    return out;
}

// explicit instantiations
template struct DecoderWeightsT<float>;
template struct DecoderWeightsT<double>;
template DecoderWeightsT<float> DecoderWeightsT<double>::cast<float>() const;
template DecoderWeightsT<double> DecoderWeightsT<float>::cast<double>() const;
template DecoderWeightsT<double> DecoderWeightsT<double>::cast<double>() const;
template DecoderWeightsT<float> init_weights_t<float>(const DecoderConfig&, int);
template DecoderWeightsT<double> init_weights_t<double>(const DecoderConfig&, int);
template DecoderWeightsT<float> zeros_like<float>(const DecoderWeightsT<float>&);
template DecoderWeightsT<double> zeros_like<double>(const DecoderWeightsT<double>&);
template Eigen::Matrix<float, 1, Eigen::Dynamic> relative_encoding<float>(int, const MatX<float>&);
template Eigen::Matrix<double, 1, Eigen::Dynamic> relative_encoding<double>(int, const MatX<double>&);
template MatX<float> softmax_rows<float>(const MatX<float>&);
template MatX<double> softmax_rows<double>(const MatX<double>&);
template DecodeResultT<float> decoder_forward<float>(const DecoderWeightsT<float>&, const DecoderConfig&,
                                                     const MatX<float>&, const std::vector<int>&,
                                                     const MatX<float>&, const std::vector<int>&,
                                                     DecodeCacheT<float>*, Rng*);
template DecodeResultT<double> decoder_forward<double>(const DecoderWeightsT<double>&, const DecoderConfig&,
                                                       const MatX<double>&, const std::vector<int>&,
                                                       const MatX<double>&, const std::vector<int>&,
                                                       DecodeCacheT<double>*, Rng*);
template MatX<float> decode<float>(const MatX<float>&, const MatX<float>&, int,
                                   const std::vector<int>&, const DecoderWeightsT<float>&,
                                   const DecoderConfig&, DecodeCacheT<float>*);
template MatX<double> decode<double>(const MatX<double>&, const MatX<double>&, int,
                                     const std::vector<int>&, const DecoderWeightsT<double>&,
                                     const DecoderConfig&, DecodeCacheT<double>*);
template DecoderGradients<float> decoder_backward<float>(const DecoderWeightsT<float>&,
                                                         const DecoderConfig&,
                                                         const DecodeCacheT<float>&,
                                                         const MatX<float>&);
template DecoderGradients<double> decoder_backward<double>(const DecoderWeightsT<double>&,
                                                           const DecoderConfig&,
                                                           const DecodeCacheT<double>&,
                                                           const MatX<double>&);

}  // namespace idtrack
