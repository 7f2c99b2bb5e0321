#include "idtrack/model.hpp"

#include <cstring>
#include <fstream>

namespace idtrack {

void Model::for_each_param(const std::function<void(const std::string&, Mat&)>& fn) {
    fn("dictionary", dict.words);
    dec.for_each_param(fn);
}

void Model::for_each_param(const std::function<void(const std::string&, const Mat&)>& fn) const {
    const_cast<Model*>(this)->for_each_param(
        [&](const std::string& name, Mat& m) { fn(name, m); });
}

Model init_model(int K, int C, const DecoderConfig& dec_cfg, double dict_init_sigma,
                 std::uint64_t dict_seed) {
    if (dec_cfg.model_width != 2 * C)
        throw ConfigError("init_model: model_width " + std::to_string(dec_cfg.model_width) +
                          " != 2C = " + std::to_string(2 * C));
    Model m;
    m.dict = new_dictionary(K, C, dict_init_sigma, dict_seed);
    m.dec_cfg = dec_cfg;
    m.dec = init_weights(dec_cfg, K);
    return m;
}

namespace {

constexpr char kCkMagic[4] = {'I', 'D', 'C', 'K'};
constexpr std::uint32_t kCkVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError(path + ": truncated checkpoint");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kCkMagic, 4);
    put_u32(out, kCkVersion);
    const std::string meta = ck.meta.to_text();
    put_u32(out, static_cast<std::uint32_t>(meta.size()));
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    put_u32(out, static_cast<std::uint32_t>(ck.tensors.size()));
    for (const auto& [name, m] : ck.tensors) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<std::uint32_t>(m.rows()));
        put_u32(out, static_cast<std::uint32_t>(m.cols()));
        // row-major float64, little-endian
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) {
                double v = m(r, c);
                out.write(reinterpret_cast<const char*>(&v), 8);
            }
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCkMagic, 4) != 0)
        throw FormatError(path + ": bad checkpoint magic");
    std::uint32_t version = get_u32(in, path);
    if (version != kCkVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    std::uint32_t meta_len = get_u32(in, path);
    std::string meta(meta_len, '\0');
    in.read(meta.data(), meta_len);
    if (!in) throw FormatError(path + ": truncated metadata");
    Checkpoint ck;
    ck.meta = KVConfig::parse_text(meta);
    std::uint32_t n = get_u32(in, path);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::uint32_t name_len = get_u32(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        std::uint32_t rows = get_u32(in, path);
        std::uint32_t cols = get_u32(in, path);
        Mat m(rows, cols);
        for (std::uint32_t r = 0; r < rows; ++r)
            for (std::uint32_t c = 0; c < cols; ++c) {
                double v;
                in.read(reinterpret_cast<char*>(&v), 8);
                m(r, c) = v;
            }
        if (!in) throw FormatError(path + ": truncated tensor " + name);
        ck.tensors[name] = std::move(m);
    }
    return ck;
}

Checkpoint checkpoint_from_model(const Model& m) {
    Checkpoint ck;
    ck.meta.set("K", std::to_string(m.K()));
    ck.meta.set("C", std::to_string(m.C()));
    ck.meta.set("num_layers", std::to_string(m.dec_cfg.num_layers));
    ck.meta.set("num_heads", std::to_string(m.dec_cfg.num_heads));
    ck.meta.set("model_width", std::to_string(m.dec_cfg.model_width));
    ck.meta.set("feedforward_width", std::to_string(m.dec_cfg.ff_width()));
    ck.meta.set("max_rel_offset", std::to_string(m.dec_cfg.max_rel_offset));
    ck.meta.set("self_attention_enabled", m.dec_cfg.self_attention_enabled ? "true" : "false");
    m.for_each_param([&](const std::string& name, const Mat& p) { ck.tensors[name] = p; });
    return ck;
}

Model model_from_checkpoint(const Checkpoint& ck) {
    DecoderConfig cfg;
    int K = static_cast<int>(ck.meta.get_int("K"));
    int C = static_cast<int>(ck.meta.get_int("C"));
    cfg.num_layers = static_cast<int>(ck.meta.get_int("num_layers"));
    cfg.num_heads = static_cast<int>(ck.meta.get_int("num_heads"));
    cfg.model_width = static_cast<int>(ck.meta.get_int("model_width"));
    cfg.feedforward_width = static_cast<int>(ck.meta.get_int("feedforward_width"));
    cfg.max_rel_offset = static_cast<int>(ck.meta.get_int("max_rel_offset"));
    cfg.self_attention_enabled = ck.meta.get_bool("self_attention_enabled");
    Model m = init_model(K, C, cfg, 0.0, 0);
    m.for_each_param([&](const std::string& name, Mat& p) {
        auto it = ck.tensors.find(name);
        if (it == ck.tensors.end()) throw FormatError("checkpoint missing tensor " + name);
        if (it->second.rows() != p.rows() || it->second.cols() != p.cols())
            throw FormatError("checkpoint tensor " + name + " has shape " +
                              std::to_string(it->second.rows()) + "x" +
                              std::to_string(it->second.cols()) + ", expected " +
                              std::to_string(p.rows()) + "x" + std::to_string(p.cols()));
        p = it->second;
    });
    return m;
}

}  // namespace idtrack
