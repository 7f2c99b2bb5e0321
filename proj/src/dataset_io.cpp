#include "idtrack/dataset_io.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "idtrack/utils.hpp"

namespace fs = std::filesystem;

namespace idtrack {

namespace {

constexpr char kFeatMagic[4] = {'I', 'D', 'F', 'T'};
constexpr std::uint32_t kFeatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::istream& in, const std::string& path, std::streamoff off) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw FormatError(path + ": truncated at byte offset " + std::to_string(off));
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in, const std::string& path, std::streamoff off) {
    std::uint64_t lo = get_u32(in, path, off);
    std::uint64_t hi = get_u32(in, path, off + 4);
    return lo | (hi << 32);
}

}  // namespace

MotLine parse_mot_line(const std::string& line) {
    std::istringstream ss(line);
    MotLine l;
    char comma;
    float trail;
    if (!(ss >> l.frame >> comma >> l.id >> comma >> l.box.x >> comma >> l.box.y >> comma >>
          l.box.w >> comma >> l.box.h >> comma >> l.conf))
        throw FormatError("malformed MOT line: \"" + line + "\"");
    // trailing -1,-1,-1 fields are ignored
    for (int i = 0; i < 3 && (ss >> comma >> trail); ++i) {}
    return l;
}

std::string format_mot_line(const MotLine& l) {
    std::ostringstream out;
    out << l.frame << ',' << l.id << ',' << float_repr(l.box.x) << ',' << float_repr(l.box.y)
        << ',' << float_repr(l.box.w) << ',' << float_repr(l.box.h) << ',' << float_repr(l.conf)
        << ",-1,-1,-1";
    return out.str();
}

std::vector<MotLine> read_mot_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open MOT file: " + path);
    std::vector<MotLine> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        lines.push_back(parse_mot_line(line));
    }
    return lines;
}

void write_mot_file(const std::string& path, const std::vector<MotLine>& lines) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write MOT file: " + path);
    for (const auto& l : lines) out << format_mot_line(l) << "\n";
}

void write_sequence(const LabeledSequence& seq, const std::string& stem) {
    std::vector<MotLine> lines;
    std::uint64_t count = 0;
    for (std::size_t t = 0; t < seq.frames.size(); ++t)
        for (const auto& ld : seq.frames[t]) {
            MotLine l;
            l.frame = static_cast<int>(t) + 1;
            l.id = ld.gt_track_id;
            l.box = ld.det.box;
            l.conf = ld.det.confidence;
            lines.push_back(l);
            ++count;
        }
    write_mot_file(stem + ".txt", lines);

    std::ofstream out(stem + ".feat", std::ios::binary);
    if (!out) throw DataError("cannot write feature file: " + stem + ".feat");
    out.write(kFeatMagic, 4);
    put_u32(out, kFeatVersion);
    put_u32(out, static_cast<std::uint32_t>(seq.feature_dim));
    put_u32(out, static_cast<std::uint32_t>(seq.frames.size()));
    put_u64(out, count);
    for (const auto& frame : seq.frames)
        for (const auto& ld : frame) {
            if (static_cast<int>(ld.det.feature.size()) != seq.feature_dim)
                throw DimensionError("write_sequence: feature length " +
                                     std::to_string(ld.det.feature.size()) + " != feature_dim " +
                                     std::to_string(seq.feature_dim));
            static_assert(sizeof(float) == 4);
            out.write(reinterpret_cast<const char*>(ld.det.feature.data()),
                      4 * static_cast<std::streamsize>(seq.feature_dim));
        }
}

LabeledSequence read_sequence(const std::string& stem) {
    const std::string feat_path = stem + ".feat";
    std::ifstream in(feat_path, std::ios::binary);
    if (!in) throw DataError("cannot open feature file: " + feat_path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kFeatMagic, 4) != 0)
        throw FormatError(feat_path + ": bad magic at byte offset 0");
    std::uint32_t version = get_u32(in, feat_path, 4);
    if (version != kFeatVersion)
        throw FormatError(feat_path + ": unsupported version " + std::to_string(version) +
                          " at byte offset 4");
    std::uint32_t dim = get_u32(in, feat_path, 8);
    std::uint32_t num_frames = get_u32(in, feat_path, 12);
    std::uint64_t count = get_u64(in, feat_path, 16);

    std::vector<MotLine> lines = read_mot_file(stem + ".txt");
    if (lines.size() != count)
        throw FormatError(feat_path + ": header count " + std::to_string(count) + " != " +
                          std::to_string(lines.size()) + " text lines");

    LabeledSequence seq;
    seq.feature_dim = static_cast<int>(dim);
    seq.frames.resize(num_frames);
    std::streamoff off = 24;
    for (std::uint64_t i = 0; i < count; ++i) {
        const MotLine& l = lines[i];
        if (l.frame < 1 || l.frame > static_cast<int>(num_frames))
            throw FormatError(stem + ".txt: frame " + std::to_string(l.frame) +
                              " outside [1," + std::to_string(num_frames) + "]");
        LabeledDetection ld;
        ld.gt_track_id = l.id;
        ld.det.box = l.box;
        ld.det.confidence = l.conf;
        ld.det.feature.resize(dim);
        in.read(reinterpret_cast<char*>(ld.det.feature.data()), 4 * static_cast<std::streamsize>(dim));
        if (!in)
            throw FormatError(feat_path + ": truncated feature row at byte offset " +
                              std::to_string(off));
        off += 4 * static_cast<std::streamoff>(dim);
        seq.frames[l.frame - 1].push_back(std::move(ld));
    }
    return seq;
}

namespace {

std::string seq_stem(const std::string& dir, int i) {
    char name[32];
    std::snprintf(name, sizeof(name), "seq_%04d", i);
    return (fs::path(dir) / name).string();
}

}  // namespace

void write_dataset(const std::vector<LabeledSequence>& seqs, const std::string& dir) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < seqs.size(); ++i)
        write_sequence(seqs[i], seq_stem(dir, static_cast<int>(i)));
    std::ofstream meta(fs::path(dir) / "corpus.txt");
    meta << "sequences = " << seqs.size() << "\n";
}

std::vector<LabeledSequence> read_dataset(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a dataset directory: " + dir);
    std::vector<LabeledSequence> seqs;
    for (int i = 0;; ++i) {
        std::string stem = seq_stem(dir, i);
        if (!fs::exists(stem + ".feat")) break;
        seqs.push_back(read_sequence(stem));
    }
    return seqs;
}

}  // namespace idtrack
