#pragma once

#include <string>
#include <vector>

#include "idtrack/types.hpp"

namespace idtrack {

// MOTChallenge text line: frame,id,x,y,w,h,conf,-1,-1,-1. Frames are
// 1-based in files, 0-based in memory.
struct MotLine {
    int frame = 0;  // 1-based
    int id = 0;
    Box box;
    float conf = 0.f;
};

MotLine parse_mot_line(const std::string& line);
std::string format_mot_line(const MotLine& l);
std::vector<MotLine> read_mot_file(const std::string& path);
void write_mot_file(const std::string& path, const std::vector<MotLine>& lines);

// One sequence = `<stem>.txt` (MOT layout, false positives carry id -1)
// plus `<stem>.feat` (binary feature sidecar, little-endian:
// magic "IDFT", u32 version, u32 feature_dim, u32 num_frames, u64 count,
// then count rows of feature_dim float32). Row order follows the text file.
void write_sequence(const LabeledSequence& seq, const std::string& stem);
LabeledSequence read_sequence(const std::string& stem);

// Corpus = directory of seq_0000.{txt,feat}, seq_0001.{txt,feat}, ...
void write_dataset(const std::vector<LabeledSequence>& seqs, const std::string& dir);
std::vector<LabeledSequence> read_dataset(const std::string& dir);

}  // namespace idtrack
