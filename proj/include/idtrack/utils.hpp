#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace idtrack {

// Hex SHA-256 digest of a byte string / file.
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex_file(const std::string& path);

// Shortest decimal representation that round-trips the value exactly.
std::string float_repr(float v);
std::string double_repr(double v);

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Minimal SVG line plot, one polyline per series.
void write_svg_line_plot(const std::string& path, const std::string& title,
                         const std::string& xlabel, const std::string& ylabel,
                         const std::vector<PlotSeries>& series);

}  // namespace idtrack
