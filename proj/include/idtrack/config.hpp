#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "idtrack/types.hpp"

namespace idtrack {

// Flat `key = value` config with `#` comments. Later assignments win,
// so CLI overrides can be applied by re-setting keys after parsing.
class KVConfig {
public:
    KVConfig() = default;

    static KVConfig parse_file(const std::string& path);
    static KVConfig parse_text(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_real(const std::string& key) const;
    double get_real(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;
    // Comma-separated list of reals.
    std::vector<double> get_real_list(const std::string& key) const;
    std::vector<std::string> get_string_list(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

    std::string to_text() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace idtrack
