// CSV reading/writing and the metadata header stamped on every output file.
#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "switchband/errors.hpp"
#include "switchband/kalman.hpp"

namespace switchband {

inline constexpr std::string_view kVersion = "0.1.0";

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Identifies a run: stamped as the first line of every CSV and as the
/// leading "meta" object of every JSON output.
struct RunMetadata {
    std::string experiment;
    std::string config_hash;
    std::uint64_t seed = 0;

    std::string csv_header() const {
        std::ostringstream os;
        os << "# switchband " << kVersion << " experiment=" << experiment << " config_hash=" << config_hash
           << " seed=" << seed;
        return os.str();
    }

    nlohmann::ordered_json json() const {
        nlohmann::ordered_json j;
        j["tool"] = "switchband";
        j["version"] = std::string(kVersion);
        j["experiment"] = experiment;
        j["config_hash"] = config_hash;
        j["seed"] = seed;
        return j;
    }
};

/// Fixed-format number for CSV cells (locale independent, reproducible).
inline std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const RunMetadata& meta, const std::vector<std::string>& columns)
        : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
        out_ << meta.csv_header() << '\n';
        row_strings(columns);
    }

    void row(std::initializer_list<double> values) {
        bool first = true;
        for (double v : values) {
            if (!first) out_ << ',';
            out_ << fmt_num(v);
            first = false;
        }
        out_ << '\n';
    }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << fmt_num(values[i]);
        }
        out_ << '\n';
    }

    void row_strings(const std::vector<std::string>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << values[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

inline void write_json(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

namespace detail {

inline bool is_data_line(const std::string& line) {
    for (char c : line) {
        if (c == ' ' || c == '\t' || c == '\r') continue;
        return c == '-' || c == '+' || c == '.' || (c >= '0' && c <= '9');
    }
    return false;
}

inline std::vector<double> split_numbers(const std::string& line, const std::string& path, std::size_t lineno) {
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
        } catch (const std::exception&) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
        }
    }
    return out;
}

}  // namespace detail

/// Observation increments from a CSV with columns t, dy_1..dy_m. Header and
/// '#' comment lines are skipped. t is the end of each increment's interval.
inline std::vector<ObservationIncrement> read_increment_csv(const std::string& path, Eigen::Index m) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open observation file " + path);
    std::vector<ObservationIncrement> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!detail::is_data_line(line)) continue;
        const auto v = detail::split_numbers(line, path, lineno);
        if (static_cast<Eigen::Index>(v.size()) != m + 1) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(m + 1) +
                              " columns (t, dy_1..dy_m)");
        }
        ObservationIncrement inc{v[0], Vector(m)};
        for (Eigen::Index i = 0; i < m; ++i) inc.dy(i) = v[static_cast<std::size_t>(i) + 1];
        out.push_back(std::move(inc));
    }
    return out;
}

/// One 0/1 observation per line.
inline std::vector<int> read_binary_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open observation file " + path);
    std::vector<int> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!detail::is_data_line(line)) continue;
        const auto v = detail::split_numbers(line, path, lineno);
        if (v.size() != 1 || (v[0] != 0.0 && v[0] != 1.0)) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected a single 0 or 1");
        }
        out.push_back(static_cast<int>(v[0]));
    }
    return out;
}

}  // namespace switchband
