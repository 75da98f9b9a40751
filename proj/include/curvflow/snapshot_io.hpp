#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "curvflow/convex_body.hpp"
#include "curvflow/error.hpp"

namespace curvflow {

inline constexpr const char* snapshot_format = "curvflow-snapshot";
inline constexpr int snapshot_version = 1;

/// A support function at a time stamp.
struct Snapshot {
    double time = 0.0;
    SpectralField field;
};

inline nlohmann::json snapshot_to_json(const SpectralField& field, double time) {
    nlohmann::json j;
    j["format"] = snapshot_format;
    j["version"] = snapshot_version;
    j["dimension"] = field.dimension;
    j["degree"] = field.degree;
    j["time"] = time;
    j["coefficients"] = field.coefficients;
    return j;
}

inline Snapshot snapshot_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != snapshot_format)
            throw IoError("not a snapshot record: format '" + j.at("format").get<std::string>() + "'");
        if (j.at("version").get<int>() != snapshot_version)
            throw IoError("unsupported snapshot version " + std::to_string(j.at("version").get<int>()));
        Snapshot s;
        s.time = j.at("time").get<double>();
        s.field.dimension = j.at("dimension").get<int>();
        s.field.degree = j.at("degree").get<int>();
        s.field.coefficients = j.at("coefficients").get<std::vector<double>>();
        if (s.field.dimension != 1 && s.field.dimension != 2)
            throw IoError("snapshot dimension must be 1 or 2");
        if (s.field.degree < 0
            || s.field.coefficients.size() != coefficient_count(s.field.dimension, s.field.degree))
            throw IoError("snapshot coefficient count does not match its degree");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed snapshot: ") + e.what());
    }
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("cannot parse " + path.string() + ": " + e.what());
    }
}

inline void write_snapshot(const std::filesystem::path& path, const SpectralField& field, double time) {
    write_text_file(path, snapshot_to_json(field, time).dump(1) + "\n");
}

inline Snapshot read_snapshot(const std::filesystem::path& path) {
    return snapshot_from_json(read_json_file(path));
}

} // namespace curvflow
