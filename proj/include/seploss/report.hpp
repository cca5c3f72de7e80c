#ifndef SEPLOSS_REPORT_HPP
#define SEPLOSS_REPORT_HPP

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "seploss/metrics.hpp"
#include "seploss/nn.hpp"
#include "seploss/version.hpp"

namespace seploss {

inline std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// CSV layout: header row holds the system/column names, first column the
// metric or source name. UTF-8, '.' decimal separator.
inline void write_matrix_csv(const std::string& path, const NamedMatrix& matrix,
                             const std::string& first_col_label = "metric") {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write CSV: " + path);
    out << first_col_label;
    for (const auto& c : matrix.col_names) out << "," << c;
    out << "\n";
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        out << matrix.row_names[i];
        for (std::size_t j = 0; j < matrix.cols(); ++j)
            out << "," << format_value(matrix.values.at(i, j));
        out << "\n";
    }
    if (!out) throw IoError("short write on CSV: " + path);
}

inline NamedMatrix read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty CSV: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto split = [](const std::string& s) {
        std::vector<std::string> parts;
        std::string cur;
        for (char ch : s) {
            if (ch == ',') {
                parts.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(ch);
            }
        }
        parts.push_back(cur);
        return parts;
    };

    std::vector<std::string> header = split(line);
    if (header.size() < 2) throw IoError("CSV header needs at least one system column: " + path);
    NamedMatrix m;
    std::vector<std::string> cols(header.begin() + 1, header.end());
    std::vector<std::string> rows;
    std::vector<double> cells;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> parts = split(line);
        if (parts.size() != header.size())
            throw IoError("ragged CSV row '" + parts[0] + "' in: " + path);
        rows.push_back(parts[0]);
        for (std::size_t j = 1; j < parts.size(); ++j) {
            try {
                cells.push_back(std::stod(parts[j]));
            } catch (const std::exception&) {
                throw IoError("non-numeric CSV cell '" + parts[j] + "' in: " + path);
            }
        }
    }
    m.init(std::move(rows), std::move(cols));
    m.values.data = std::move(cells);
    return m;
}

// JSON mirror of the CSV content; carries the manifest reference.
inline void write_matrix_json(const std::string& path, const NamedMatrix& matrix,
                              const std::string& manifest_ref,
                              const std::string& first_col_label = "metric") {
    nlohmann::json j;
    j["columns"] = matrix.col_names;
    j["label"] = first_col_label;
    nlohmann::json rows = nlohmann::json::object();
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        nlohmann::json vals = nlohmann::json::array();
        for (std::size_t c = 0; c < matrix.cols(); ++c) vals.push_back(matrix.values.at(i, c));
        rows[matrix.row_names[i]] = vals;
    }
    j["rows"] = rows;
    if (!matrix.warnings.empty()) j["warnings"] = matrix.warnings;
    if (!manifest_ref.empty()) j["manifest"] = manifest_ref;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write JSON: " + path);
    out << j.dump(2) << "\n";
}

inline std::uint64_t fnv1a_hash(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string iso8601_utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

// Every run drops one of these next to its outputs; payload files stay
// byte-stable across reruns, only the manifest carries timestamps.
struct RunManifest {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string tool_version = kVersion;
    std::string started_utc;
    std::string finished_utc;
    std::vector<std::string> outputs;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["command"] = command;
        j["config_hash"] = config_hash;
        j["seed"] = seed;
        j["tool_version"] = tool_version;
        j["started_utc"] = started_utc;
        j["finished_utc"] = finished_utc;
        j["outputs"] = outputs;
        return j;
    }

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write manifest: " + path);
        out << to_json().dump(2) << "\n";
    }
};

// JSON manifest for a flat tensor blob written by write_tensor_blob.
inline void write_tensor_manifest(const std::string& path,
                                  const std::vector<TensorFileEntry>& entries,
                                  const nlohmann::json& flags = nlohmann::json::object()) {
    nlohmann::json j;
    j["format"] = "seploss-tensors-v1";
    j["byte_order"] = "little";
    j["dtype"] = "float64";
    nlohmann::json list = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json t;
        t["name"] = e.name;
        t["shape"] = e.shape;
        t["offset_bytes"] = e.offset_bytes;
        list.push_back(t);
    }
    j["tensors"] = list;
    if (!flags.empty()) j["flags"] = flags;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write tensor manifest: " + path);
    out << j.dump(2) << "\n";
}

inline std::vector<TensorFileEntry> read_tensor_manifest(const std::string& path,
                                                         nlohmann::json* flags = nullptr) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read tensor manifest: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed tensor manifest " + path + ": " + e.what());
    }
    if (j.value("format", "") != "seploss-tensors-v1")
        throw IoError("unknown tensor manifest format in: " + path);
    std::vector<TensorFileEntry> entries;
    for (const auto& t : j.at("tensors")) {
        TensorFileEntry e;
        e.name = t.at("name").get<std::string>();
        e.shape = t.at("shape").get<std::vector<std::size_t>>();
        e.offset_bytes = t.at("offset_bytes").get<std::size_t>();
        entries.push_back(std::move(e));
    }
    if (flags != nullptr && j.contains("flags")) *flags = j["flags"];
    return entries;
}

}  // namespace seploss

#endif
