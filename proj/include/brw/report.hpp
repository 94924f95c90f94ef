#pragma once

// CSV and JSON reporting. CSV output is byte-deterministic for a fixed
// config: doubles are printed with %.17g and rows are emitted in replica
// order regardless of thread scheduling.

#include "core.hpp"
#include "particle.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace brw {

inline std::string fmt_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns) {
        out_.open(path);
        if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
        for (size_t i = 0; i < columns.size(); ++i)
            out_ << (i ? "," : "") << columns[i];
        out_ << "\n";
    }

    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i)
            out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

inline void append_measure_rows(CsvWriter& csv, int replica, const MeasurePath& path) {
    for (size_t k = 0; k < path.times.size(); ++k)
        for (size_t f = 0; f < path.values.size(); ++f)
            csv.row({std::to_string(replica), fmt_g17(path.times[k]), std::to_string(f),
                     fmt_g17(path.values[f][k]), fmt_g17(path.population[k])});
}

struct Check {
    std::string name;
    double statistic = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct ExperimentReport {
    std::string experiment;
    std::string config_hash;
    std::vector<Check> checks;
    double runtime_s = 0.0;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["experiment"] = experiment;
        j["config_hash"] = config_hash;
        j["checks"] = nlohmann::json::array();
        for (const auto& c : checks)
            j["checks"].push_back({{"name", c.name},
                                   {"statistic", c.statistic},
                                   {"tolerance", c.tolerance},
                                   {"pass", c.pass}});
        j["runtime_s"] = runtime_s;
        return j;
    }
};

inline void write_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

// field snapshot / path export: (site, time, value)
inline void write_field_csv(const std::string& path, const std::vector<double>& times,
                            const std::vector<const Field*>& fields) {
    CsvWriter csv(path, {"site", "time", "value"});
    for (size_t k = 0; k < times.size(); ++k)
        for (int64_t a = 0; a < fields[k]->size(); ++a)
            csv.row({std::to_string(a), fmt_g17(times[k]), fmt_g17((*fields[k])[a])});
}

// binary snapshot: u32 d, u32 n, u32 M, then site values row-major as f64
inline void write_field_binary(const Field& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    uint32_t hdr[3] = {uint32_t(f.box.d), uint32_t(f.box.n), uint32_t(f.box.M)};
    out.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
    out.write(reinterpret_cast<const char*>(f.v.data()),
              std::streamsize(f.v.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

} // namespace brw
