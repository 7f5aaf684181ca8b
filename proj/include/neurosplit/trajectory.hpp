#pragma once
// Universal result object: labeled time series with metadata, CSV round-trip.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "numerics.hpp"

namespace neurosplit {

struct trajectory {
    std::vector<std::string> labels;
    std::vector<double> times;
    std::vector<vecd> states;

    std::string model_id, scheme;
    std::uint64_t config_hash = 0;
    std::vector<double> spike_times;

    int dim() const { return int(labels.size()); }

    void append(double t, const vecd& x) {
        if (!times.empty() && !(t > times.back()))
            throw std::logic_error("trajectory: times must be strictly increasing");
        if (x.size() != int(labels.size()))
            throw std::logic_error("trajectory: state width does not match labels");
        times.push_back(t);
        states.push_back(x);
    }
};

namespace detail {
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace detail

inline void write_csv(const trajectory& tr, std::ostream& os) {
    if (!tr.model_id.empty()) os << "# model=" << tr.model_id << '\n';
    if (!tr.scheme.empty()) os << "# scheme=" << tr.scheme << '\n';
    if (tr.config_hash) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)tr.config_hash);
        os << "# config=" << buf << '\n';
    }
    if (!tr.spike_times.empty()) {
        os << "# spikes=";
        for (std::size_t i = 0; i < tr.spike_times.size(); ++i)
            os << (i ? " " : "") << detail::fmt17(tr.spike_times[i]);
        os << '\n';
    }
    os << 't';
    for (const auto& l : tr.labels) os << ',' << l;
    os << '\n';
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        os << detail::fmt17(tr.times[i]);
        for (int c = 0; c < tr.states[i].size(); ++c) os << ',' << detail::fmt17(tr.states[i][c]);
        os << '\n';
    }
}

inline trajectory read_csv(std::istream& is) {
    trajectory tr;
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto eat = [&](const char* key) -> const char* {
                std::string pre = std::string("# ") + key + "=";
                return line.rfind(pre, 0) == 0 ? line.c_str() + pre.size() : nullptr;
            };
            if (const char* v = eat("model")) tr.model_id = v;
            else if (const char* v = eat("scheme")) tr.scheme = v;
            else if (const char* v = eat("config")) tr.config_hash = std::strtoull(v, nullptr, 16);
            else if (const char* v = eat("spikes")) {
                std::istringstream ss(v);
                double x;
                while (ss >> x) tr.spike_times.push_back(x);
            }
            continue;
        }
        std::istringstream ss(line);
        std::string cell;
        if (!header_seen) {
            header_seen = true;
            bool first = true;
            while (std::getline(ss, cell, ',')) {
                if (first) {
                    if (cell != "t") throw config_error("trajectory csv: first column must be t");
                    first = false;
                } else {
                    tr.labels.push_back(cell);
                }
            }
            continue;
        }
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        if (row.size() != tr.labels.size() + 1)
            throw config_error("trajectory csv: ragged row");
        vecd x(int(tr.labels.size()));
        for (std::size_t c = 0; c < tr.labels.size(); ++c) x[int(c)] = row[c + 1];
        tr.append(row[0], x);
    }
    if (!header_seen) throw config_error("trajectory csv: missing header");
    return tr;
}

inline void write_csv_file(const trajectory& tr, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw config_error("cannot open for writing: " + path);
    write_csv(tr, f);
}

inline trajectory read_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open: " + path);
    return read_csv(f);
}

}  // namespace neurosplit
