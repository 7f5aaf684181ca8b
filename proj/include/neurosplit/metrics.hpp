#pragma once
// Error metrics and per-experiment reporting: relative L2 per variable over
// recorded rows, spike counting, and mean +/- sample std aggregation over
// training seeds.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "numerics.hpp"
#include "trajectory.hpp"

namespace neurosplit {

inline double relative_l2_error(const std::vector<double>& exact,
                                const std::vector<double>& approx) {
    if (exact.empty()) throw config_error("relative_l2_error: empty series");
    if (exact.size() != approx.size())
        throw config_error("relative_l2_error: series lengths differ");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        double d = exact[i] - approx[i];
        num += d * d;
        den += exact[i] * exact[i];
    }
    if (!(den > 0.0))
        throw config_error("relative_l2_error: reference series is identically zero");
    return std::sqrt(num / den);
}

// Per-variable relative L2 of recorded rows against a reference evaluator
// (full state at any time).
template <class Eval>
std::vector<double> trajectory_errors(const trajectory& tr, Eval&& ref) {
    if (tr.times.empty()) throw config_error("trajectory_errors: no rows");
    int d = tr.dim();
    std::vector<std::vector<double>> ex(d), ap(d);
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        vecd r = ref(tr.times[i]);
        if (r.size() != d) throw config_error("trajectory_errors: reference width mismatch");
        for (int c = 0; c < d; ++c) {
            ex[c].push_back(r[c]);
            ap[c].push_back(tr.states[i][c]);
        }
    }
    std::vector<double> out(d);
    for (int c = 0; c < d; ++c) out[c] = relative_l2_error(ex[c], ap[c]);
    return out;
}

// Same rows with states replaced by |approx - reference|, for error plots.
template <class Eval>
trajectory absolute_errors(const trajectory& tr, Eval&& ref) {
    trajectory out;
    out.labels = tr.labels;
    out.model_id = tr.model_id;
    out.scheme = tr.scheme;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        vecd r = ref(tr.times[i]);
        out.append(tr.times[i], (tr.states[i] - r).cwiseAbs());
    }
    return out;
}

// Upward level crossings; v[i-1] strictly below, v[i] at or above.
inline int count_spikes(const std::vector<double>& t, const std::vector<double>& v,
                        double level) {
    if (t.size() != v.size()) throw config_error("count_spikes: lengths differ");
    int n = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i - 1] < level && v[i] >= level) ++n;
    return n;
}

// All upward crossings, each located by linear interpolation.
inline std::vector<double> spike_crossings(const std::vector<double>& t,
                                           const std::vector<double>& v, double level) {
    if (t.size() != v.size()) throw config_error("spike_crossings: lengths differ");
    std::vector<double> out;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i - 1] < level && v[i] >= level) {
            double w = (level - v[i - 1]) / (v[i] - v[i - 1]);
            out.push_back(t[i - 1] + w * (t[i] - t[i - 1]));
        }
    return out;
}

inline std::optional<double> first_spike_time(const std::vector<double>& t,
                                              const std::vector<double>& v, double level) {
    auto all = spike_crossings(t, v, level);
    if (all.empty()) return std::nullopt;
    return all.front();
}

// ---------------------------------------------------------------------------
struct seed_errors {
    std::uint64_t seed = 0;
    std::vector<double> train, test;  // per variable
    long iters = 0;
    bool converged = true;
    int spikes = 0;
    std::vector<double> spike_times;
};

struct error_report {
    std::string id, scheme;
    std::vector<std::string> labels;
    std::vector<seed_errors> runs;
    std::vector<double> train_mean, train_std, test_mean, test_std;
    int ref_spikes = 0;
    std::vector<double> ref_spike_times;
};

namespace detail {
inline void mean_std(const std::vector<std::vector<double>>& rows, std::vector<double>& mean,
                     std::vector<double>& sd) {
    std::size_t n = rows.size(), d = rows.empty() ? 0 : rows[0].size();
    mean.assign(d, 0.0);
    sd.assign(d, 0.0);
    for (const auto& r : rows)
        for (std::size_t c = 0; c < d; ++c) mean[c] += r[c] / double(n);
    if (n < 2) return;
    for (const auto& r : rows)
        for (std::size_t c = 0; c < d; ++c) sd[c] += (r[c] - mean[c]) * (r[c] - mean[c]);
    for (std::size_t c = 0; c < d; ++c) sd[c] = std::sqrt(sd[c] / double(n - 1));
}
}  // namespace detail

inline void aggregate_report(error_report& r) {
    if (r.runs.empty()) throw config_error("aggregate_report: no runs");
    std::vector<std::vector<double>> tr, te;
    for (const auto& run : r.runs) {
        tr.push_back(run.train);
        te.push_back(run.test);
    }
    detail::mean_std(tr, r.train_mean, r.train_std);
    detail::mean_std(te, r.test_mean, r.test_std);
}

}  // namespace neurosplit
