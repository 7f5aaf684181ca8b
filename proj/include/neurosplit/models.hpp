#pragma once
// Neuron models: parameter sets, right-hand sides, spike rules, drive currents.
//
// Unit conventions: LIF works in SI (volts, seconds, amperes); Izhikevich and
// Hodgkin-Huxley work in mV / ms / uA/cm^2 as usual.

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "numerics.hpp"

namespace neurosplit {

// ---------------------------------------------------------------------------
// Piecewise-constant drive current. Right-continuous: at a switch time the new
// level applies. Malformed switch lists fail at construction, not at eval.
struct current_source {
    std::vector<double> times;   // strictly increasing switch times
    std::vector<double> levels;  // levels.size() == times.size() + 1

    current_source() : levels{0.0} {}
    current_source(std::vector<double> t, std::vector<double> l)
        : times(std::move(t)), levels(std::move(l)) {
        if (levels.size() != times.size() + 1)
            throw config_error("current_source: need one more level than switch times");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1]))
                throw config_error("current_source: switch times must be strictly increasing");
    }

    double operator()(double t) const {
        std::size_t k = std::upper_bound(times.begin(), times.end(), t) - times.begin();
        return levels[k];
    }

    bool is_constant() const { return times.empty(); }

    static current_source constant(double i0) { return current_source({}, {i0}); }
    static current_source step(double t_on, double before, double after) {
        return current_source({t_on}, {before, after});
    }
    static current_source window(double t_on, double t_off, double amp, double base = 0.0) {
        return current_source({t_on, t_off}, {base, amp, base});
    }
    static current_source pulse_train(double t0, double period, double width, double amp,
                                      int count, double base = 0.0) {
        if (count < 1 || width <= 0.0 || width >= period)
            throw config_error("pulse_train: need count >= 1 and 0 < width < period");
        std::vector<double> t, l{base};
        for (int k = 0; k < count; ++k) {
            t.push_back(t0 + k * period);
            t.push_back(t0 + k * period + width);
            l.push_back(amp);
            l.push_back(base);
        }
        return current_source(std::move(t), std::move(l));
    }
};

// ---------------------------------------------------------------------------
// Leaky integrate-and-fire. tau = r * c_m.
struct lif_params {
    double c_m = 5e-3;     // membrane capacitance [F]
    double r = 5.1;        // membrane resistance [Ohm]
    double v_rest = 0.0;   // resting potential [V]
    double v_th = 1.0;     // firing threshold [V]
    double tau_ref = 0.0;  // refractory hold after a reset [s]
    double tau() const { return r * c_m; }
};

inline double lif_rhs(const lif_params& p, double t, double v, const current_source& i) {
    return (-(v - p.v_rest) + p.r * i(t)) / p.tau();
}

// Exact RC response for a piecewise-constant drive, with optional threshold
// resets and refractory holds. Query times must be non-decreasing.
inline std::vector<double> lif_exact(const lif_params& p, const current_source& cur,
                                     double v_init, const std::vector<double>& query,
                                     bool threshold = false,
                                     std::vector<double>* spike_times = nullptr,
                                     double t0 = 0.0) {
    std::vector<double> out;
    out.reserve(query.size());
    double tau = p.tau();
    double t = t0;  // v_init is the state at t0, not at the first query time
    double v = v_init;
    double hold_until = -std::numeric_limits<double>::infinity();
    std::size_t qi = 0;

    auto v_inf_at = [&](double tt) { return p.v_rest + p.r * cur(tt); };

    // march segment-by-segment over the merged breakpoint/query grid
    while (qi < query.size()) {
        // next event: either a current switch after t or the next query time
        double tq = query[qi];
        double t_next = tq;
        for (double ts : cur.times)
            if (ts > t && ts < t_next) t_next = ts;

        auto advance = [&](double from, double to, double v_from) {
            if (to <= from) return v_from;
            if (to <= hold_until) return p.v_rest;
            double a = from;
            double va = v_from;
            if (a < hold_until) { a = hold_until; va = p.v_rest; }
            double vinf = v_inf_at(a);
            return vinf + (va - vinf) * std::exp(-(to - a) / tau);
        };

        if (threshold) {
            // look for a crossing inside (t, t_next]
            double a = std::max(t, hold_until);
            double va = (t < hold_until) ? p.v_rest : v;
            double vinf = v_inf_at(a);
            if (a < t_next && vinf > p.v_th && va < p.v_th) {
                double t_cross = a + tau * std::log((vinf - va) / (vinf - p.v_th));
                if (t_cross <= t_next) {
                    // emit queries up to the crossing, then reset
                    while (qi < query.size() && query[qi] <= t_cross) {
                        out.push_back(advance(t, query[qi], v));
                        ++qi;
                    }
                    if (spike_times) spike_times->push_back(t_cross);
                    t = t_cross;
                    v = p.v_rest;
                    hold_until = t_cross + p.tau_ref;
                    continue;
                }
            }
        }

        v = advance(t, t_next, v);
        t = t_next;
        if (t == tq) {
            out.push_back(v);
            ++qi;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Izhikevich model, state x = (v, u) [mV, -].
struct izhikevich_params {
    double a = 0.02;
    double b = 0.2;
    double c = -50.0;  // reset potential [mV]
    double d = 2.0;
    double v_th = 30.0;  // spike cut-off [mV]
};

inline vecd izhikevich_rhs(const izhikevich_params& p, double t, const vecd& x,
                           const current_source& i) {
    vecd f(2);
    f[0] = 0.04 * x[0] * x[0] + 5.0 * x[0] + 140.0 - x[1] + i(t);
    f[1] = p.a * (p.b * x[0] - x[1]);
    return f;
}

inline vecd izhikevich_reset(const izhikevich_params& p, const vecd& x) {
    vecd y(2);
    y[0] = p.c;
    y[1] = x[1] + p.d;
    return y;
}

// ---------------------------------------------------------------------------
// Hodgkin-Huxley, state x = (v, n, m, h) [mV, -, -, -].
struct hh_params {
    double g_na = 120.0, g_k = 36.0, g_l = 0.3;    // max conductances [mS/cm^2]
    double e_na = 50.0, e_k = -77.0, e_l = -54.0;  // reversal potentials [mV]
    double c_m = 1.0;                              // membrane capacitance [uF/cm^2]
    double v0 = -65.0;                             // rest / rate reference [mV]
    double n0 = 0.3177, m0 = 0.0529, h0 = 0.5960;  // initial gating values
    double beta_m_divisor = 80.0;                  // classical parameter sets use 18
};

// w / (e^w - 1) with its removable singularity at w = 0.
inline double expm1_ratio(double w) {
    if (std::abs(w) < 1e-7) return 1.0 - 0.5 * w + w * w / 12.0;
    return w / std::expm1(w);
}

struct hh_rate_set {
    double an, bn, am, bm, ah, bh;
};

inline hh_rate_set hh_rates(const hh_params& p, double v) {
    double dv = v - p.v0;
    hh_rate_set r;
    r.an = 0.1 * expm1_ratio(1.0 - 0.1 * dv);
    r.bn = 0.125 * std::exp(-dv / 80.0);
    r.am = expm1_ratio(2.5 - 0.1 * dv);
    r.bm = 4.0 * std::exp(-dv / p.beta_m_divisor);
    r.ah = 0.07 * std::exp(-dv / 20.0);
    r.bh = 1.0 / (1.0 + std::exp(3.0 - 0.1 * dv));
    return r;
}

inline vecd hh_rhs(const hh_params& p, double t, const vecd& x, const current_source& i) {
    double v = x[0], n = x[1], m = x[2], h = x[3];
    hh_rate_set r = hh_rates(p, v);
    vecd f(4);
    f[0] = (i(t) - p.g_na * m * m * m * h * (v - p.e_na) - p.g_k * n * n * n * n * (v - p.e_k) -
            p.g_l * (v - p.e_l)) /
           p.c_m;
    f[1] = r.an * (1.0 - n) - r.bn * n;
    f[2] = r.am * (1.0 - m) - r.bm * m;
    f[3] = r.ah * (1.0 - h) - r.bh * h;
    return f;
}

// Diagonal of d(hh_rhs)/dx with the off-diagonal couplings frozen; this is the
// exact Jacobian of each split sub-problem (voltage eq given gating, and vice versa).
inline double hh_dv_dv(const hh_params& p, const vecd& x) {
    double n = x[1], m = x[2], h = x[3];
    return (-p.g_na * m * m * m * h - p.g_k * n * n * n * n - p.g_l) / p.c_m;
}

// ---------------------------------------------------------------------------
// Spike rule: watch one component against a threshold, apply a reset map.
struct spike_rule {
    int watch = 0;
    double threshold = 0.0;
    std::function<vecd(const vecd&)> reset;
    double refractory = 0.0;  // hold duration after reset (LIF only)
};

// Complete problem statement handed to solvers: rhs with the drive baked in.
// per-equation Caputo orders for the fractional HH variant
struct fractional_orders {
    double v = 0.8, n = 0.8, m = 0.8, h = 0.8;
    static fractional_orders uniform(double q) { return {q, q, q, q}; }
};

struct model_spec {
    std::string id;
    int dim = 1;
    std::vector<std::string> labels;  // trajectory column names
    std::function<vecd(double, const vecd&)> rhs;
    std::function<matd(double, const vecd&)> jac;  // d rhs / d x
    std::optional<spike_rule> spike;
    vecd x0;
};

inline model_spec make_lif_spec(const lif_params& p, const current_source& cur,
                                bool threshold, double v_init) {
    model_spec s;
    s.id = "lif";
    s.dim = 1;
    s.labels = {"v"};
    s.x0 = vecd::Constant(1, v_init);
    s.rhs = [p, cur](double t, const vecd& x) {
        return vecd::Constant(1, lif_rhs(p, t, x[0], cur));
    };
    s.jac = [p](double, const vecd&) { return matd::Constant(1, 1, -1.0 / p.tau()); };
    if (threshold) {
        spike_rule r;
        r.watch = 0;
        r.threshold = p.v_th;
        r.refractory = p.tau_ref;
        r.reset = [p](const vecd&) { return vecd::Constant(1, p.v_rest); };
        s.spike = r;
    }
    return s;
}

inline model_spec make_izhikevich_spec(const izhikevich_params& p, const current_source& cur,
                                       const vecd& x0) {
    model_spec s;
    s.id = "izhikevich";
    s.dim = 2;
    s.labels = {"v", "u"};
    s.x0 = x0;
    s.rhs = [p, cur](double t, const vecd& x) { return izhikevich_rhs(p, t, x, cur); };
    s.jac = [p](double, const vecd& x) {
        matd j(2, 2);
        j(0, 0) = 0.08 * x[0] + 5.0;
        j(0, 1) = -1.0;
        j(1, 0) = p.a * p.b;
        j(1, 1) = -p.a;
        return j;
    };
    spike_rule r;
    r.watch = 0;
    r.threshold = p.v_th;
    r.reset = [p](const vecd& x) { return izhikevich_reset(p, x); };
    s.spike = r;
    return s;
}

inline model_spec make_hh_spec(const hh_params& p, const current_source& cur) {
    model_spec s;
    s.id = "hh";
    s.dim = 4;
    s.labels = {"v", "n", "m", "h"};
    s.x0 = vecd(4);
    s.x0 << p.v0, p.n0, p.m0, p.h0;
    s.rhs = [p, cur](double t, const vecd& x) { return hh_rhs(p, t, x, cur); };
    s.jac = [p, cur](double t, const vecd& x) {
        // central differences; only used by generic consumers, split solvers
        // use the analytic per-equation partials
        matd j(4, 4);
        double h = 1e-6;
        for (int k = 0; k < 4; ++k) {
            vecd xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            j.col(k) = (hh_rhs(p, t, xp, cur) - hh_rhs(p, t, xm, cur)) / (2.0 * h);
        }
        return j;
    };
    return s;
}

}  // namespace neurosplit
