#pragma once
// Experiment driver: builds (and caches) the reference solution for a
// configuration, runs the configured scheme over every training seed, scores
// each run against the reference, and writes trajectory / error / loss
// artifacts plus an aggregate JSON report into the output directory.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "config.hpp"
#include "fracl1.hpp"
#include "metrics.hpp"
#include "models.hpp"
#include "refsolve.hpp"
#include "splitting.hpp"
#include "svg.hpp"
#include "trajectory.hpp"

namespace neurosplit {

inline model_spec spec_for(const experiment_config& cfg) {
    if (cfg.model == "lif")
        return make_lif_spec(cfg.lif, cfg.current, cfg.threshold, cfg.lif.v_rest);
    if (cfg.model == "izhikevich") {
        vecd x0(2);
        x0 << -65.0, cfg.izh.b * -65.0;
        return make_izhikevich_spec(cfg.izh, cfg.current, x0);
    }
    if (cfg.model == "hh" || cfg.model == "fohh") return make_hh_spec(cfg.hh, cfg.current);
    throw config_error("spec_for: unknown model " + cfg.model);
}

// ---------------------------------------------------------------------------
// reference solutions

struct reference_solution {
    std::vector<std::string> labels;
    std::shared_ptr<const trajectory> dense;  // uniform sampling, cached on disk
    std::function<vecd(double)> eval;
    std::vector<double> spike_times;
};

namespace detail {

inline std::vector<double> uniform_times(double t_end, int n) {
    std::vector<double> ts(n + 1);
    for (int i = 0; i <= n; ++i) ts[i] = t_end * (double(i) / n);
    ts.back() = t_end;
    return ts;
}

// One rk4 step over [t, t+dt] with threshold resets located by bisection on
// the one-step flow. Steps are split at drive switch times, and a segment
// that ends on a switch clamps its stage times just below it, so no rk4
// stage ever samples the drive on the wrong side of a discontinuity.
// Reproduces the dense reference march when dt spans a whole cell, and
// evaluates inside a cell otherwise.
struct event_stepper {
    std::function<vecd(double, const vecd&)> rhs;
    std::function<vecd(const vecd&)> reset;
    double level = 0.0;
    std::vector<double> breaks;  // drive switch times, ascending

    vecd advance(double t, double dt, vecd x, std::vector<double>* spikes) const {
        double end = t + dt;
        for (double b : breaks)
            if (b > t && b <= end) {
                x = smooth(t, b, std::move(x), spikes, true);
                t = b;
            }
        return smooth(t, end, std::move(x), spikes, false);
    }

    // integrate [t, b]; `capped` keeps rhs times strictly before b
    vecd smooth(double t, double b, vecd x, std::vector<double>* spikes, bool capped) const {
        auto f = [this, b, capped](double tt, const vecd& xx) {
            if (capped && tt >= b) tt = std::nextafter(b, 0.0);
            return rhs(tt, xx);
        };
        double dt = b - t;
        for (int guard = 0; guard < 8; ++guard) {
            if (!(dt > 0.0)) return x;
            vecd xt = rk4_step(f, t, dt, x);
            if (xt[0] < level) return xt;
            double lo = 0.0, hi = dt;
            for (int it = 0; it < 80 && hi - lo > 1e-18 * (1.0 + t); ++it) {
                double mid = 0.5 * (lo + hi);
                if (rk4_step(f, t, mid, x)[0] >= level) hi = mid;
                else lo = mid;
            }
            vecd xc = rk4_step(f, t, hi, x);
            if (spikes) spikes->push_back(t + hi);
            x = reset(xc);
            t += hi;
            dt -= hi;
        }
        return x;
    }
};

inline trajectory reference_dense(const experiment_config& cfg) {
    auto ts = uniform_times(cfg.t_end, cfg.ref_dense);
    trajectory tr;
    if (cfg.model == "lif") {
        std::vector<double> spikes;
        auto vs = lif_exact(cfg.lif, cfg.current, cfg.lif.v_rest, ts, cfg.threshold, &spikes);
        tr.labels = {"v"};
        for (std::size_t i = 0; i < ts.size(); ++i) tr.append(ts[i], vecd::Constant(1, vs[i]));
        tr.spike_times = spikes;
    } else if (cfg.model == "izhikevich") {
        model_spec spec = spec_for(cfg);
        event_stepper st{spec.rhs, spec.spike->reset, spec.spike->threshold,
                         cfg.current.times};
        tr.labels = spec.labels;
        vecd x = spec.x0;
        tr.append(ts[0], x);
        for (std::size_t i = 1; i < ts.size(); ++i) {
            x = st.advance(ts[i - 1], ts[i] - ts[i - 1], x, &tr.spike_times);
            tr.append(ts[i], x);
        }
    } else {  // hh / fohh via the collocation solver
        fractional_orders q =
            cfg.model == "hh" ? fractional_orders::uniform(1.0) : cfg.orders;
        fode_problem pr = make_fohh_problem(cfg.hh, cfg.current, q);
        collocation_options o;
        o.m1 = cfg.ref_m1;
        fode_solution sol = solve_fode(pr, cfg.t_end, o, cfg.current.times);
        tr = sol.sample(ts, {"v", "n", "m", "h"}, cfg.model, "reference");
        std::vector<double> v(tr.times.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = tr.states[i][0];
        tr.spike_times = spike_crossings(tr.times, v, 0.0);
    }
    tr.model_id = cfg.model;
    tr.scheme = "reference";
    tr.config_hash = reference_hash(cfg);
    return tr;
}

inline vecd interp_row(const trajectory& tr, double t) {
    t = std::min(std::max(t, tr.times.front()), tr.times.back());
    auto it = std::upper_bound(tr.times.begin(), tr.times.end(), t);
    std::size_t i = std::min<std::size_t>(
        std::max<long>(it - tr.times.begin(), 1), tr.times.size() - 1);
    double w = (t - tr.times[i - 1]) / (tr.times[i] - tr.times[i - 1]);
    return tr.states[i - 1] + w * (tr.states[i] - tr.states[i - 1]);
}

inline std::string hex16(std::uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace detail

inline std::string refcache_path(const experiment_config& cfg) {
    return cfg.outdir + "/refcache/" + detail::hex16(reference_hash(cfg)) + ".csv";
}

// Load the dense reference from the cache, or compute and cache it, then wrap
// it in an evaluator. The evaluator is built the same way on a cache hit and
// a cache miss, so reports never depend on cache state.
inline reference_solution ensure_reference(const experiment_config& cfg) {
    namespace fs = std::filesystem;
    const std::string path = refcache_path(cfg);
    auto dense = std::make_shared<trajectory>();
    if (fs::exists(path)) {
        *dense = read_csv_file(path);
        if (dense->config_hash != reference_hash(cfg))
            throw config_error(cfg.id + ": stale reference cache at " + path);
    } else {
        *dense = detail::reference_dense(cfg);
        fs::create_directories(fs::path(path).parent_path());
        write_csv_file(*dense, path);
    }

    reference_solution ref;
    ref.labels = dense->labels;
    ref.spike_times = dense->spike_times;
    ref.dense = dense;
    if (cfg.model == "lif") {
        // closed form; the dense rows are only for caching and plots
        lif_params p = cfg.lif;
        current_source cur = cfg.current;
        bool thr = cfg.threshold;
        ref.eval = [p, cur, thr](double t) {
            auto v = lif_exact(p, cur, p.v_rest, {std::max(t, 0.0)}, thr);
            return vecd::Constant(1, v[0]);
        };
    } else if (cfg.model == "izhikevich") {
        // re-integrate from the nearest stored row; linear interpolation would
        // smear the reset jumps
        model_spec spec = spec_for(cfg);
        detail::event_stepper st{spec.rhs, spec.spike->reset, spec.spike->threshold,
                                 cfg.current.times};
        auto d = dense;
        ref.eval = [st, d](double t) {
            t = std::min(std::max(t, d->times.front()), d->times.back());
            auto it = std::upper_bound(d->times.begin(), d->times.end(), t);
            std::size_t i = std::max<long>(it - d->times.begin() - 1, 0);
            if (i >= d->times.size() - 1) i = d->times.size() - 2;
            if (t <= d->times[i]) return d->states[i];
            return st.advance(d->times[i], t - d->times[i], d->states[i], nullptr);
        };
    } else {
        auto d = dense;
        ref.eval = [d](double t) { return detail::interp_row(*d, t); };
    }
    return ref;
}

// ---------------------------------------------------------------------------
// scheme dispatch

namespace detail {

// un-split classical integration over the same sub-interval grid
inline march_result march_rk4(const model_spec& spec, const std::vector<double>& grid,
                              int substeps, int points, std::uint64_t test_seed,
                              double test_fraction, int scan_mult = 4) {
    march_component all;
    all.owned.resize(spec.dim);
    for (int i = 0; i < spec.dim; ++i) all.owned[i] = i;
    auto rhs = spec.rhs;
    auto jac = spec.jac;
    all.rhs = [rhs](double t, const vecd& xo, const vecd&) { return rhs(t, xo); };
    all.jac = [jac](double t, const vecd& xo, const vecd&) { return jac(t, xo); };

    std::vector<std::shared_ptr<component_solver>> sv{std::make_shared<rk4_solver>(substeps)};
    std::vector<march_component> comps{all};
    march_plan plan;
    plan.grid = grid;
    plan.points = points;
    plan.spike = spec.spike;
    plan.scan_mult = scan_mult;
    plan.test_fraction = test_fraction;
    plan.test_seed = test_seed;
    plan.labels = spec.labels;
    plan.model_id = spec.id;
    plan.scheme_id = "rk4";
    return run_march(comps, sv, spec.x0, plan);
}

struct run_result {
    trajectory traj, test;
    std::vector<double> spike_times;
    long iters = 0;
    bool converged = true;
    std::vector<loss_record> loss_rows;
};

// held-out rows for the fractional march, which records every grid point:
// a seeded draw of interior rows stands in for random evaluation times
inline trajectory subsample_rows(const trajectory& tr, double frac, std::uint64_t seed) {
    std::size_t interior = tr.times.size() - 1;
    std::size_t k = std::max<std::size_t>(1, std::size_t(std::lround(frac * interior)));
    std::vector<std::size_t> idx(interior);
    for (std::size_t i = 0; i < interior; ++i) idx[i] = i + 1;
    std::mt19937_64 eng(mix64(seed));
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + std::size_t(uniform01(eng) * (interior - i));
        std::swap(idx[i], idx[std::min(j, interior - 1)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    trajectory out;
    out.labels = tr.labels;
    out.model_id = tr.model_id;
    out.scheme = tr.scheme;
    for (std::size_t i : idx) out.append(tr.times[i], tr.states[i]);
    return out;
}

inline run_result run_one(const experiment_config& cfg, std::uint64_t seed) {
    run_result rr;
    if (cfg.scheme == scheme_kind::splitting_fpinn) {
        fohh_config fc;
        fc.q = cfg.orders;
        fc.t_end = cfg.t_end;
        fc.n1 = cfg.sub_intervals;
        fc.n2 = cfg.n2;
        fc.backend = fohh_backend::fpinn;
        fc.train_v = cfg.train1;
        fc.train_gate = cfg.train2;
        fc.train_v.seed = seed;
        fc.train_gate.seed = mix64(seed ^ 0x517cc1b727220a95ull);
        fohh_result r = split_fohh(cfg.hh, cfg.current, fc);
        rr.traj = std::move(r.traj);
        rr.test = subsample_rows(rr.traj, cfg.test_fraction, cfg.test_seed);
        rr.iters = r.total_iters;
        rr.converged = r.all_converged;
        rr.loss_rows = std::move(r.loss_rows);
    } else {
        model_spec spec = spec_for(cfg);
        march_config mc;
        mc.t_end = cfg.t_end;
        mc.sub_intervals = cfg.sub_intervals;
        mc.points = cfg.points;
        mc.strang = cfg.strang;
        mc.backend = backend_kind::pinn;
        mc.test_fraction = cfg.test_fraction;
        mc.test_seed = cfg.test_seed;
        mc.train1 = cfg.train1;
        mc.train2 = cfg.train2;
        mc.train1.points = cfg.points;
        mc.train2.points = cfg.points;
        mc.train1.seed = seed;
        mc.train2.seed = mix64(seed ^ 0x9e3779b97f4a7c15ull);

        march_result r;
        if (cfg.scheme == scheme_kind::pinn) {
            r = march_pinn(spec, make_grid(cfg.t_end, cfg.sub_intervals), mc.train1,
                           cfg.test_seed, cfg.test_fraction);
        } else if (cfg.scheme == scheme_kind::rk4) {
            r = march_rk4(spec, make_grid(cfg.t_end, cfg.sub_intervals), mc.rk4_substeps,
                          cfg.points, cfg.test_seed, cfg.test_fraction);
        } else if (cfg.model == "izhikevich") {
            r = split_izhikevich(cfg.izh, cfg.current, spec.x0, mc);
        } else if (cfg.model == "hh") {
            r = split_hh(cfg.hh, cfg.current, mc);
        } else {
            throw config_error(cfg.id + ": scheme " + scheme_name(cfg.scheme) +
                               " does not apply to model " + cfg.model);
        }
        rr.traj = std::move(r.traj);
        rr.test = std::move(r.test);
        rr.spike_times = std::move(r.spike_times);
        rr.iters = r.total_iters;
        rr.converged = r.all_converged;
        rr.loss_rows = std::move(r.loss_rows);
    }
    // models without a reset rule spike when the membrane crosses 0 mV
    if (rr.spike_times.empty() && (cfg.model == "hh" || cfg.model == "fohh")) {
        std::vector<double> v(rr.traj.times.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = rr.traj.states[i][0];
        rr.spike_times = spike_crossings(rr.traj.times, v, 0.0);
        rr.traj.spike_times = rr.spike_times;
    }
    return rr;
}

// ---------------------------------------------------------------------------
// artifact writers

inline void decimate(std::vector<double>& x, std::vector<double>& y, std::size_t cap) {
    if (x.size() <= cap) return;
    std::size_t stride = (x.size() + cap - 1) / cap;
    std::vector<double> dx, dy;
    for (std::size_t i = 0; i < x.size(); i += stride) {
        dx.push_back(x[i]);
        dy.push_back(y[i]);
    }
    if (dx.back() != x.back()) {
        dx.push_back(x.back());
        dy.push_back(y.back());
    }
    x = std::move(dx);
    y = std::move(dy);
}

inline plot_series column_series(const trajectory& tr, int col, const std::string& label,
                                 std::size_t cap = 2000) {
    plot_series s;
    s.label = label;
    s.x = tr.times;
    s.y.resize(tr.times.size());
    for (std::size_t i = 0; i < s.y.size(); ++i) s.y[i] = tr.states[i][col];
    decimate(s.x, s.y, cap);
    return s;
}

inline void write_loss_csv(const std::vector<loss_record>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw config_error("cannot write " + path);
    f << "interval,component,iteration,loss\n";
    for (const auto& r : rows)
        f << r.interval << ',' << r.component << ',' << r.iteration << ',' << fmt17(r.loss)
          << '\n';
}

inline void write_loss_svg(const std::vector<loss_record>& rows, const std::string& path) {
    int ncomp = 0;
    for (const auto& r : rows) ncomp = std::max(ncomp, r.component + 1);
    std::vector<plot_series> series(ncomp);
    for (int c = 0; c < ncomp; ++c)
        series[c].label = ncomp == 1 ? "loss" : "sub-problem " + std::to_string(c + 1);
    for (const auto& r : rows) {
        if (!std::isfinite(r.loss)) continue;
        auto& s = series[r.component];
        s.x.push_back(double(s.x.size()));  // training step, concatenated over intervals
        s.y.push_back(std::max(r.loss, 1e-18));
    }
    for (auto& s : series) decimate(s.x, s.y, 2000);
    write_plot_file(series, "training loss", "step", "residual loss", path);
}

inline njson report_to_json(const error_report& rep) {
    njson runs = njson::array();
    for (const auto& r : rep.runs)
        runs.push_back({{"seed", r.seed},
                        {"train", r.train},
                        {"test", r.test},
                        {"iters", r.iters},
                        {"converged", r.converged},
                        {"spikes", r.spikes},
                        {"spike_times", r.spike_times}});
    return njson{{"id", rep.id},
                 {"scheme", rep.scheme},
                 {"labels", rep.labels},
                 {"runs", runs},
                 {"train_mean", rep.train_mean},
                 {"train_std", rep.train_std},
                 {"test_mean", rep.test_mean},
                 {"test_std", rep.test_std},
                 {"ref_spikes", rep.ref_spikes},
                 {"ref_spike_times", rep.ref_spike_times}};
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline error_report run_experiment(const experiment_config& cfg) {
    namespace fs = std::filesystem;
    cfg.validate();
    fs::create_directories(cfg.outdir);

    reference_solution ref = ensure_reference(cfg);

    error_report rep;
    rep.id = cfg.id;
    rep.scheme = scheme_name(cfg.scheme);
    rep.labels = ref.labels;
    rep.ref_spikes = int(ref.spike_times.size());
    rep.ref_spike_times = ref.spike_times;

    if (cfg.scheme == scheme_kind::reference) {
        fs::copy_file(refcache_path(cfg), cfg.outdir + "/reference.csv",
                      fs::copy_options::overwrite_existing);
        seed_errors run;
        run.seed = 0;
        run.train.assign(ref.labels.size(), 0.0);
        run.test.assign(ref.labels.size(), 0.0);
        run.spikes = rep.ref_spikes;
        run.spike_times = ref.spike_times;
        rep.runs.push_back(std::move(run));
        aggregate_report(rep);
        std::ofstream(cfg.outdir + "/report.json") << detail::report_to_json(rep).dump(1)
                                                   << '\n';
        return rep;
    }

    bool first = true;
    for (std::uint64_t seed : cfg.seeds) {
        detail::run_result rr;
        try {
            rr = detail::run_one(cfg, seed);
        } catch (const divergence_error& e) {
            throw divergence_error(cfg.id + " (seed " + std::to_string(seed) + "): " +
                                   e.what());
        }
        rr.traj.config_hash = config_hash(cfg);

        seed_errors run;
        run.seed = seed;
        run.train = trajectory_errors(rr.traj, ref.eval);
        run.test = rr.test.times.empty() ? run.train : trajectory_errors(rr.test, ref.eval);
        run.iters = rr.iters;
        run.converged = rr.converged;
        run.spikes = int(rr.spike_times.size());
        run.spike_times = rr.spike_times;
        rep.runs.push_back(run);

        write_csv_file(rr.traj, cfg.outdir + "/traj_" + std::to_string(seed) + ".csv");
        if (first) {
            first = false;
            trajectory err = absolute_errors(rr.traj, ref.eval);
            write_csv_file(err, cfg.outdir + "/errors.csv");
            for (std::size_t c = 0; c < ref.labels.size(); ++c) {
                const std::string& lb = ref.labels[c];
                auto rs = detail::column_series(*ref.dense, int(c), "reference");
                auto as = detail::column_series(rr.traj, int(c), rep.scheme);
                write_plot_file({rs, as}, cfg.id + ": " + lb, "t", lb,
                                cfg.outdir + "/overlay_" + lb + ".svg");
                auto es = detail::column_series(err, int(c), "abs error");
                write_plot_file({es}, cfg.id + ": |error| in " + lb, "t", "absolute error",
                                cfg.outdir + "/error_" + lb + ".svg");
            }
            if (!rr.loss_rows.empty()) {
                detail::write_loss_csv(rr.loss_rows, cfg.outdir + "/loss.csv");
                detail::write_loss_svg(rr.loss_rows, cfg.outdir + "/loss.svg");
            }
        }
    }
    aggregate_report(rep);

    njson jr = detail::report_to_json(rep);
    jr["config_hash"] = detail::hex16(config_hash(cfg));
    jr["scale"] = cfg.scale;
    std::ofstream(cfg.outdir + "/report.json") << jr.dump(1) << '\n';
    return rep;
}

// ---------------------------------------------------------------------------
// CSV-to-CSV comparison (first file is treated as the reference)

struct compare_result {
    std::vector<std::string> labels;
    std::vector<double> errors;  // relative L2 per common label
    std::size_t rows = 0;        // reference rows inside the overlap
};

inline compare_result compare_csvs(const std::string& path_a, const std::string& path_b) {
    trajectory a = read_csv_file(path_a), b = read_csv_file(path_b);
    compare_result out;
    std::vector<int> ca, cb;
    for (std::size_t i = 0; i < a.labels.size(); ++i)
        for (std::size_t j = 0; j < b.labels.size(); ++j)
            if (a.labels[i] == b.labels[j]) {
                out.labels.push_back(a.labels[i]);
                ca.push_back(int(i));
                cb.push_back(int(j));
            }
    if (out.labels.empty()) throw config_error("compare: no common columns");
    double lo = std::max(a.times.front(), b.times.front());
    double hi = std::min(a.times.back(), b.times.back());
    if (!(hi > lo)) throw config_error("compare: time ranges do not overlap");
    std::vector<std::vector<double>> ex(out.labels.size()), ap(out.labels.size());
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        double t = a.times[i];
        if (t < lo || t > hi) continue;
        vecd bi = detail::interp_row(b, t);
        for (std::size_t c = 0; c < out.labels.size(); ++c) {
            ex[c].push_back(a.states[i][ca[c]]);
            ap[c].push_back(bi[cb[c]]);
        }
    }
    if (ex[0].empty()) throw config_error("compare: no reference rows inside the overlap");
    out.rows = ex[0].size();
    for (std::size_t c = 0; c < out.labels.size(); ++c)
        out.errors.push_back(relative_l2_error(ex[c], ap[c]));
    return out;
}

}  // namespace neurosplit
