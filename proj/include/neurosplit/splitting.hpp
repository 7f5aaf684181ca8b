#pragma once
// Operator splitting over sub-intervals. Each component owns a block of the
// state vector; inside a sub-flow the complementary block is frozen at its
// value when that sub-flow starts, which reproduces the classical Lie /
// Strang compositions of the component vector fields.
//
// Backends: per-component physics-informed training, or an rk4 sub-flow
// integrator used as an oracle. The march engine handles spike detection
// (dense scan + bisection on the continuous in-interval solution), interval
// truncation at the crossing, reset propagation, and trajectory recording.

#include <algorithm>
#include <memory>
#include <optional>

#include "models.hpp"
#include "pinn.hpp"
#include "trajectory.hpp"

namespace neurosplit {

struct march_component {
    std::vector<int> owned;  // indices of the state block this component advances
    // rhs/jac of the owned block; x_full carries the frozen complementary values
    std::function<vecd(double, const vecd& x_own, const vecd& x_full)> rhs;
    std::function<matd(double, const vecd& x_own, const vecd& x_full)> jac;
};

struct segment_solution {
    double t_a = 0, t_b = 0;
    std::function<vecd(double)> eval;
    vecd terminal;
    double loss = 0;
    long iters = 0;
    bool converged = true;
    std::vector<std::pair<long, double>> loss_history;
};

struct component_solver {
    virtual ~component_solver() = default;
    virtual segment_solution solve(const sub_problem&, bool cold) = 0;
};

struct pinn_solver final : component_solver {
    train_config cfg;
    int comp_index = 0;
    std::optional<network> warm;  // previous sub-interval's parameters

    pinn_solver(train_config c, int idx) : cfg(std::move(c)), comp_index(idx) {}

    segment_solution solve(const sub_problem& sp, bool cold) override {
        train_config tc = cfg;
        const network* w = (!cold && warm) ? &*warm : nullptr;
        // first interval keeps the configured seed verbatim so a 1-interval
        // march reproduces train_subproblem exactly; later cold restarts
        // (after resets) derive fresh deterministic seeds
        if (!w && sp.seed_salt != 0)
            tc.seed = mix64(cfg.seed ^ (sp.seed_salt * 0x9e3779b97f4a7c15ull +
                                        std::uint64_t(comp_index)));
        trained_solution tr = train_subproblem(sp, tc, w);
        warm = tr.net;
        segment_solution s;
        s.t_a = sp.t_a;
        s.t_b = sp.t_b;
        auto np = std::make_shared<network>(tr.net);
        s.eval = [np](double t) { return forward(*np, t); };
        s.terminal = tr.terminal;
        s.loss = tr.final_loss;
        s.iters = tr.iters;
        s.converged = tr.converged;
        s.loss_history = std::move(tr.loss_history);
        return s;
    }
};

struct rk4_solver final : component_solver {
    int substeps = 16;
    explicit rk4_solver(int n = 16) : substeps(n) {}

    segment_solution solve(const sub_problem& sp, bool) override {
        segment_solution s;
        s.t_a = sp.t_a;
        s.t_b = sp.t_b;
        auto rhs = sp.rhs;
        double a = sp.t_a;
        vecd x0 = sp.x_a;
        int ns = substeps;
        s.eval = [rhs, a, x0, ns](double t) {
            if (t <= a) return x0;
            return rk4_integrate(rhs, a, t, x0, ns);
        };
        s.terminal = s.eval(sp.t_b);
        return s;
    }
};

// ---------------------------------------------------------------------------
// One solved sub-interval: the component segments plus full-state evaluation.
struct interval_solution {
    double a = 0, b = 0, mid = 0;
    bool strang = false;
    int dim = 0;
    const std::vector<march_component>* comps = nullptr;
    std::vector<segment_solution> segs;  // lie: one per component; strang: {A1, B, A2}
    vecd terminal;

    vecd eval(double t) const {
        vecd x(dim);
        if (!strang) {
            for (std::size_t i = 0; i < comps->size(); ++i) {
                vecd v = segs[i].eval(t);
                const auto& own = (*comps)[i].owned;
                for (std::size_t k = 0; k < own.size(); ++k) x[own[k]] = v[int(k)];
            }
        } else {
            const segment_solution& sa = (t <= mid) ? segs[0] : segs[2];
            vecd va = sa.eval(t);
            vecd vb = segs[1].eval(t);
            const auto& owna = (*comps)[0].owned;
            const auto& ownb = (*comps)[1].owned;
            for (std::size_t k = 0; k < owna.size(); ++k) x[owna[k]] = va[int(k)];
            for (std::size_t k = 0; k < ownb.size(); ++k) x[ownb[k]] = vb[int(k)];
        }
        return x;
    }
};

namespace detail {

inline vecd gather(const vecd& x, const std::vector<int>& idx) {
    vecd v(int(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) v[int(k)] = x[idx[k]];
    return v;
}

inline void scatter(vecd& x, const std::vector<int>& idx, const vecd& v) {
    for (std::size_t k = 0; k < idx.size(); ++k) x[idx[k]] = v[int(k)];
}

inline sub_problem make_subproblem(const march_component& c, double a, double b,
                                   const vecd& frozen, std::uint64_t salt) {
    sub_problem sp;
    sp.t_a = a;
    sp.t_b = b;
    sp.x_a = gather(frozen, c.owned);
    sp.seed_salt = salt;
    auto crhs = c.rhs;
    auto cjac = c.jac;
    vecd fz = frozen;
    sp.rhs = [crhs, fz](double t, const vecd& xo) { return crhs(t, xo, fz); };
    sp.jac = [cjac, fz](double t, const vecd& xo) { return cjac(t, xo, fz); };
    return sp;
}

}  // namespace detail

// Lie composition: components solved in listed order over the full interval,
// each seeing the complementary block at its value when the sub-flow starts.
inline interval_solution lie_step(const std::vector<march_component>& comps,
                                  std::vector<std::shared_ptr<component_solver>>& solvers,
                                  double a, double b, const vecd& x, std::uint64_t salt = 0,
                                  bool cold = false) {
    interval_solution sol;
    sol.a = a;
    sol.b = b;
    sol.dim = int(x.size());
    sol.comps = &comps;
    vecd cur = x;
    for (std::size_t i = 0; i < comps.size(); ++i) {
        sub_problem sp = detail::make_subproblem(comps[i], a, b, cur, salt);
        segment_solution seg = solvers[i]->solve(sp, cold);
        detail::scatter(cur, comps[i].owned, seg.terminal);
        sol.segs.push_back(std::move(seg));
    }
    sol.terminal = cur;
    return sol;
}

// Strang composition for a binary split: half step of the first-listed
// component, full step of the second, half step of the first again.
inline interval_solution strang_step(const std::vector<march_component>& comps,
                                     std::vector<std::shared_ptr<component_solver>>& solvers,
                                     double a, double b, const vecd& x, std::uint64_t salt = 0,
                                     bool cold = false) {
    if (comps.size() != 2) throw config_error("strang_step: needs exactly two components");
    interval_solution sol;
    sol.a = a;
    sol.b = b;
    sol.mid = 0.5 * (a + b);
    sol.strang = true;
    sol.dim = int(x.size());
    sol.comps = &comps;
    vecd cur = x;

    sub_problem s1 = detail::make_subproblem(comps[0], a, sol.mid, cur, salt);
    segment_solution a1 = solvers[0]->solve(s1, cold);
    detail::scatter(cur, comps[0].owned, a1.terminal);

    sub_problem s2 = detail::make_subproblem(comps[1], a, b, cur, salt);
    segment_solution bf = solvers[1]->solve(s2, cold);
    detail::scatter(cur, comps[1].owned, bf.terminal);

    sub_problem s3 = detail::make_subproblem(comps[0], sol.mid, b, cur, salt);
    segment_solution a2 = solvers[0]->solve(s3, cold);
    detail::scatter(cur, comps[0].owned, a2.terminal);

    sol.segs = {std::move(a1), std::move(bf), std::move(a2)};
    sol.terminal = cur;
    return sol;
}

// ---------------------------------------------------------------------------
struct march_result {
    trajectory traj;  // collocation-point rows
    trajectory test;  // per-interval random evaluation rows (held-out error)
    std::vector<double> spike_times;
    long total_iters = 0;
    bool all_converged = true;
    std::vector<double> final_losses;
    std::vector<loss_record> loss_rows;
};

struct march_plan {
    std::vector<double> grid;  // sub-interval boundaries, strictly increasing
    int points = 20;           // recorded rows per sub-interval (both endpoints)
    bool strang = false;
    std::optional<spike_rule> spike;
    int scan_mult = 4;           // spike scan density relative to `points`
    double test_fraction = 0.2;  // held-out points per interval as a fraction of points-1
    std::uint64_t test_seed = 0x5eed;
    std::vector<std::string> labels;
    std::string model_id, scheme_id;
};

inline std::vector<double> make_grid(double t_end, int n) { return linspace(0.0, t_end, n + 1); }

inline march_result run_march(const std::vector<march_component>& comps,
                              std::vector<std::shared_ptr<component_solver>>& solvers,
                              vecd x, const march_plan& plan) {
    if (plan.grid.size() < 2) throw config_error("march: need at least one sub-interval");
    if (comps.size() != solvers.size()) throw config_error("march: one solver per component");
    {
        std::vector<int> seen(x.size(), 0);
        for (const auto& c : comps)
            for (int i : c.owned) {
                if (i < 0 || i >= int(x.size()) || seen[i]++)
                    throw config_error("march: components must partition the state indices");
            }
        for (int s : seen)
            if (!s) throw config_error("march: components must partition the state indices");
    }

    const double span = plan.grid.back() - plan.grid.front();
    const double sliver = 1e-9 * span;
    const double rowtol = 1e-12 * span;

    march_result res;
    res.traj.labels = plan.labels;
    res.test.labels = plan.labels;
    res.traj.model_id = res.test.model_id = plan.model_id;
    res.traj.scheme = res.test.scheme = plan.scheme_id;
    res.traj.append(plan.grid.front(), x);

    double t = plan.grid.front();
    std::size_t k = 1;
    std::uint64_t ordinal = 0;
    bool cold = false;
    int n_test = std::max(1, int(std::lround(plan.test_fraction * (plan.points - 1))));

    while (k < plan.grid.size()) {
        double tb = plan.grid[k];
        if (tb - t <= sliver) {  // merge slivers left behind by truncation
            ++k;
            continue;
        }
        if (plan.spike && x[plan.spike->watch] >= plan.spike->threshold)
            x = plan.spike->reset(x);

        interval_solution sol;
        try {
            sol = plan.strang ? strang_step(comps, solvers, t, tb, x, ordinal, cold)
                              : lie_step(comps, solvers, t, tb, x, ordinal, cold);
        } catch (const divergence_error& e) {
            throw divergence_error("sub-interval " + std::to_string(ordinal) + " [" +
                                   std::to_string(t) + ", " + std::to_string(tb) +
                                   "]: " + e.what());
        }
        cold = false;
        for (std::size_t i = 0; i < sol.segs.size(); ++i) {
            const auto& seg = sol.segs[i];
            res.total_iters += seg.iters;
            res.all_converged = res.all_converged && seg.converged;
            res.final_losses.push_back(seg.loss);
            int comp_id = sol.strang ? (i == 1 ? 1 : 0) : int(i);
            for (auto [it, L] : seg.loss_history)
                res.loss_rows.push_back({long(ordinal), comp_id, it, L});
        }
        ++ordinal;

        // spike scan on the continuous in-interval solution
        double t_cut = tb;
        bool spiked = false;
        if (plan.spike) {
            int nscan = plan.scan_mult * (plan.points - 1) + 1;
            auto scan = linspace(t, tb, nscan);
            double prev_t = scan[0];
            double min_adv = t + 1e-6 * (tb - t);  // ignore spurious crossings at the IC
            for (int i = 1; i < nscan; ++i) {
                double vi = sol.eval(scan[i])[plan.spike->watch];
                if (scan[i] > min_adv && vi >= plan.spike->threshold) {
                    double lo = prev_t, hi = scan[i];
                    for (int b2 = 0; b2 < 80 && hi - lo > 1e-15 * span; ++b2) {
                        double mid = 0.5 * (lo + hi);
                        if (sol.eval(mid)[plan.spike->watch] >= plan.spike->threshold) hi = mid;
                        else lo = mid;
                    }
                    t_cut = hi;
                    spiked = true;
                    break;
                }
                prev_t = scan[i];
            }
        }

        // collocation rows on (t, t_cut]
        auto rows = linspace(t, tb, plan.points);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            double rt = rows[i];
            if (spiked && rt >= t_cut - rowtol) break;
            res.traj.append(rt, sol.eval(rt));
        }
        if (spiked && t_cut > res.traj.times.back() + rowtol)
            res.traj.append(t_cut, sol.eval(t_cut));  // pre-reset value at the crossing

        // held-out test rows on the open interval
        {
            std::mt19937_64 eng(mix64(plan.test_seed ^ ordinal));
            std::vector<double> ts;
            for (int i = 0; i < n_test; ++i)
                ts.push_back(t + uniform01(eng) * (t_cut - t));
            std::sort(ts.begin(), ts.end());
            for (double rt : ts) {
                if (rt <= t + rowtol || rt >= t_cut - rowtol) continue;
                if (!res.test.times.empty() && rt <= res.test.times.back() + rowtol) continue;
                res.test.append(rt, sol.eval(rt));
            }
        }

        if (spiked) {
            res.spike_times.push_back(t_cut);
            vecd xs = sol.eval(t_cut);
            x = plan.spike->reset(xs);
            t = t_cut;
            cold = true;  // post-reset shapes differ too much for a useful warm start
            if (plan.spike->refractory > 0) {
                double hold_end = std::min(t + plan.spike->refractory, plan.grid.back());
                if (hold_end > res.traj.times.back() + rowtol) res.traj.append(hold_end, x);
                t = hold_end;
            }
            while (k < plan.grid.size() && plan.grid[k] <= t + sliver) ++k;
        } else {
            x = sol.terminal;
            t = tb;
            ++k;
        }
    }
    res.traj.spike_times = res.spike_times;
    return res;
}

// ---------------------------------------------------------------------------
enum class backend_kind { pinn, rk4 };

struct march_config {
    double t_end = 20.0;
    int sub_intervals = 400;
    int points = 20;
    bool strang = false;
    backend_kind backend = backend_kind::rk4;
    int rk4_substeps = 16;
    train_config train1, train2;  // first-listed and second-listed component
    double test_fraction = 0.2;
    std::uint64_t test_seed = 0x5eed;
    int scan_mult = 4;
};

namespace detail {
inline std::vector<std::shared_ptr<component_solver>> make_solvers(const march_config& mc,
                                                                   int ncomp) {
    std::vector<std::shared_ptr<component_solver>> sv;
    for (int i = 0; i < ncomp; ++i) {
        if (mc.backend == backend_kind::pinn)
            sv.push_back(std::make_shared<pinn_solver>(i == 0 ? mc.train1 : mc.train2, i));
        else
            sv.push_back(std::make_shared<rk4_solver>(mc.rk4_substeps));
    }
    return sv;
}

inline std::string scheme_name(const march_config& mc) {
    std::string s = mc.strang ? "strang" : "lie";
    s += mc.backend == backend_kind::pinn ? "-pinn" : "-rk4";
    return s;
}
}  // namespace detail

// Izhikevich split: recovery variable u first (voltage frozen at the interval
// start), then voltage with the updated terminal u held constant.
inline std::vector<march_component> izhikevich_components(const izhikevich_params& p,
                                                          const current_source& cur) {
    march_component u;
    u.owned = {1};
    u.rhs = [p](double, const vecd& xo, const vecd& full) {
        return vecd::Constant(1, p.a * (p.b * full[0] - xo[0]));
    };
    u.jac = [p](double, const vecd&, const vecd&) { return matd::Constant(1, 1, -p.a); };
    march_component v;
    v.owned = {0};
    v.rhs = [p, cur](double t, const vecd& xo, const vecd& full) {
        return vecd::Constant(1, 0.04 * xo[0] * xo[0] + 5.0 * xo[0] + 140.0 - full[1] + cur(t));
    };
    v.jac = [](double, const vecd& xo, const vecd&) {
        return matd::Constant(1, 1, 0.08 * xo[0] + 5.0);
    };
    return {u, v};
}

inline march_result split_izhikevich(const izhikevich_params& p, const current_source& cur,
                                     const vecd& x0, const march_config& mc) {
    auto comps = izhikevich_components(p, cur);
    auto solvers = detail::make_solvers(mc, 2);
    march_plan plan;
    plan.grid = make_grid(mc.t_end, mc.sub_intervals);
    plan.points = mc.points;
    plan.strang = mc.strang;
    plan.scan_mult = mc.scan_mult;
    plan.test_fraction = mc.test_fraction;
    plan.test_seed = mc.test_seed;
    plan.labels = {"v", "u"};
    plan.model_id = "izhikevich";
    plan.scheme_id = detail::scheme_name(mc);
    spike_rule r;
    r.watch = 0;
    r.threshold = p.v_th;
    r.reset = [p](const vecd& x) { return izhikevich_reset(p, x); };
    plan.spike = r;
    return run_march(comps, solvers, x0, plan);
}

// Hodgkin-Huxley split: gating block first (voltage frozen at the interval
// start), then the voltage equation with the terminal gating values.
inline std::vector<march_component> hh_components(const hh_params& p, const current_source& cur) {
    march_component gate;
    gate.owned = {1, 2, 3};
    gate.rhs = [p](double, const vecd& xo, const vecd& full) {
        hh_rate_set r = hh_rates(p, full[0]);
        vecd f(3);
        f[0] = r.an * (1.0 - xo[0]) - r.bn * xo[0];
        f[1] = r.am * (1.0 - xo[1]) - r.bm * xo[1];
        f[2] = r.ah * (1.0 - xo[2]) - r.bh * xo[2];
        return f;
    };
    gate.jac = [p](double, const vecd&, const vecd& full) {
        hh_rate_set r = hh_rates(p, full[0]);
        matd j = matd::Zero(3, 3);
        j(0, 0) = -(r.an + r.bn);
        j(1, 1) = -(r.am + r.bm);
        j(2, 2) = -(r.ah + r.bh);
        return j;
    };
    march_component volt;
    volt.owned = {0};
    volt.rhs = [p, cur](double t, const vecd& xo, const vecd& full) {
        double v = xo[0], n = full[1], m = full[2], h = full[3];
        double f = (cur(t) - p.g_na * m * m * m * h * (v - p.e_na) -
                    p.g_k * n * n * n * n * (v - p.e_k) - p.g_l * (v - p.e_l)) /
                   p.c_m;
        return vecd::Constant(1, f);
    };
    volt.jac = [p](double, const vecd&, const vecd& full) {
        return matd::Constant(1, 1, hh_dv_dv(p, full));
    };
    return {gate, volt};
}

inline march_result split_hh(const hh_params& p, const current_source& cur,
                             const march_config& mc) {
    auto comps = hh_components(p, cur);
    auto solvers = detail::make_solvers(mc, 2);
    march_plan plan;
    plan.grid = make_grid(mc.t_end, mc.sub_intervals);
    plan.points = mc.points;
    plan.strang = mc.strang;
    plan.scan_mult = mc.scan_mult;
    plan.test_fraction = mc.test_fraction;
    plan.test_seed = mc.test_seed;
    plan.labels = {"v", "n", "m", "h"};
    plan.model_id = "hh";
    plan.scheme_id = detail::scheme_name(mc);
    vecd x0(4);
    x0 << p.v0, p.n0, p.m0, p.h0;
    return run_march(comps, solvers, x0, plan);
}

// Un-split march: a single network learns the full state on each sub-interval.
inline march_result march_pinn(const model_spec& spec, const std::vector<double>& grid,
                               const train_config& tc, std::uint64_t test_seed = 0x5eed,
                               double test_fraction = 0.2, int scan_mult = 4) {
    march_component all;
    all.owned.resize(spec.dim);
    for (int i = 0; i < spec.dim; ++i) all.owned[i] = i;
    auto rhs = spec.rhs;
    auto jac = spec.jac;
    all.rhs = [rhs](double t, const vecd& xo, const vecd&) { return rhs(t, xo); };
    all.jac = [jac](double t, const vecd& xo, const vecd&) { return jac(t, xo); };

    std::vector<std::shared_ptr<component_solver>> sv{std::make_shared<pinn_solver>(tc, 0)};
    std::vector<march_component> comps{all};
    march_plan plan;
    plan.grid = grid;
    plan.points = tc.points;
    plan.spike = spec.spike;
    plan.scan_mult = scan_mult;
    plan.test_fraction = test_fraction;
    plan.test_seed = test_seed;
    plan.labels = spec.labels;
    plan.model_id = spec.id;
    plan.scheme_id = "pinn";
    return run_march(comps, sv, spec.x0, plan);
}

}  // namespace neurosplit
