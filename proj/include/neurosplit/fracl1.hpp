#pragma once
// Caputo derivatives on uniform grids via the L1 scheme, the fractional
// residual used to train networks on sub-intervals with full memory, and the
// fractional Hodgkin-Huxley march (trained networks or pointwise implicit L1).
//
// On the grid t_i = i*dt the L1 approximation at t_n is
//   D^a y(t_n) ~= sum_{k=0}^{n-1} b_k (y_{n-k} - y_{n-k-1}),
//   b_k = dt^{-a}/Gamma(2-a) * ((k+1)^{1-a} - k^{1-a}),
// exact for linear y and of order 2-a otherwise. Summation by parts turns it
// into per-value weights: b_0 on y_n, b_{n-i} - b_{n-i-1} on the interior
// values, -b_{n-1} on y_0. Splitting the value list at a sub-interval start
// folds everything before it into one constant per evaluation offset, which
// is what lets a sub-interval problem carry the whole memory at fixed cost.

#include <array>
#include <memory>

#include "models.hpp"
#include "pinn.hpp"
#include "trajectory.hpp"

namespace neurosplit {

inline vecd l1_coeffs(double alpha, double dt, int n) {
    if (!(alpha > 0.0) || alpha > 1.0) throw config_error("l1_coeffs: order must be in (0, 1]");
    if (!(dt > 0.0) || n < 1) throw config_error("l1_coeffs: need dt > 0 and n >= 1");
    double scale = std::pow(dt, -alpha) / gamma_fn(2.0 - alpha);
    vecd b(n);
    // k = 0 spelled out: pow(0, 0) would otherwise poison the alpha = 1 limit
    b[0] = scale;
    for (int k = 1; k < n; ++k)
        b[k] = scale * (std::pow(double(k + 1), 1.0 - alpha) - std::pow(double(k), 1.0 - alpha));
    return b;
}

// Caputo derivative at the last point of y, which starts at the memory origin.
inline double l1_apply(double alpha, double dt, const std::vector<double>& y) {
    int n = int(y.size()) - 1;
    if (n < 1) throw config_error("l1_apply: need at least two values");
    vecd b = l1_coeffs(alpha, dt, n);
    double s = 0;
    for (int k = 0; k < n; ++k) s += b[k] * (y[n - k] - y[n - k - 1]);
    return s;
}

// exact Caputo derivative of t^p for p > 0
inline double caputo_power(double p, double alpha, double t) {
    if (!(p > 0.0)) throw config_error("caputo_power: need p > 0");
    return gamma_fn(p + 1.0) / gamma_fn(p + 1.0 - alpha) * std::pow(t, p - alpha);
}

// ---------------------------------------------------------------------------
// Memory structure of one sub-interval: global grid index j0 starts the
// interval, offsets l = 1..n2 are the evaluation points. The derivative at
// offset l is c[l-1] + sum_{m=1}^{l} w(l-1, m-1) * y_m with y_m the unknown
// in-interval values; everything up to and including index j0 lives in c.
struct l1_memory {
    double dt = 0;
    int n2 = 0;
    long j0 = 0;
    vecd c;  // history constants, one per offset
    matd w;  // lower-triangular in-interval weights
};

inline l1_memory make_l1_memory(const vecd& b, double dt, long j0, int n2,
                                const std::vector<double>& history) {
    if (long(history.size()) != j0 + 1)
        throw config_error("make_l1_memory: history must hold values 0..j0");
    if (b.size() < j0 + n2) throw config_error("make_l1_memory: too few coefficients");
    l1_memory mem;
    mem.dt = dt;
    mem.n2 = n2;
    mem.j0 = j0;
    mem.c = vecd::Zero(n2);
    mem.w = matd::Zero(n2, n2);
    for (int l = 1; l <= n2; ++l) {
        long n = j0 + l;
        double cl = -b[n - 1] * history[0];
        for (long i = 1; i <= j0; ++i) cl += (b[n - i] - b[n - i - 1]) * history[i];
        mem.c[l - 1] = cl;
        mem.w(l - 1, l - 1) = b[0];
        for (int m = 1; m < l; ++m) mem.w(l - 1, m - 1) = b[l - m] - b[l - m - 1];
    }
    return mem;
}

// ---------------------------------------------------------------------------
// A trainable fractional system: network output k obeys
//   c_scale[k] * D^{a_k} y_k = F_k(l, t, y(t))
// with per-output memories (all on the same grid). F receives the in-interval
// offset as well as the time so externally known signals can be indexed.
struct fpinn_system {
    std::vector<double> c_scale;
    std::vector<const l1_memory*> mem;
    std::function<vecd(int, double, const vecd&)> F;
    std::function<matd(int, double, const vecd&)> dF;  // d F / d y
};

template <class MaybeGrads>
double fpinn_residual_impl(const network& net, const fpinn_system& sys, double t_a,
                           const vecd& y_ic, double ic_weight, MaybeGrads* g) {
    int nk = int(sys.c_scale.size());
    if (nk == 0 || int(sys.mem.size()) != nk)
        throw config_error("fpinn residual: one memory per output");
    int n2 = sys.mem[0]->n2;
    double dt = sys.mem[0]->dt;
    for (const l1_memory* m : sys.mem)
        if (m->n2 != n2 || m->dt != dt)
            throw config_error("fpinn residual: memories disagree on the grid");

    std::vector<double> ts(n2 + 1);
    for (int l = 0; l <= n2; ++l) ts[l] = t_a + l * dt;

    auto fn = [&](const std::vector<vecd>& ys, const std::vector<vecd>&, std::vector<vecd>& gys,
                  std::vector<vecd>&) {
        double L = 0;
        matd r(nk, n2);  // residuals per output and offset
        for (int l = 1; l <= n2; ++l) {
            vecd f = sys.F(l, ts[l], ys[l]);
            for (int k = 0; k < nk; ++k) {
                double d = sys.mem[k]->c[l - 1];
                for (int m = 1; m <= l; ++m) d += sys.mem[k]->w(l - 1, m - 1) * ys[m][k];
                r(k, l - 1) = sys.c_scale[k] * d - f[k];
                L += r(k, l - 1) * r(k, l - 1) / double(n2);
            }
        }
        vecd e = ys[0] - y_ic;
        L += ic_weight * e.squaredNorm();
        if (g) {
            for (int m = 1; m <= n2; ++m) {
                vecd gy = vecd::Zero(nk);
                for (int k = 0; k < nk; ++k) {
                    double s = 0;
                    for (int l = m; l <= n2; ++l)
                        s += r(k, l - 1) * sys.mem[k]->w(l - 1, m - 1);
                    gy[k] = (2.0 / n2) * sys.c_scale[k] * s;
                }
                gy -= (2.0 / n2) * (sys.dF(m, ts[m], ys[m]).transpose() * r.col(m - 1));
                gys[m] = gy;
            }
            gys[0] = 2.0 * ic_weight * e;
        }
        return L;
    };

    if (g) return grad_params(net, ts, fn, *g);
    std::vector<vecd> ys;
    for (double t : ts) ys.push_back(forward(net, t));
    std::vector<vecd> dummy;
    return fn(ys, dummy, dummy, dummy);
}

inline double fpinn_residual(const network& net, const fpinn_system& sys, double t_a,
                             const vecd& y_ic, double ic_weight = 1.0) {
    return fpinn_residual_impl<net_grads>(net, sys, t_a, y_ic, ic_weight, nullptr);
}

// Train one fractional sub-interval; collocation points are the grid points.
inline trained_solution train_fpinn(const fpinn_system& sys, double t_a, const vecd& y_ic,
                                    const train_config& cfg, const network* warm = nullptr) {
    int n2 = sys.mem.empty() ? 0 : sys.mem[0]->n2;
    if (n2 < 1) throw config_error("train_fpinn: empty system");
    double t_b = t_a + n2 * sys.mem[0]->dt;
    network net;
    if (warm) {
        net = *warm;
    } else {
        architecture a = cfg.arch;
        a.out_dim = int(y_ic.size());
        net = init_params(a, cfg.seed);
        net.b.back() = y_ic;
    }
    net.set_domain(t_a, t_b);
    return detail::run_training(
        std::move(net), cfg,
        [&](const network& n, net_grads* g) {
            return g ? fpinn_residual_impl(n, sys, t_a, y_ic, cfg.ic_weight, g)
                     : fpinn_residual(n, sys, t_a, y_ic, cfg.ic_weight);
        },
        t_b);
}

// ---------------------------------------------------------------------------
enum class fohh_backend { fpinn, l1_implicit };

struct fohh_config {
    fractional_orders q;
    double t_end = 100.0;
    int n1 = 2000;  // sub-intervals
    int n2 = 40;    // grid points per sub-interval
    fohh_backend backend = fohh_backend::l1_implicit;
    train_config train_v, train_gate;  // fpinn backend only; points is the grid
};

struct fohh_result {
    trajectory traj;  // every grid point
    long total_iters = 0;
    bool all_converged = true;
    std::vector<double> final_losses;
    std::vector<loss_record> loss_rows;
    std::vector<std::string> warnings;
};

namespace detail {

struct fohh_grid {
    double dt;
    long n_total;
    std::array<std::vector<double>, 4> hist;  // per variable, values at grid points
    std::array<vecd, 4> b;                  // per variable L1 coefficients
};

inline double grid_time(const fohh_grid& gr, long i) { return double(i) * gr.dt; }

// history sum S(n) with D^a y(t_n) = b0*y_n + S(n); one O(n) pass
inline double l1_history_sum(const vecd& b, const std::vector<double>& y, long n) {
    double s = -b[n - 1] * y[0];
    for (long i = 1; i < n; ++i) s += (b[n - i] - b[n - i - 1]) * y[i];
    return s;
}

}  // namespace detail

inline fohh_result split_fohh(const hh_params& p, const current_source& cur,
                              const fohh_config& fc) {
    if (fc.n1 < 1 || fc.n2 < 1) throw config_error("split_fohh: need n1, n2 >= 1");
    if (!(fc.t_end > 0)) throw config_error("split_fohh: need t_end > 0");
    const double q[4] = {fc.q.v, fc.q.n, fc.q.m, fc.q.h};
    for (double a : q)
        if (!(a > 0.0) || a > 1.0) throw config_error("split_fohh: orders must be in (0, 1]");

    fohh_result res;
    if (p.c_m != 1.0 && fc.q.v != 1.0)
        res.warnings.push_back(
            "c_m multiplies a fractional derivative; its units differ from the integer model");

    detail::fohh_grid gr;
    gr.n_total = long(fc.n1) * fc.n2;
    gr.dt = fc.t_end / double(gr.n_total);
    for (int k = 0; k < 4; ++k) {
        gr.b[k] = l1_coeffs(q[k], gr.dt, int(gr.n_total));
        gr.hist[k].reserve(gr.n_total + 1);
    }
    gr.hist[0].push_back(p.v0);
    gr.hist[1].push_back(p.n0);
    gr.hist[2].push_back(p.m0);
    gr.hist[3].push_back(p.h0);

    if (fc.backend == fohh_backend::l1_implicit) {
        // pointwise implicit L1: the voltage solve uses the previous point's
        // gating, then each gate is updated with the new voltage; both solves
        // are linear in the unknown
        for (long n = 1; n <= gr.n_total; ++n) {
            double t = detail::grid_time(gr, n);
            double ng = gr.hist[1][n - 1], mg = gr.hist[2][n - 1], hg = gr.hist[3][n - 1];
            double gna = p.g_na * mg * mg * mg * hg, gk = p.g_k * ng * ng * ng * ng;
            double sv = detail::l1_history_sum(gr.b[0], gr.hist[0], n);
            double b0v = gr.b[0][0];
            double vn = (cur(t) + gna * p.e_na + gk * p.e_k + p.g_l * p.e_l - p.c_m * sv) /
                        (p.c_m * b0v + gna + gk + p.g_l);
            gr.hist[0].push_back(vn);

            hh_rate_set r = hh_rates(p, vn);
            const double ab[3][2] = {{r.an, r.bn}, {r.am, r.bm}, {r.ah, r.bh}};
            for (int k = 1; k < 4; ++k) {
                double s = detail::l1_history_sum(gr.b[k], gr.hist[k], n);
                double b0 = gr.b[k][0];
                double xn = (ab[k - 1][0] - s) / (b0 + ab[k - 1][0] + ab[k - 1][1]);
                gr.hist[k].push_back(xn);
            }
        }
    } else {
        // trained networks: the voltage residual at each grid point couples to
        // the gating values one point back, so a pointwise implicit predictor
        // sweep supplies those lagged values; the gating block then trains
        // against the freshly trained voltage at the same points
        std::optional<network> warm_v, warm_gate;
        for (int j = 0; j < fc.n1; ++j) {
            long j0 = long(j) * fc.n2;
            double t_a = detail::grid_time(gr, j0);

            std::array<std::vector<double>, 4> pred = gr.hist;
            for (int l = 1; l <= fc.n2; ++l) {
                long n = j0 + l;
                double t = detail::grid_time(gr, n);
                double ng = pred[1][n - 1], mg = pred[2][n - 1], hg = pred[3][n - 1];
                double pna = p.g_na * mg * mg * mg * hg, pk = p.g_k * ng * ng * ng * ng;
                double sv = detail::l1_history_sum(gr.b[0], pred[0], n);
                double vn = (cur(t) + pna * p.e_na + pk * p.e_k + p.g_l * p.e_l - p.c_m * sv) /
                            (p.c_m * gr.b[0][0] + pna + pk + p.g_l);
                pred[0].push_back(vn);
                hh_rate_set pr = hh_rates(p, vn);
                const double pab[3][2] = {{pr.an, pr.bn}, {pr.am, pr.bm}, {pr.ah, pr.bh}};
                for (int k = 1; k < 4; ++k) {
                    double s = detail::l1_history_sum(gr.b[k], pred[k], n);
                    pred[k].push_back((pab[k - 1][0] - s) /
                                      (gr.b[k][0] + pab[k - 1][0] + pab[k - 1][1]));
                }
            }
            std::vector<double> gna_l(fc.n2), gk_l(fc.n2);
            for (int l = 1; l <= fc.n2; ++l) {
                double ng = pred[1][j0 + l - 1], mg = pred[2][j0 + l - 1],
                       hg = pred[3][j0 + l - 1];
                gna_l[l - 1] = p.g_na * mg * mg * mg * hg;
                gk_l[l - 1] = p.g_k * ng * ng * ng * ng;
            }

            l1_memory mem_v = make_l1_memory(gr.b[0], gr.dt, j0, fc.n2, gr.hist[0]);
            fpinn_system sys_v;
            sys_v.c_scale = {p.c_m};
            sys_v.mem = {&mem_v};
            sys_v.F = [&, gna_l, gk_l](int l, double t, const vecd& y) {
                double v = y[0];
                return vecd::Constant(1, cur(t) - gna_l[l - 1] * (v - p.e_na) -
                                             gk_l[l - 1] * (v - p.e_k) - p.g_l * (v - p.e_l));
            };
            sys_v.dF = [gna_l, gk_l, &p](int l, double, const vecd&) {
                return matd::Constant(1, 1, -(gna_l[l - 1] + gk_l[l - 1] + p.g_l));
            };

            trained_solution sol_v;
            try {
                sol_v = train_fpinn(sys_v, t_a, vecd::Constant(1, gr.hist[0][j0]), fc.train_v,
                                    warm_v ? &*warm_v : nullptr);
            } catch (const divergence_error& e) {
                throw divergence_error("sub-interval " + std::to_string(j) +
                                       " (voltage): " + e.what());
            }
            warm_v = sol_v.net;
            vecd newv(fc.n2);
            for (int l = 1; l <= fc.n2; ++l)
                newv[l - 1] = forward(sol_v.net, t_a + l * gr.dt)[0];

            l1_memory mem_n = make_l1_memory(gr.b[1], gr.dt, j0, fc.n2, gr.hist[1]);
            l1_memory mem_m = make_l1_memory(gr.b[2], gr.dt, j0, fc.n2, gr.hist[2]);
            l1_memory mem_h = make_l1_memory(gr.b[3], gr.dt, j0, fc.n2, gr.hist[3]);
            fpinn_system sys_g;
            sys_g.c_scale = {1.0, 1.0, 1.0};
            sys_g.mem = {&mem_n, &mem_m, &mem_h};
            sys_g.F = [&p, newv](int l, double, const vecd& y) {
                hh_rate_set r = hh_rates(p, newv[l - 1]);
                vecd f(3);
                f[0] = r.an * (1.0 - y[0]) - r.bn * y[0];
                f[1] = r.am * (1.0 - y[1]) - r.bm * y[1];
                f[2] = r.ah * (1.0 - y[2]) - r.bh * y[2];
                return f;
            };
            sys_g.dF = [&p, newv](int l, double, const vecd&) {
                hh_rate_set r = hh_rates(p, newv[l - 1]);
                matd j3 = matd::Zero(3, 3);
                j3(0, 0) = -(r.an + r.bn);
                j3(1, 1) = -(r.am + r.bm);
                j3(2, 2) = -(r.ah + r.bh);
                return j3;
            };
            vecd gic(3);
            gic << gr.hist[1][j0], gr.hist[2][j0], gr.hist[3][j0];

            trained_solution sol_g;
            try {
                sol_g = train_fpinn(sys_g, t_a, gic, fc.train_gate,
                                    warm_gate ? &*warm_gate : nullptr);
            } catch (const divergence_error& e) {
                throw divergence_error("sub-interval " + std::to_string(j) +
                                       " (gating): " + e.what());
            }
            warm_gate = sol_g.net;

            for (int l = 1; l <= fc.n2; ++l) {
                vecd gl = forward(sol_g.net, t_a + l * gr.dt);
                gr.hist[0].push_back(newv[l - 1]);
                gr.hist[1].push_back(gl[0]);
                gr.hist[2].push_back(gl[1]);
                gr.hist[3].push_back(gl[2]);
            }

            res.total_iters += sol_v.iters + sol_g.iters;
            res.all_converged = res.all_converged && sol_v.converged && sol_g.converged;
            res.final_losses.push_back(sol_v.final_loss);
            res.final_losses.push_back(sol_g.final_loss);
            for (auto [it, L] : sol_v.loss_history) res.loss_rows.push_back({j, 0, it, L});
            for (auto [it, L] : sol_g.loss_history) res.loss_rows.push_back({j, 1, it, L});
        }
    }

    res.traj.labels = {"v", "n", "m", "h"};
    res.traj.model_id = "fohh";
    res.traj.scheme = fc.backend == fohh_backend::fpinn ? "splitting-fpinn" : "l1-implicit";
    for (long i = 0; i <= gr.n_total; ++i) {
        vecd x(4);
        x << gr.hist[0][i], gr.hist[1][i], gr.hist[2][i], gr.hist[3][i];
        res.traj.append(detail::grid_time(gr, i), x);
    }
    return res;
}

}  // namespace neurosplit
