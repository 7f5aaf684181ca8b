#pragma once
// Physics-informed training of one sub-interval: residual + initial-condition
// loss over equispaced collocation points, Adam/Adamax loop with best-so-far
// parameter tracking and a dual stopping rule.

#include <optional>
#include <string>

#include "models.hpp"
#include "net.hpp"

namespace neurosplit {

struct sub_problem {
    double t_a = 0, t_b = 1;
    vecd x_a;
    std::function<vecd(double, const vecd&)> rhs;
    std::function<matd(double, const vecd&)> jac;  // d rhs / d x
    std::uint64_t seed_salt = 0;                   // mixed into cold-start seeds by marchers
    int dim() const { return int(x_a.size()); }
};

struct train_config {
    architecture arch;
    optimizer_settings opt;
    int points = 20;  // collocation points per sub-interval, both endpoints included
    long max_iters = 2000;
    double target_loss = 1e-9;
    double ic_weight = 1.0;
    std::uint64_t seed = 0;
};

// one sampled optimizer-loop point, tagged by marchers for loss curves
struct loss_record {
    long interval = 0;
    int component = 0;
    long iteration = 0;
    double loss = 0;
};

struct trained_solution {
    network net;
    double final_loss = 0;
    long iters = 0;
    bool converged = true;  // false when max_iters was hit above 100x target_loss
    std::vector<std::pair<long, double>> loss_history;  // downsampled (iteration, loss)
    vecd terminal;
    vecd eval(double t) const { return forward(net, t); }
};

// Mean squared residual over the collocation points plus the weighted initial
// condition misfit; ts[0] must be t_a so that point feeds both terms.
template <class MaybeGrads>
double residual_loss_impl(const network& net, const sub_problem& sub,
                          const std::vector<double>& ts, double ic_weight, MaybeGrads* g) {
    double nr = double(ts.size());
    auto fn = [&](const std::vector<vecd>& ys, const std::vector<vecd>& yds,
                  std::vector<vecd>& gys, std::vector<vecd>& gyds) {
        double L = 0;
        for (std::size_t i = 0; i < ys.size(); ++i) {
            vecd f = sub.rhs(ts[i], ys[i]);
            vecd r = yds[i] - f;
            L += r.squaredNorm() / nr;
            if (g) {
                gyds[i] = (2.0 / nr) * r;
                gys[i] = -(2.0 / nr) * (sub.jac(ts[i], ys[i]).transpose() * r);
            }
        }
        vecd e = ys[0] - sub.x_a;
        L += ic_weight * e.squaredNorm();
        if (g) gys[0] += 2.0 * ic_weight * e;
        return L;
    };
    if (g) return grad_params(net, ts, fn, *g);
    // evaluation-only path
    std::vector<vecd> ys, yds;
    for (double t : ts) {
        eval_record r = forward_tangent(net, t);
        ys.push_back(r.y);
        yds.push_back(r.yd);
    }
    std::vector<vecd> dummy;
    return fn(ys, yds, dummy, dummy);
}

inline double residual_loss(const network& net, const sub_problem& sub,
                            const std::vector<double>& ts, double ic_weight = 1.0) {
    return residual_loss_impl<net_grads>(net, sub, ts, ic_weight, nullptr);
}

namespace detail {

// Shared optimization loop: best-so-far parameter tracking, downsampled loss
// history, early stop at target_loss, divergence detection. lg(net, g)
// returns the loss, filling gradients when g is non-null.
template <class LossGrad>
trained_solution run_training(network net, const train_config& cfg, LossGrad&& lg, double t_b) {
    optimizer_state opt = make_optimizer(cfg.opt, net);
    net_grads g = make_grads_like(net);

    trained_solution out;
    long sample_every = std::max(1l, cfg.max_iters / 200);
    double best = std::numeric_limits<double>::infinity();
    network best_net = net;
    long it = 0;
    for (; it < cfg.max_iters; ++it) {
        g.set_zero();
        double L = lg(net, &g);
        if (!std::isfinite(L))
            throw divergence_error("training loss diverged at iteration " + std::to_string(it));
        if (it % sample_every == 0) out.loss_history.emplace_back(it, L);
        if (L < best) {
            best = L;
            best_net = net;
        }
        if (best <= cfg.target_loss) {
            ++it;
            break;
        }
        adam_step(opt, net, g);
    }
    if (it == cfg.max_iters) {
        // the last step's parameters were never scored
        double L = lg(net, static_cast<net_grads*>(nullptr));
        if (std::isfinite(L) && L < best) {
            best = L;
            best_net = net;
        }
    }
    if (out.loss_history.empty() || out.loss_history.back().second != best)
        out.loss_history.emplace_back(it, best);
    out.net = std::move(best_net);
    out.final_loss = best;
    out.iters = it;
    out.converged = best <= cfg.target_loss * 100.0;
    out.terminal = forward(out.net, t_b);
    return out;
}

}  // namespace detail

inline trained_solution train_subproblem(const sub_problem& sub, const train_config& cfg,
                                         const network* warm = nullptr) {
    if (!(sub.t_b > sub.t_a)) throw config_error("train_subproblem: empty interval");
    if (cfg.points < 2) throw config_error("train_subproblem: need at least 2 collocation points");
    network net;
    if (warm) {
        net = *warm;
    } else {
        architecture a = cfg.arch;
        a.out_dim = sub.dim();
        net = init_params(a, cfg.seed);
        net.b.back() = sub.x_a;  // start the output at the initial state
    }
    net.set_domain(sub.t_a, sub.t_b);

    auto ts = linspace(sub.t_a, sub.t_b, cfg.points);
    return detail::run_training(
        std::move(net), cfg,
        [&](const network& n, net_grads* g) {
            return g ? residual_loss_impl(n, sub, ts, cfg.ic_weight, g)
                     : residual_loss(n, sub, ts, cfg.ic_weight);
        },
        sub.t_b);
}

}  // namespace neurosplit
