#pragma once
// Small fully-connected networks with a tangent-augmented forward pass.
//
// The forward pass propagates (y, dy/dt) jointly; the backward pass
// differentiates any loss built from both through the extended graph, so
// residual losses that contain the time derivative need no numeric tricks.

#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <random>
#include <vector>

#include "numerics.hpp"

namespace neurosplit {

enum class activation { tanh_fn, sin_fn };

enum class optimizer_kind { adam, adamax };

struct architecture {
    int depth = 4;   // number of affine layers, >= 2
    int width = 20;  // hidden width
    int out_dim = 1;
    activation act = activation::tanh_fn;
    int fourier_k = 0;          // 0 = raw input only
    bool adaptive_slope = false;  // trainable per-layer slope inside the activation
    int input_features() const { return 1 + 2 * fourier_k; }
};

// Feature map on the normalized input t^ in [-1,1]:
// [t^, sin(2*pi*k t^), cos(2*pi*k t^)] for k = 1..kmax. df is d/dt^.
inline void fourier_features(double that, int kmax, vecd& f, vecd& df) {
    int n = 1 + 2 * kmax;
    f.resize(n);
    df.resize(n);
    f[0] = that;
    df[0] = 1.0;
    for (int k = 1; k <= kmax; ++k) {
        double w = 2.0 * pi * k;
        f[2 * k - 1] = std::sin(w * that);
        f[2 * k] = std::cos(w * that);
        df[2 * k - 1] = w * std::cos(w * that);
        df[2 * k] = -w * std::sin(w * that);
    }
}

struct network {
    architecture arch;
    std::vector<matd> w;
    std::vector<vecd> b;
    vecd slope;  // one entry per hidden activation (depth - 1), fixed at 1 unless adaptive
    // normalization window: inputs are mapped affinely from [t_lo, t_hi] to [-1, 1]
    double t_lo = -1.0, t_hi = 1.0;

    void set_domain(double a, double bnd) {
        if (!(bnd > a)) throw config_error("network: degenerate input domain");
        t_lo = a;
        t_hi = bnd;
    }
    double normalize(double t) const { return 2.0 * (t - t_lo) / (t_hi - t_lo) - 1.0; }
    double dnorm() const { return 2.0 / (t_hi - t_lo); }
};

struct net_grads {
    std::vector<matd> w;
    std::vector<vecd> b;
    vecd slope;

    void set_zero() {
        for (auto& m : w) m.setZero();
        for (auto& v : b) v.setZero();
        slope.setZero();
    }
};

inline net_grads make_grads_like(const network& n) {
    net_grads g;
    for (const auto& m : n.w) g.w.push_back(matd::Zero(m.rows(), m.cols()));
    for (const auto& v : n.b) g.b.push_back(vecd::Zero(v.size()));
    g.slope = vecd::Zero(n.slope.size());
    return g;
}

// Glorot-uniform weights, zero biases, unit slopes; fully determined by the seed.
inline network init_params(const architecture& arch, std::uint64_t seed) {
    if (arch.depth < 2) throw config_error("architecture: depth must be >= 2");
    if (arch.width < 1 || arch.out_dim < 1) throw config_error("architecture: bad sizes");
    network n;
    n.arch = arch;
    std::mt19937_64 eng(seed);
    int in = arch.input_features();
    for (int l = 0; l < arch.depth; ++l) {
        int rows = (l == arch.depth - 1) ? arch.out_dim : arch.width;
        int cols = (l == 0) ? in : arch.width;
        double bound = std::sqrt(6.0 / double(rows + cols));
        matd m(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) m(r, c) = (2.0 * uniform01(eng) - 1.0) * bound;
        n.w.push_back(std::move(m));
        n.b.push_back(vecd::Zero(rows));
    }
    n.slope = vecd::Ones(arch.depth - 1);
    return n;
}

// Everything the backward pass needs about one evaluation point.
struct eval_record {
    double t = 0, dthat = 0;
    vecd feat, dfeat;                 // physical-time derivative already applied
    std::vector<vecd> z, zd;          // affine outputs and their time derivatives
    std::vector<vecd> sig, sigp, gd;  // activation values, first derivative, d(act)/dt
    vecd y, yd;
};

inline void activation_eval(activation a, const vecd& s, vecd& sig, vecd& sigp) {
    sig.resize(s.size());
    sigp.resize(s.size());
    if (a == activation::tanh_fn) {
        for (int i = 0; i < s.size(); ++i) {
            double v = std::tanh(s[i]);
            sig[i] = v;
            sigp[i] = 1.0 - v * v;
        }
    } else {
        for (int i = 0; i < s.size(); ++i) {
            sig[i] = std::sin(s[i]);
            sigp[i] = std::cos(s[i]);
        }
    }
}

// second derivative from stored values: tanh'' = -2 sig sigp, sin'' = -sig
inline double act_second(activation a, double sig, double sigp) {
    return a == activation::tanh_fn ? -2.0 * sig * sigp : -sig;
}

inline eval_record forward_tangent(const network& n, double t) {
    eval_record r;
    r.t = t;
    double that = n.normalize(t);
    r.dthat = n.dnorm();
    fourier_features(that, n.arch.fourier_k, r.feat, r.dfeat);
    r.dfeat *= r.dthat;  // chain to physical time

    int L = n.arch.depth;
    r.z.resize(L);
    r.zd.resize(L);
    r.sig.resize(L - 1);
    r.sigp.resize(L - 1);
    r.gd.resize(L - 1);
    r.z[0] = n.w[0] * r.feat + n.b[0];
    r.zd[0] = n.w[0] * r.dfeat;
    for (int l = 1; l < L; ++l) {
        double a = n.slope[l - 1];
        vecd s = a * r.z[l - 1];
        activation_eval(n.arch.act, s, r.sig[l - 1], r.sigp[l - 1]);
        r.gd[l - 1] = r.sigp[l - 1].cwiseProduct(a * r.zd[l - 1]);
        r.z[l] = n.w[l] * r.sig[l - 1] + n.b[l];
        r.zd[l] = n.w[l] * r.gd[l - 1];
    }
    r.y = r.z[L - 1];
    r.yd = r.zd[L - 1];
    return r;
}

inline vecd forward(const network& n, double t) { return forward_tangent(n, t).y; }

// dy/dt at t (physical time, normalization chain factor included)
inline vecd grad_input(const network& n, double t) { return forward_tangent(n, t).yd; }

// Accumulate d(loss)/d(params) given the loss adjoints gy = dL/dy, gyd = dL/d(yd).
inline void backward(const network& n, const eval_record& r, const vecd& gy, const vecd& gyd,
                     net_grads& g) {
    int L = n.arch.depth;
    vecd zbar = gy;
    vecd zdbar = gyd;
    for (int l = L - 1; l >= 1; --l) {
        const vecd& gval = r.sig[l - 1];
        const vecd& gdval = r.gd[l - 1];
        g.w[l].noalias() += zbar * gval.transpose();
        g.w[l].noalias() += zdbar * gdval.transpose();
        g.b[l] += zbar;
        vecd gbar = n.w[l].transpose() * zbar;
        vecd gdbar = n.w[l].transpose() * zdbar;

        double a = n.slope[l - 1];
        const vecd& sig = r.sig[l - 1];
        const vecd& sigp = r.sigp[l - 1];
        const vecd& z = r.z[l - 1];
        const vecd& zd = r.zd[l - 1];
        vecd sigpp(sig.size());
        for (int i = 0; i < sig.size(); ++i) sigpp[i] = act_second(n.arch.act, sig[i], sigp[i]);

        // g = sigma(a z), gd = sigma'(a z) * a zd
        vecd nzbar = a * gbar.cwiseProduct(sigp) + a * a * gdbar.cwiseProduct(sigpp).cwiseProduct(zd);
        vecd nzdbar = a * gdbar.cwiseProduct(sigp);
        double sl = gbar.dot(sigp.cwiseProduct(z)) +
                    gdbar.dot(sigpp.cwiseProduct(z).cwiseProduct(a * zd) + sigp.cwiseProduct(zd));
        g.slope[l - 1] += sl;
        zbar = std::move(nzbar);
        zdbar = std::move(nzdbar);
    }
    g.w[0].noalias() += zbar * r.feat.transpose();
    g.w[0].noalias() += zdbar * r.dfeat.transpose();
    g.b[0] += zbar;
}

// Generic batched driver: evaluates the net (with tangents) at ts, hands all
// values to `fn`, which returns the scalar loss and fills the per-point
// adjoints; the backward sweep then accumulates the parameter gradient.
// fn: (ys, yds, gys, gyds) -> double
template <class LossFn>
double grad_params(const network& n, const std::vector<double>& ts, LossFn&& fn, net_grads& g) {
    std::vector<eval_record> recs;
    recs.reserve(ts.size());
    std::vector<vecd> ys, yds;
    for (double t : ts) {
        recs.push_back(forward_tangent(n, t));
        ys.push_back(recs.back().y);
        yds.push_back(recs.back().yd);
    }
    std::vector<vecd> gys(ts.size(), vecd::Zero(n.arch.out_dim));
    std::vector<vecd> gyds(ts.size(), vecd::Zero(n.arch.out_dim));
    double loss = fn(ys, yds, gys, gyds);
    for (std::size_t i = 0; i < recs.size(); ++i) backward(n, recs[i], gys[i], gyds[i], g);
    return loss;
}

// ---------------------------------------------------------------------------
struct optimizer_settings {
    optimizer_kind kind = optimizer_kind::adam;
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    // staircase exponential decay: lr * gamma^floor(step / every); every <= 0 disables
    double decay_gamma = 0.95;
    long decay_every = 1000;
};

struct optimizer_state {
    optimizer_settings cfg;
    long step = 0;
    net_grads m, v;  // v doubles as the infinity-norm accumulator for adamax

    double lr_now() const {
        if (cfg.decay_every <= 0) return cfg.lr;
        return cfg.lr * std::pow(cfg.decay_gamma, double(step / cfg.decay_every));
    }
};

inline optimizer_state make_optimizer(const optimizer_settings& cfg, const network& n) {
    optimizer_state s;
    s.cfg = cfg;
    s.m = make_grads_like(n);
    s.v = make_grads_like(n);
    return s;
}

namespace detail {
inline void adam_update(double* th, const double* g, double* m, double* v, long n,
                        const optimizer_settings& c, double lr, long t, bool adamax) {
    double bc1 = 1.0 - std::pow(c.beta1, double(t));
    double bc2 = 1.0 - std::pow(c.beta2, double(t));
    for (long i = 0; i < n; ++i) {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        if (adamax) {
            v[i] = std::max(c.beta2 * v[i], std::abs(g[i]));
            th[i] -= lr * (m[i] / bc1) / std::max(v[i], 1e-300);
        } else {
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            th[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c.eps);
        }
    }
}
}  // namespace detail

inline void adam_step(optimizer_state& s, network& n, const net_grads& g) {
    ++s.step;
    double lr = s.lr_now();
    bool amax = s.cfg.kind == optimizer_kind::adamax;
    for (std::size_t l = 0; l < n.w.size(); ++l) {
        detail::adam_update(n.w[l].data(), g.w[l].data(), s.m.w[l].data(), s.v.w[l].data(),
                            n.w[l].size(), s.cfg, lr, s.step, amax);
        detail::adam_update(n.b[l].data(), g.b[l].data(), s.m.b[l].data(), s.v.b[l].data(),
                            n.b[l].size(), s.cfg, lr, s.step, amax);
    }
    if (n.arch.adaptive_slope)
        detail::adam_update(n.slope.data(), g.slope.data(), s.m.slope.data(), s.v.slope.data(),
                            n.slope.size(), s.cfg, lr, s.step, amax);
}

// ---------------------------------------------------------------------------
// Plain-text checkpointing; %.17g round-trips doubles exactly.
inline void dump_network(const network& n, std::ostream& os) {
    os.precision(17);
    os << "net " << n.arch.depth << ' ' << n.arch.width << ' ' << n.arch.out_dim << ' '
       << int(n.arch.act) << ' ' << n.arch.fourier_k << ' ' << int(n.arch.adaptive_slope) << ' '
       << n.t_lo << ' ' << n.t_hi << '\n';
    for (const auto& m : n.w) {
        for (long i = 0; i < m.size(); ++i) os << m.data()[i] << ' ';
        os << '\n';
    }
    for (const auto& v : n.b) {
        for (long i = 0; i < v.size(); ++i) os << v.data()[i] << ' ';
        os << '\n';
    }
    for (long i = 0; i < n.slope.size(); ++i) os << n.slope[i] << ' ';
    os << '\n';
}

inline network load_network(std::istream& is) {
    std::string tag;
    architecture a;
    int act = 0, slopes = 0;
    double lo, hi;
    is >> tag >> a.depth >> a.width >> a.out_dim >> act >> a.fourier_k >> slopes >> lo >> hi;
    if (tag != "net" || !is) throw config_error("load_network: bad header");
    a.act = activation(act);
    a.adaptive_slope = slopes != 0;
    network n = init_params(a, 0);
    n.t_lo = lo;
    n.t_hi = hi;
    for (auto& m : n.w)
        for (long i = 0; i < m.size(); ++i) is >> m.data()[i];
    for (auto& v : n.b)
        for (long i = 0; i < v.size(); ++i) is >> v.data()[i];
    for (long i = 0; i < n.slope.size(); ++i) is >> n.slope[i];
    if (!is) throw config_error("load_network: truncated payload");
    return n;
}

}  // namespace neurosplit
