#pragma once
// Experiment configuration: JSON round-trip, canonical content hashing, and
// the preset registry. Every preset is runnable at two scales: "paper" keeps
// the full published settings, "desk" shrinks horizon, mesh, and training
// budgets so a laptop CPU finishes in minutes.

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "models.hpp"
#include "pinn.hpp"

namespace neurosplit {

using njson = nlohmann::json;

enum class scheme_kind { pinn, splitting_pinn, splitting_fpinn, reference, rk4 };

inline std::string scheme_name(scheme_kind s) {
    switch (s) {
        case scheme_kind::pinn: return "pinn";
        case scheme_kind::splitting_pinn: return "splitting-pinn";
        case scheme_kind::splitting_fpinn: return "splitting-fpinn";
        case scheme_kind::reference: return "reference";
        case scheme_kind::rk4: return "rk4";
    }
    throw config_error("scheme_name: bad enum");
}

inline scheme_kind scheme_from_name(const std::string& s) {
    if (s == "pinn") return scheme_kind::pinn;
    if (s == "splitting-pinn") return scheme_kind::splitting_pinn;
    if (s == "splitting-fpinn") return scheme_kind::splitting_fpinn;
    if (s == "reference") return scheme_kind::reference;
    if (s == "rk4") return scheme_kind::rk4;
    throw config_error("unknown scheme: " + s);
}

inline std::string act_name(activation a) {
    return a == activation::tanh_fn ? "tanh" : "sin";
}
inline activation act_from_name(const std::string& s) {
    if (s == "tanh") return activation::tanh_fn;
    if (s == "sin") return activation::sin_fn;
    throw config_error("unknown activation: " + s);
}
inline std::string opt_name(optimizer_kind k) {
    return k == optimizer_kind::adam ? "adam" : "adamax";
}
inline optimizer_kind opt_from_name(const std::string& s) {
    if (s == "adam") return optimizer_kind::adam;
    if (s == "adamax") return optimizer_kind::adamax;
    throw config_error("unknown optimizer: " + s);
}

struct experiment_config {
    std::string id = "custom";
    std::string model = "lif";   // lif | izhikevich | hh | fohh
    std::string scale = "desk";  // desk | paper
    scheme_kind scheme = scheme_kind::reference;
    bool threshold = false;  // lif reset rule

    lif_params lif;
    izhikevich_params izh;
    hh_params hh;
    current_source current = current_source::constant(0.0);
    fractional_orders orders;  // fohh only

    double t_end = 1.0;
    int sub_intervals = 1;
    int points = 20;    // recorded/collocation points per sub-interval
    bool strang = false;
    int n2 = 8;         // fohh grid points per sub-interval

    train_config train1, train2;  // first / second sub-problem
    double test_fraction = 0.2;
    std::uint64_t test_seed = 0x5eed;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string outdir = "out";

    int ref_m1 = 32;       // reference mesh grading density
    int ref_dense = 4000;  // rows in the cached reference sampling

    void validate() const;
};

// ---------------------------------------------------------------------------
// serialization

namespace detail {

inline njson train_to_json(const train_config& t) {
    return njson{{"depth", t.arch.depth},
                 {"width", t.arch.width},
                 {"activation", act_name(t.arch.act)},
                 {"fourier_k", t.arch.fourier_k},
                 {"adaptive_slope", t.arch.adaptive_slope},
                 {"optimizer", opt_name(t.opt.kind)},
                 {"lr", t.opt.lr},
                 {"beta1", t.opt.beta1},
                 {"beta2", t.opt.beta2},
                 {"eps", t.opt.eps},
                 {"decay_gamma", t.opt.decay_gamma},
                 {"decay_every", t.opt.decay_every},
                 {"max_iters", t.max_iters},
                 {"target_loss", t.target_loss},
                 {"ic_weight", t.ic_weight},
                 {"seed", t.seed}};
}

inline train_config train_from_json(const njson& j) {
    train_config t;
    t.arch.depth = j.value("depth", t.arch.depth);
    t.arch.width = j.value("width", t.arch.width);
    t.arch.act = act_from_name(j.value("activation", act_name(t.arch.act)));
    t.arch.fourier_k = j.value("fourier_k", t.arch.fourier_k);
    t.arch.adaptive_slope = j.value("adaptive_slope", t.arch.adaptive_slope);
    t.opt.kind = opt_from_name(j.value("optimizer", opt_name(t.opt.kind)));
    t.opt.lr = j.value("lr", t.opt.lr);
    t.opt.beta1 = j.value("beta1", t.opt.beta1);
    t.opt.beta2 = j.value("beta2", t.opt.beta2);
    t.opt.eps = j.value("eps", t.opt.eps);
    t.opt.decay_gamma = j.value("decay_gamma", t.opt.decay_gamma);
    t.opt.decay_every = j.value("decay_every", t.opt.decay_every);
    t.max_iters = j.value("max_iters", t.max_iters);
    t.target_loss = j.value("target_loss", t.target_loss);
    t.ic_weight = j.value("ic_weight", t.ic_weight);
    t.seed = j.value("seed", t.seed);
    return t;
}

}  // namespace detail

inline njson config_to_json(const experiment_config& c) {
    return njson{
        {"id", c.id},
        {"model", c.model},
        {"scale", c.scale},
        {"scheme", scheme_name(c.scheme)},
        {"threshold", c.threshold},
        {"lif", {{"c_m", c.lif.c_m}, {"r", c.lif.r}, {"v_rest", c.lif.v_rest},
                 {"v_th", c.lif.v_th}, {"tau_ref", c.lif.tau_ref}}},
        {"izhikevich", {{"a", c.izh.a}, {"b", c.izh.b}, {"c", c.izh.c}, {"d", c.izh.d},
                        {"v_th", c.izh.v_th}}},
        {"hh", {{"g_na", c.hh.g_na}, {"g_k", c.hh.g_k}, {"g_l", c.hh.g_l},
                {"e_na", c.hh.e_na}, {"e_k", c.hh.e_k}, {"e_l", c.hh.e_l},
                {"c_m", c.hh.c_m}, {"v0", c.hh.v0}, {"n0", c.hh.n0}, {"m0", c.hh.m0},
                {"h0", c.hh.h0}, {"beta_m_divisor", c.hh.beta_m_divisor}}},
        {"current", {{"times", c.current.times}, {"levels", c.current.levels}}},
        {"orders", {{"v", c.orders.v}, {"n", c.orders.n}, {"m", c.orders.m},
                    {"h", c.orders.h}}},
        {"t_end", c.t_end},
        {"sub_intervals", c.sub_intervals},
        {"points", c.points},
        {"strang", c.strang},
        {"n2", c.n2},
        {"train1", detail::train_to_json(c.train1)},
        {"train2", detail::train_to_json(c.train2)},
        {"test_fraction", c.test_fraction},
        {"test_seed", c.test_seed},
        {"seeds", c.seeds},
        {"outdir", c.outdir},
        {"ref_m1", c.ref_m1},
        {"ref_dense", c.ref_dense}};
}

inline experiment_config config_from_json(const njson& j) {
    experiment_config c;
    c.id = j.value("id", c.id);
    c.model = j.value("model", c.model);
    c.scale = j.value("scale", c.scale);
    c.scheme = scheme_from_name(j.value("scheme", scheme_name(c.scheme)));
    c.threshold = j.value("threshold", c.threshold);
    if (j.contains("lif")) {
        const njson& s = j["lif"];
        c.lif.c_m = s.value("c_m", c.lif.c_m);
        c.lif.r = s.value("r", c.lif.r);
        c.lif.v_rest = s.value("v_rest", c.lif.v_rest);
        c.lif.v_th = s.value("v_th", c.lif.v_th);
        c.lif.tau_ref = s.value("tau_ref", c.lif.tau_ref);
    }
    if (j.contains("izhikevich")) {
        const njson& s = j["izhikevich"];
        c.izh.a = s.value("a", c.izh.a);
        c.izh.b = s.value("b", c.izh.b);
        c.izh.c = s.value("c", c.izh.c);
        c.izh.d = s.value("d", c.izh.d);
        c.izh.v_th = s.value("v_th", c.izh.v_th);
    }
    if (j.contains("hh")) {
        const njson& s = j["hh"];
        c.hh.g_na = s.value("g_na", c.hh.g_na);
        c.hh.g_k = s.value("g_k", c.hh.g_k);
        c.hh.g_l = s.value("g_l", c.hh.g_l);
        c.hh.e_na = s.value("e_na", c.hh.e_na);
        c.hh.e_k = s.value("e_k", c.hh.e_k);
        c.hh.e_l = s.value("e_l", c.hh.e_l);
        c.hh.c_m = s.value("c_m", c.hh.c_m);
        c.hh.v0 = s.value("v0", c.hh.v0);
        c.hh.n0 = s.value("n0", c.hh.n0);
        c.hh.m0 = s.value("m0", c.hh.m0);
        c.hh.h0 = s.value("h0", c.hh.h0);
        c.hh.beta_m_divisor = s.value("beta_m_divisor", c.hh.beta_m_divisor);
    }
    if (j.contains("current")) {
        std::vector<double> t = j["current"].value("times", std::vector<double>{});
        std::vector<double> l = j["current"].value("levels", std::vector<double>{0.0});
        c.current = current_source(std::move(t), std::move(l));
    }
    if (j.contains("orders")) {
        const njson& s = j["orders"];
        c.orders.v = s.value("v", c.orders.v);
        c.orders.n = s.value("n", c.orders.n);
        c.orders.m = s.value("m", c.orders.m);
        c.orders.h = s.value("h", c.orders.h);
    }
    c.t_end = j.value("t_end", c.t_end);
    c.sub_intervals = j.value("sub_intervals", c.sub_intervals);
    c.points = j.value("points", c.points);
    c.strang = j.value("strang", c.strang);
    c.n2 = j.value("n2", c.n2);
    if (j.contains("train1")) c.train1 = detail::train_from_json(j["train1"]);
    if (j.contains("train2")) c.train2 = detail::train_from_json(j["train2"]);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.test_seed = j.value("test_seed", c.test_seed);
    c.seeds = j.value("seeds", c.seeds);
    c.outdir = j.value("outdir", c.outdir);
    c.ref_m1 = j.value("ref_m1", c.ref_m1);
    c.ref_dense = j.value("ref_dense", c.ref_dense);
    c.validate();
    return c;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// canonical content hash: nlohmann objects serialize with sorted keys
inline std::uint64_t config_hash(const experiment_config& c) {
    return fnv1a(config_to_json(c).dump());
}

// cache key for the reference solution: only fields the reference depends on
// (active model's parameters, drive, horizon, orders, reference controls)
inline std::uint64_t reference_hash(const experiment_config& c) {
    njson j{{"model", c.model},
            {"current", {{"times", c.current.times}, {"levels", c.current.levels}}},
            {"t_end", c.t_end},
            {"ref_m1", c.ref_m1},
            {"ref_dense", c.ref_dense}};
    if (c.model == "lif")
        j["lif"] = {{"c_m", c.lif.c_m}, {"r", c.lif.r}, {"v_rest", c.lif.v_rest},
                    {"v_th", c.lif.v_th}, {"tau_ref", c.lif.tau_ref},
                    {"threshold", c.threshold}};
    if (c.model == "izhikevich")
        j["izhikevich"] = {{"a", c.izh.a}, {"b", c.izh.b}, {"c", c.izh.c},
                           {"d", c.izh.d}, {"v_th", c.izh.v_th}};
    if (c.model == "hh" || c.model == "fohh")
        j["hh"] = {{"g_na", c.hh.g_na}, {"g_k", c.hh.g_k}, {"g_l", c.hh.g_l},
                   {"e_na", c.hh.e_na}, {"e_k", c.hh.e_k}, {"e_l", c.hh.e_l},
                   {"c_m", c.hh.c_m}, {"v0", c.hh.v0}, {"n0", c.hh.n0},
                   {"m0", c.hh.m0}, {"h0", c.hh.h0},
                   {"beta_m_divisor", c.hh.beta_m_divisor}};
    if (c.model == "fohh")
        j["orders"] = {{"v", c.orders.v}, {"n", c.orders.n}, {"m", c.orders.m},
                       {"h", c.orders.h}};
    return fnv1a(j.dump());
}

inline void experiment_config::validate() const {
    auto fail = [&](const std::string& m) { throw config_error(id + ": " + m); };
    if (model != "lif" && model != "izhikevich" && model != "hh" && model != "fohh")
        fail("unknown model " + model);
    if (scale != "desk" && scale != "paper") fail("scale must be desk or paper");
    if (!(t_end > 0)) fail("t_end must be positive");
    if (sub_intervals < 1) fail("need at least one sub-interval");
    if (points < 2) fail("need at least two points per sub-interval");
    if (n2 < 1) fail("n2 must be at least 1");
    if (test_fraction < 0 || test_fraction >= 1) fail("test_fraction must be in [0, 1)");
    if (seeds.empty()) fail("need at least one seed");
    if (ref_m1 < 4) fail("ref_m1 too small");
    if (ref_dense < 2) fail("ref_dense too small");
    if (model == "fohh") {
        if (scheme != scheme_kind::splitting_fpinn && scheme != scheme_kind::reference)
            fail("fractional model requires the splitting-fpinn or reference scheme");
        for (double q : {orders.v, orders.n, orders.m, orders.h})
            if (!(q > 0) || q > 1) fail("fractional orders must lie in (0, 1]");
    } else if (scheme == scheme_kind::splitting_fpinn) {
        fail("splitting-fpinn needs fractional orders (model fohh)");
    }
    if (model == "lif" && scheme == scheme_kind::splitting_pinn)
        fail("the scalar model has nothing to split; use scheme pinn");
}

// ---------------------------------------------------------------------------
// preset registry

inline std::vector<std::string> preset_names() {
    return {"lif",         "lif-threshold", "izhikevich", "hh-step",
            "hh-constant", "fohh-0.8",      "fohh-0.6",   "fohh-0.4"};
}

namespace detail {

inline train_config tcfg(int depth, int width, activation act, optimizer_kind k, double lr,
                         long iters) {
    train_config t;
    t.arch.depth = depth;
    t.arch.width = width;
    t.arch.act = act;
    t.opt.kind = k;
    t.opt.lr = lr;
    t.max_iters = iters;
    return t;
}

}  // namespace detail

inline experiment_config make_preset(const std::string& name, const std::string& scale) {
    if (scale != "desk" && scale != "paper")
        throw config_error("unknown scale: " + scale);
    const bool desk = scale == "desk";
    using detail::tcfg;
    constexpr auto tanh_a = activation::tanh_fn;
    constexpr auto sin_a = activation::sin_fn;
    constexpr auto adam = optimizer_kind::adam;
    constexpr auto adamax = optimizer_kind::adamax;

    experiment_config c;
    c.id = name;
    c.scale = scale;

    if (name == "lif") {
        // single-domain network fit of the RC charging curve
        c.model = "lif";
        c.scheme = scheme_kind::pinn;
        c.current = current_source::constant(0.1);
        c.t_end = 0.5;
        c.sub_intervals = 1;
        c.ref_dense = 2000;
        if (desk) {  // 1/5 the residual points, smaller net
            c.points = 200;
            c.train1 = tcfg(4, 24, tanh_a, adam, 3e-3, 20000);
        } else {
            c.points = 1000;
            c.train1 = tcfg(5, 40, tanh_a, adam, 1e-3, 50000);
        }
    } else if (name == "lif-threshold") {
        c.model = "lif";
        c.scheme = scheme_kind::pinn;
        c.threshold = true;
        c.current = current_source::constant(0.3);
        c.ref_dense = 2000;
        if (desk) {  // half the horizon and mesh, 1/20 the iterations
            c.t_end = 0.1;
            c.sub_intervals = 500;
            c.points = 6;
            c.train1 = tcfg(3, 12, tanh_a, adam, 1e-3, 500);
        } else {
            c.t_end = 0.2;
            c.sub_intervals = 1000;
            c.points = 20;
            c.train1 = tcfg(7, 60, tanh_a, adam, 1e-3, 10000);
        }
        // sub-intervals are ~1e-4 s wide, so the squared-residual term of the
        // loss carries an enormous (2/width)^2 scale; the initial-condition
        // term needs a matching weight or the interval chain never links up
        c.train1.ic_weight = 1e6;
    } else if (name == "izhikevich") {
        c.model = "izhikevich";
        c.scheme = scheme_kind::splitting_pinn;
        c.current = current_source::step(2.0, 0.0, 15.0);
        c.ref_dense = 4000;
        if (desk) {  // half the horizon/mesh, ~1/15 the iterations, smaller nets
            c.t_end = 50.0;
            c.sub_intervals = 1000;
            c.points = 10;
            c.train1 = tcfg(3, 12, tanh_a, adam, 4e-3, 800);
            c.train2 = tcfg(3, 20, tanh_a, adamax, 4e-3, 2000);
        } else {
            c.t_end = 100.0;
            c.sub_intervals = 2000;
            c.points = 20;
            c.train1 = tcfg(6, 40, tanh_a, adam, 1e-3, 20000);
            c.train2 = tcfg(6, 40, tanh_a, adamax, 1e-3, 20000);
        }
        // 0.05 ms sub-intervals: match the initial-condition weight to the
        // (2/width)^2 residual scale so interval hand-offs stay pinned
        c.train1.ic_weight = 2e3;
        c.train2.ic_weight = 2e3;
    } else if (name == "hh-step") {
        c.model = "hh";
        c.scheme = scheme_kind::splitting_pinn;
        // subthreshold pulse: the tight error target needs the splitting error
        // itself well under 1e-2, and any spike upstroke costs ~1.5e-2 at a
        // 0.1 ms march step; spiking responses are exercised by hh-constant
        c.current = current_source::window(2.0, 6.0, 8.0);
        c.t_end = 20.0;
        c.ref_dense = 16000;
        if (desk) {  // 1/4 the mesh, <= 3000 iterations per sub-problem
            c.sub_intervals = 200;
            c.points = 20;
            c.train1 = tcfg(3, 16, tanh_a, adam, 3e-3, 800);
            c.train2 = tcfg(3, 20, sin_a, adamax, 3e-3, 1600);
            c.train1.ic_weight = 1e3;  // match the (2/width)^2 residual scale
            c.train2.ic_weight = 1e3;
        } else {
            c.sub_intervals = 800;
            c.points = 40;
            c.train1 = tcfg(6, 20, tanh_a, adam, 1e-3, 20000);
            c.train2 = tcfg(10, 20, sin_a, adamax, 1e-3, 20000);
            c.train1.ic_weight = 1e4;
            c.train2.ic_weight = 1e4;
        }
    } else if (name == "hh-constant") {
        c.model = "hh";
        c.scheme = scheme_kind::splitting_pinn;
        c.current = current_source::constant(10.0);
        c.ref_dense = 16000;
        if (desk) {  // 2/5 the horizon at the same step, reduced training
            c.t_end = 40.0;
            c.sub_intervals = 600;
            c.points = 12;
            c.train1 = tcfg(3, 16, tanh_a, adam, 3e-3, 700);
            c.train2 = tcfg(3, 20, sin_a, adam, 3e-3, 1500);
        } else {
            c.t_end = 100.0;
            c.sub_intervals = 3000;
            c.points = 30;
            c.train1 = tcfg(6, 20, tanh_a, adam, 1e-3, 20000);
            c.train2 = tcfg(10, 20, sin_a, adam, 1e-3, 20000);
        }
    } else if (name == "fohh-0.8" || name == "fohh-0.6" || name == "fohh-0.4") {
        double q = name == "fohh-0.8" ? 0.8 : name == "fohh-0.6" ? 0.6 : 0.4;
        long paper_iters = name == "fohh-0.8" ? 70000 : name == "fohh-0.6" ? 50000 : 20000;
        c.model = "fohh";
        c.scheme = scheme_kind::splitting_fpinn;
        c.current = current_source::constant(20.0);
        c.orders = fractional_orders::uniform(q);
        c.ref_dense = 16000;
        if (desk) {  // 2/5 the horizon, coarser memory grid, ~1/50 the iterations
            c.t_end = 40.0;
            c.sub_intervals = 300;
            c.n2 = 8;
            c.points = 8;
            c.train1 = tcfg(3, 24, tanh_a, adam, 3e-3, 1200);
            c.train2 = tcfg(3, 20, sin_a, adam, 3e-3, 800);
        } else {
            c.t_end = 100.0;
            c.sub_intervals = 2000;
            c.n2 = 40;
            c.points = 40;
            c.train1 = tcfg(10, 100, tanh_a, adam, 1e-3, paper_iters);
            c.train2 = tcfg(6, 100, sin_a, adam, 1e-3, paper_iters);
            c.ref_dense = 40000;
        }
    } else {
        throw config_error("unknown preset: " + name);
    }
    c.validate();
    return c;
}

}  // namespace neurosplit
