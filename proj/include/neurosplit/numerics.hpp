#pragma once
// Shared numeric utilities: gamma function, RK4, RNG helpers, hashing.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace neurosplit {

using vecd = Eigen::VectorXd;
using matd = Eigen::MatrixXd;

constexpr double pi = 3.14159265358979323846;

// Lanczos approximation (g = 7, 9 coefficients), reflection formula for z < 0.5.
// Relative error is well below 1e-13 over the ranges used here.
inline double gamma_fn(double z) {
    static const double g = 7.0;
    static const double c[9] = {
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    };
    if (z < 0.5) {
        // Gamma(z) Gamma(1-z) = pi / sin(pi z); poles at non-positive integers
        if (z <= 0.0 && z == std::floor(z))
            throw std::domain_error("gamma_fn: pole at non-positive integer");
        return pi / (std::sin(pi * z) * gamma_fn(1.0 - z));
    }
    z -= 1.0;
    double x = c[0];
    for (int i = 1; i < 9; ++i) x += c[i] / (z + i);
    double t = z + g + 0.5;
    return std::sqrt(2.0 * pi) * std::pow(t, z + 0.5) * std::exp(-t) * x;
}

template <class F>
vecd rk4_step(F&& f, double t, double h, const vecd& x) {
    vecd k1 = f(t, x);
    vecd k2 = f(t + 0.5 * h, vecd(x + 0.5 * h * k1));
    vecd k3 = f(t + 0.5 * h, vecd(x + 0.5 * h * k2));
    vecd k4 = f(t + h, vecd(x + h * k3));
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <class F>
vecd rk4_integrate(F&& f, double t0, double t1, vecd x, int steps) {
    if (steps < 1) steps = 1;
    double h = (t1 - t0) / steps;
    for (int i = 0; i < steps; ++i) x = rk4_step(f, t0 + i * h, h, x);
    return x;
}

inline std::vector<double> linspace(double a, double b, int n) {
    if (n < 2) return {a};
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / double(n - 1);
    v.back() = b;
    return v;
}

// Uniform double in [0,1) drawn directly from the engine output so the stream
// does not depend on the standard library's distribution implementation.
inline double uniform01(std::mt19937_64& eng) {
    return double(eng() >> 11) * 0x1.0p-53;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

// splitmix64 finalizer; used to derive independent sub-seeds from a base seed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

struct divergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace neurosplit
