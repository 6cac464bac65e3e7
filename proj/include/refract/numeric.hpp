#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include "refract/pathsim.hpp"

namespace refract {

// expm1(w)/w with the removable singularity at 0.
inline double phi1(double w) {
    if (std::abs(w) < 1e-8) return 1.0 + 0.5 * w;
    return std::expm1(w) / w;
}
inline std::complex<double> phi1(std::complex<double> w) {
    if (std::abs(w) < 1e-8) return 1.0 + 0.5 * w;
    return (std::exp(w) - 1.0) / w;
}

// (exp(a*u) - exp(a*l)) / a, stable for a near 0.
inline double expdiff(double a, double l, double u) {
    const double w = a * (u - l);
    return std::exp(a * l) * (u - l) * phi1(w);
}
inline std::complex<double> expdiff(std::complex<double> a, double l, double u) {
    const std::complex<double> w = a * (u - l);
    return std::exp(a * l) * (u - l) * phi1(w);
}

// Weights for int_{t1}^{t2} e^{-q t} g(t) dt with g linearly interpolated
// between its endpoint values: integral = w1*g1 + w2*g2.
struct ExpLinearWeights {
    double w1 = 0.0, w2 = 0.0;
};

inline ExpLinearWeights exp_linear_weights(double q, double t1, double dt,
                                           double e1 /* = e^{-q t1} */) {
    ExpLinearWeights w;
    if (dt <= 0.0) return w;
    (void)t1;
    const double x = q * dt;
    const double A = -std::expm1(-x) / q;
    const double B = (-std::expm1(-x) - x * std::exp(-x)) / (q * q * dt);
    w.w1 = e1 * (A - B);
    w.w2 = e1 * B;
    return w;
}

// Precomputed discount factors and per-cell integration weights for a
// uniform record pattern on a TimeGrid. Shared across all paths of a run.
struct DiscountTable {
    double q = 1.0;
    std::vector<double> E;    // e^{-q t_k}, size n+1
    std::vector<double> w1;   // per cell
    std::vector<double> w2;
    std::vector<double> wdL;  // control weight: contribution = (L2-L1)*wdL
    std::vector<double> wocc; // plain occupation: int_cell e^{-qt} dt

    DiscountTable() = default;
    DiscountTable(const TimeGrid& grid, double q_) : q(q_) {
        const int n = grid.n_steps();
        E.resize(n + 1);
        w1.resize(n);
        w2.resize(n);
        wdL.resize(n);
        wocc.resize(n);
        for (int k = 0; k <= n; ++k) E[k] = std::exp(-q * grid.time(k));
        for (int k = 0; k < n; ++k) {
            const double dt = grid.time(k + 1) - grid.time(k);
            const auto w = exp_linear_weights(q, grid.time(k), dt, E[k]);
            w1[k] = w.w1;
            w2[k] = w.w2;
            wocc[k] = (E[k] - E[k + 1]) / q;
            wdL[k] = wocc[k] / dt;
        }
    }
};

// Adaptive Simpson quadrature.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol, int max_depth = 20);

// Upper incomplete gamma Gamma(n+1, x) for integer n >= 0:
// n! e^{-x} sum_{k=0}^{n} x^k / k!.
inline double upper_gamma_int(int n, double x) {
    double fact = 1.0;
    double term = 1.0;  // x^k / k!
    double sum = 1.0;
    for (int k = 1; k <= n; ++k) {
        fact *= k;
        term *= x / k;
        sum += term;
    }
    return fact * std::exp(-x) * sum;
}

// Streaming mean/variance accumulator.
struct RunningStats {
    long n = 0;
    double sum = 0.0;
    double sumsq = 0.0;
    void add(double x) {
        ++n;
        sum += x;
        sumsq += x * x;
    }
    double mean() const { return n > 0 ? sum / n : 0.0; }
    double variance() const {
        if (n < 2) return 0.0;
        const double m = mean();
        return std::max(0.0, (sumsq - n * m * m) / (n - 1));
    }
    double se() const { return n > 0 ? std::sqrt(variance() / n) : 0.0; }
};

}  // namespace refract
