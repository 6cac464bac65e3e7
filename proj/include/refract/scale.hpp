#pragma once

#include <complex>
#include <vector>

#include "refract/levy_model.hpp"

namespace refract {

// Spectrally negative Levy model: no upward jumps, drift carried
// uncompensated (finite activity), Laplace exponent finite on [0, inf).
struct SnModel {
    double sigma = 0.0;
    double drift = 0.0;
    JumpSpec down_jumps;

    void validate() const;
    // True when 1/(psi - q) is a rational function of theta (no down point
    // masses), so scale functions are exact exponential sums.
    bool rational_transform() const;
    bool bounded_variation() const { return sigma == 0.0; }
};

// psi(theta) = drift*theta + sigma^2 theta^2/2 + sum lam(eta/(eta+theta)-1)
//            + sum lam(e^{-theta|z|}-1).
double laplace_exponent(const SnModel& model, double theta);
double laplace_exponent_dtheta(const SnModel& model, double theta);
std::complex<double> laplace_exponent(const SnModel& model, std::complex<double> theta);

// Largest root of psi(theta) - alpha_shift*theta = q (Phi(q) at shift 0,
// varphi(q) at shift alpha), by safeguarded Newton;
// |residual| <= 1e-12 max(1,q).
double right_inverse(const SnModel& model, double q, double alpha_shift = 0.0);

// q-scale function of X - alpha_shift*t: transform 1/(psi(theta)-q) for
// theta > Phi(q), zero on (-inf, 0). Rational models get the exact
// partial-fraction exponential sum; otherwise fixed-Talbot inversion of the
// Phi(q)-tilted transform.
class ScaleFn {
public:
    struct Eval {
        double value = 0.0;
        double derivative = 0.0;
    };

    ScaleFn() = default;
    ScaleFn(const SnModel& model, double q, double alpha_shift,
            bool force_numeric = false);

    Eval operator()(double x) const;
    double value(double x) const { return (*this)(x).value; }

    bool rational() const { return rational_; }
    double phi() const { return phi_; }
    double value_at_zero() const { return w0_; }
    // Exponential-sum data (rational representation only):
    // W(x) = Re sum coeffs[k] e^{roots[k] x} for x >= 0.
    const std::vector<std::complex<double>>& roots() const { return roots_; }
    const std::vector<std::complex<double>>& coeffs() const { return coeffs_; }

private:
    Eval talbot(double x) const;

    SnModel eff_;  // drift already reduced by alpha_shift
    double q_ = 1.0;
    double phi_ = 0.0;
    double w0_ = 0.0;   // W(0+): 0 for unbounded variation, 1/drift otherwise
    bool rational_ = false;
    std::vector<std::complex<double>> roots_, coeffs_;
    // Fixed-Talbot node count: e^{2M/5} roundoff amplification caps useful M
    // in double precision near 30.
    int talbot_m_ = 32;
};

ScaleFn::Eval scale_w(const SnModel& model, double q, double alpha_shift, double x);

// Roots of a real polynomial (ascending coefficients) via the companion
// matrix; used for the partial-fraction representation.
std::vector<std::complex<double>> poly_roots(std::vector<double> coeffs);

}  // namespace refract
