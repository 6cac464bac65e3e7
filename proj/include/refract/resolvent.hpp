#pragma once

#include <functional>
#include <vector>

#include "refract/scale.hpp"

namespace refract {

struct QuadratureConfig {
    double tol = 1e-6;
    double panel = 1.0;   // width of the expansion panels in y
    int max_panels = 400;
};

// Discounted occupation density R^{(q)}(x,y) of the process refracted at b
// (rate alpha above b), built from the scale functions of the spectrally
// negative driver and its drift-changed companion. Inner z-integrals are
// closed-form exponential sums for rational-transform models and adaptive
// quadrature otherwise.
class ResolventKernel {
public:
    ResolventKernel(const SnModel& model, double q, double b, double alpha);

    double q() const { return q_; }
    double b() const { return b_; }
    double alpha() const { return alpha_; }
    double phi_q() const { return phi_; }
    double varphi_q() const { return vphi_; }
    const SnModel& model() const { return model_; }
    const ScaleFn& plain() const { return W_; }
    const ScaleFn& drifted() const { return WW_; }

    double density(double x, double y) const;
    double density_dx(double x, double y) const;

private:
    double tail_integral(double y) const;          // int_b^inf e^{-vphi z} W'(z-y) dz
    double up_factor(double x, bool deriv) const;  // first factor and its d/dx
    double convolution(double x, double y, bool deriv) const;
    double density_low(double x, double y, bool deriv) const;

    SnModel model_;
    double q_ = 1.0, b_ = 0.0, alpha_ = 1.0;
    double phi_ = 0.0, vphi_ = 0.0;
    double K_ = 0.0;  // (vphi - phi)/(alpha phi) * e^{vphi b}
    ScaleFn W_, WW_;
    bool rational_ = false;
    std::size_t phi_root_ = 0;  // index of the Phi(q) root among W_'s roots
};

double resolvent_density(const ResolventKernel& kernel, double x, double y);
double resolvent_density_dx(const ResolventKernel& kernel, double x, double y);

// int g(y) R^{(q)}(x,y) dy with panel-wise adaptive quadrature and domain
// expansion until the marginal panel contribution falls below tol/100.
double resolvent_apply(const ResolventKernel& kernel,
                       const std::function<double(double)>& g, double x,
                       const QuadratureConfig& quad = {});

// d/dx of the above via the kernel's x-derivative (x != b).
double resolvent_apply_dx(const ResolventKernel& kernel,
                          const std::function<double(double)>& g, double x,
                          const QuadratureConfig& quad = {});

struct FixedPointConfig {
    int max_iters = 100;
    double tol = 1e-8;
    // Working grid [b - span, b + span]. The scale-function form of the
    // density loses relative accuracy like e^{(varphi-phi)(x-b)} eps for x
    // far above b, so the span stays inside the well-conditioned range; the
    // clamped continuation beyond it is damped by e^{-phi span}.
    double span = 8.0;
    int n_nodes = 81;
    QuadratureConfig quad{};
};

struct FixedPointReport {
    int iterations = 0;
    double final_update = kInf;
    double worst_ratio = 0.0;  // max observed ratio of successive updates
    double contraction = 0.0;  // Pi(0,inf)/(q + Pi(0,inf))
    bool converged = false;
};

// v'_{b}(x): directly resolvent_apply(f', x) for spectrally negative models;
// with upward jumps, solves the Markov-decomposition fixed point by Picard
// iteration on a working grid with qhat = q + Pi(0,inf).
double semi_analytic_v_prime(const ResolventKernel& kernel, const CostSpec& cost,
                             double x, const FixedPointConfig& fp = {},
                             const JumpSpec* up_jumps = nullptr,
                             FixedPointReport* report = nullptr);

}  // namespace refract
