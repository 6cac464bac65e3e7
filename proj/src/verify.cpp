#include "refract/verify.hpp"

#include <cmath>

#include "refract/numeric.hpp"

namespace refract {

double generator_apply(const LevyModel& model, const RealFn& g, const RealFn& g1,
                       const RealFn& g2, double x, const GeneratorQuadrature& quad) {
    model.validate();
    double d1, d2 = 0.0;
    if (!g1) {
        const double h = quad.h;
        const double gp = g(x + h), gm = g(x - h);
        d1 = (gp - gm) / (2.0 * h);
        d2 = (gp - 2.0 * g(x) + gm) / (h * h);
    } else {
        d1 = g1(x);
        if (model.sigma > 0.0) {
            if (!g2) throw std::invalid_argument("g2 required when sigma > 0");
            d2 = g2(x);
        }
    }

    double out = model.gamma * d1 + 0.5 * model.sigma * model.sigma * d2;
    const double gx = g(x);
    for (const auto& t : model.jumps.terms) {
        const double sgn = t.sign();
        if (t.kind == JumpKind::point_mass) {
            const double z = sgn * t.size;
            out += t.rate * (g(x + z) - gx - (std::abs(z) < 1.0 ? d1 * z : 0.0));
        } else {
            // rate * [ int_0^inf g(x + sgn*z) eta e^{-eta z} dz - g(x)
            //          - d1 * sgn * (1 - e^{-eta}(1+eta))/eta ].
            const double eta = t.decay;
            const double zmax = quad.tail / eta;
            auto integrand = [&](double z) {
                return g(x + sgn * z) * eta * std::exp(-eta * z);
            };
            const double gi = adaptive_simpson(integrand, 0.0, zmax, quad.tol);
            const double m1 = (1.0 - std::exp(-eta) * (1.0 + eta)) / eta;
            out += t.rate * (gi - gx - d1 * sgn * m1);
        }
    }
    return out;
}

ResidualReport check_martingale_identities(const ProblemSpec& spec, double b_star,
                                           const RealFn& v, const RealFn& v1,
                                           const RealFn& v2,
                                           const std::vector<double>& grid, double tol,
                                           const GeneratorQuadrature& quad) {
    spec.validate();
    if (!std::isfinite(b_star)) throw std::invalid_argument("b_star must be finite");
    ResidualReport rep;
    rep.tolerance = tol;
    for (double x : grid) {
        const double lv = generator_apply(spec.model, v, v1, v2, x, quad);
        double r = lv - spec.q * v(x) + spec.cost.f(x);
        const bool above = x >= b_star;
        if (above) r += spec.alpha * (spec.beta - v1(x));
        rep.grid.push_back(x);
        rep.residuals.push_back(r);
        rep.branch.push_back(above ? 1 : 0);
        rep.max_abs = std::max(rep.max_abs, std::abs(r));
    }
    rep.pass = rep.max_abs <= tol;
    return rep;
}

ResidualReport check_hjb_inequality(const ProblemSpec& spec, const RealFn& w,
                                    const RealFn& w1, const RealFn& w2,
                                    const std::vector<double>& grid, double tol,
                                    const GeneratorQuadrature& quad) {
    spec.validate();
    ResidualReport rep;
    rep.tolerance = tol;
    for (double x : grid) {
        const double lw = generator_apply(spec.model, w, w1, w2, x, quad);
        const double slack = spec.beta - w1(x);
        const double r_opt = slack >= 0.0 ? 0.0 : spec.alpha;
        const double r = lw - spec.q * w(x) + r_opt * slack + spec.cost.f(x);
        rep.grid.push_back(x);
        rep.residuals.push_back(r);
        rep.minimizer_r.push_back(r_opt);
        if (r < 0.0) rep.max_abs = std::max(rep.max_abs, -r);
    }
    rep.pass = rep.max_abs <= tol;
    return rep;
}

}  // namespace refract
