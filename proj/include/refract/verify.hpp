#pragma once

#include <functional>
#include <string>
#include <vector>

#include "refract/levy_model.hpp"

namespace refract {

using RealFn = std::function<double(double)>;

struct GeneratorQuadrature {
    double h = 1e-4;    // stencil spacing when derivatives are not supplied
    double tol = 1e-9;  // jump-integral quadrature tolerance
    double tail = 40.0; // exponential-term truncation: z up to tail/decay
};

// L g(x) = gamma g'(x) + sigma^2/2 g''(x)
//        + int (g(x+z) - g(x) - g'(x) z 1_{|z|<1}) Pi(dz).
// Point masses are exact; exponential terms use adaptive quadrature with the
// exact compensation moment. When g1 is empty both derivatives come from
// central stencils (exact to rounding for polynomials of degree <= 3);
// otherwise g2 is required whenever sigma > 0.
double generator_apply(const LevyModel& model, const RealFn& g, const RealFn& g1,
                       const RealFn& g2, double x,
                       const GeneratorQuadrature& quad = {});

struct ResidualReport {
    std::vector<double> grid;
    std::vector<double> residuals;
    std::vector<int> branch;          // 0: below b*, 1: at/above (martingale)
    std::vector<double> minimizer_r;  // HJB only: chosen rate in {0, alpha}
    double max_abs = 0.0;             // worst violation magnitude
    double tolerance = 0.0;
    bool pass = false;
};

// (L-q)v + f on grid points < b*, (L-q)v + alpha(beta - v') + f at/above.
ResidualReport check_martingale_identities(const ProblemSpec& spec, double b_star,
                                           const RealFn& v, const RealFn& v1,
                                           const RealFn& v2,
                                           const std::vector<double>& grid, double tol,
                                           const GeneratorQuadrature& quad = {});

// (L-q)w + min(0, alpha(beta - w')) + f >= -tol on the grid; the infimum
// over rates r in [0, alpha] is attained at r in {0, alpha}, ties to 0.
ResidualReport check_hjb_inequality(const ProblemSpec& spec, const RealFn& w,
                                    const RealFn& w1, const RealFn& w2,
                                    const std::vector<double>& grid, double tol,
                                    const GeneratorQuadrature& quad = {});

}  // namespace refract
