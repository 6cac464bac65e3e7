#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "refract/levy_model.hpp"
#include "refract/pathsim.hpp"
#include "refract/refraction.hpp"

namespace refract {

struct MonteCarloConfig {
    long n_paths = 10000;
    TimeGrid grid{0.01, 10.0};
    std::uint64_t seed = 0;
    // theta used by the analytic tail certificate; 0 = choose automatically.
    double cert_theta = 0.0;

    void validate() const {
        grid.validate();
        if (n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
    }
};

// Analytic bound on E[int_T^inf e^{-qt}(|f(U_t)| + |beta| l_t) dt] valid for
// every admissible strategy, built from the growth certificate and the
// exponential-moment assumption.
struct TailBound {
    double value = kInf;
    double theta_used = 0.0;
    bool finite = false;
};
TailBound discounted_tail_bound(const ProblemSpec& spec, double x0,
                                const TimeGrid& grid, double theta = 0.0);

struct RhoCurve {
    std::vector<double> b_values;
    std::vector<double> rho_hat;
    std::vector<double> se;
    std::uint64_t seed = 0;
};

struct ThresholdResult {
    double b_star = 0.0;  // may be +-infinity
    bool has_bracket = false;
    double bracket_lo = 0.0, bracket_hi = 0.0;
    int iterations = 0;
    double residual = 0.0;   // |rho_hat(b*) - beta|
    double rho_se = 0.0;     // SE of rho_hat at b*
    double b_se = 0.0;       // delta-method SE of b*
};

struct ValueEstimate {
    double mean = 0.0;
    double se = 0.0;
    double tail_bound = kInf;
    long n_paths = 0;
};

// rho(b) over shared U^0 paths (translation-invariance trick): one
// simulation of the refracted path at 0 started at 0 serves every b.
RhoCurve estimate_rho_curve(const ProblemSpec& spec,
                            const std::vector<double>& b_values,
                            const MonteCarloConfig& mc);

ThresholdResult solve_threshold(const ProblemSpec& spec, const MonteCarloConfig& mc,
                                double tol);

ValueEstimate estimate_value(const ProblemSpec& spec, const Strategy& strategy,
                             double x0, const MonteCarloConfig& mc);

// E_x int e^{-qt} f'(U^b_t) dt; b=+inf means U = x0 + X, b=-inf means
// U = x0 + X^(alpha).
ValueEstimate estimate_value_derivative(const ProblemSpec& spec, double b, double x0,
                                        const MonteCarloConfig& mc);

struct SandwichReport {
    double eps = 0.0;
    double lower = 0.0, mid = 0.0, upper = 0.0;  // CRN sample averages
    double lower_se = 0.0, mid_se = 0.0, upper_se = 0.0;
    // Per-path-average margins of the two inequalities; chain_holds allows
    // the horizon-truncation boundary term |beta| e^{-qT} on each margin.
    double margin_low = 0.0, margin_high = 0.0;
    double margin_low_min = 0.0, margin_high_min = 0.0;  // worst per-path margins
    bool chain_holds = false;
};
SandwichReport sandwich_check(const ProblemSpec& spec, double b_star, double x0,
                              double eps, const MonteCarloConfig& mc);

struct ComparisonRow {
    std::string strategy;
    double x0 = 0.0;
    double mean = 0.0;
    double se = 0.0;
    double diff_vs_ref = 0.0;  // mean of (v_rival - v_ref) per path
    double diff_se = 0.0;
    bool flagged = false;  // rival beats the reference by more than 3 SE
};
struct ComparisonReport {
    std::vector<ComparisonRow> rows;
    bool any_flagged = false;
};
ComparisonReport compare_strategies(const ProblemSpec& spec, double b_star,
                                    const std::vector<double>& x0_grid,
                                    const std::vector<Strategy>& rivals,
                                    const MonteCarloConfig& mc);

}  // namespace refract
