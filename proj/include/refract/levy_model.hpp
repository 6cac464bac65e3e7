#pragma once

#include <complex>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace refract {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class JumpSide { up, down };
enum class JumpKind { exponential, point_mass };

// One parametric component of the jump measure. Exponential terms have
// density rate * decay * exp(-decay*|z|) on their side; point masses put
// mass `rate` at the signed size.
struct JumpTerm {
    JumpSide side = JumpSide::up;
    double rate = 0.0;
    JumpKind kind = JumpKind::point_mass;
    double decay = 0.0;  // exponential only, > 0
    double size = 0.0;   // point_mass only, != 0 (magnitude; sign from side)

    void validate() const;
    // Signed jump value support sign.
    double sign() const { return side == JumpSide::up ? 1.0 : -1.0; }
};

struct JumpSpec {
    std::vector<JumpTerm> terms;

    void validate() const;
    double total_rate() const;
    // integral of z over (-1,1)\{0} against the measure (compensation mass).
    double small_jump_mean() const;
    // Total rate on one side.
    double side_rate(JumpSide s) const;
    // Largest theta with finite exp(theta|z|) moment on big jumps
    // (= min decay among exponential terms of the given side; +inf if none).
    double moment_bound(JumpSide s) const;
    bool has_exponential() const;
    // E[exp(theta * z_total_per_unit_time)] log-rate: sum rate*(MGF(term)-1),
    // finite only for theta inside the decay bounds. Throws otherwise.
    double mgf_exponent(double theta) const;
};

// Levy triplet under the |z|<1 compensation convention, finite activity.
struct LevyModel {
    double gamma = 0.0;
    double sigma = 0.0;
    JumpSpec jumps;

    void validate() const;
    bool bounded_variation() const { return sigma == 0.0; }
    // Drift once all (finite-activity) jumps are carried uncompensated:
    // gamma - int_{(-1,1)} z Pi(dz). For bounded variation this is delta.
    double natural_drift() const { return gamma - jumps.small_jump_mean(); }
};

struct PathClass {
    bool bounded_variation = false;
    double delta = 0.0;  // meaningful only when bounded_variation
};

enum class CaseTag { case1, case2 };

std::complex<double> characteristic_exponent(const LevyModel& model, double lam);
std::pair<PathClass, CaseTag> classify(const LevyModel& model, double alpha);

// Running cost: continuously differentiable convex f with a polynomial
// growth certificate and declared derivative limits at +-infinity.
struct CostSpec {
    enum class Kind { linear, quadratic, custom };
    Kind kind = Kind::quadratic;
    // quadratic: a x^2 + b x + c; linear: b x + c.
    double a = 1.0, b = 0.0, c = 0.0;
    std::function<double(double)> f_custom, fp_custom;

    double k1 = 1.0, k2 = 1.0;
    int N = 2;
    double fp_neg_inf = -kInf;
    double fp_pos_inf = kInf;

    double f(double x) const {
        switch (kind) {
            case Kind::linear: return b * x + c;
            case Kind::quadratic: return (a * x + b) * x + c;
            default: return f_custom(x);
        }
    }
    double fp(double x) const {
        switch (kind) {
            case Kind::linear: return b;
            case Kind::quadratic: return 2.0 * a * x + b;
            default: return fp_custom(x);
        }
    }

    static CostSpec quadratic(double a, double b = 0.0, double c = 0.0);
    static CostSpec linear(double slope, double intercept = 0.0);
    static CostSpec custom(std::function<double(double)> f,
                           std::function<double(double)> fp, double k1, double k2,
                           int N, double fp_lo, double fp_hi);
};

struct ProblemSpec {
    LevyModel model;
    CostSpec cost;
    double q = 1.0;      // discount rate, > 0
    double beta = 0.0;   // unit control cost
    double alpha = 1.0;  // maximum control rate, > 0

    void validate() const;
    PathClass path_class() const { return classify(model, alpha).first; }
    CaseTag case_tag() const { return classify(model, alpha).second; }
};

struct AssumptionReport {
    bool pass = true;
    std::vector<std::string> violations;
    void fail(std::string what) {
        pass = false;
        violations.push_back(std::move(what));
    }
};

// Checks the exponential-moment condition at theta_bar and the CostSpec
// invariants (convexity, growth, fundamental theorem of calculus) sampled
// on the given sorted grid.
AssumptionReport check_assumptions(const ProblemSpec& spec, double theta_bar,
                                   std::span<const double> grid);

}  // namespace refract
