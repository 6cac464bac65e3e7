#include "refract/levy_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace refract {

void JumpTerm::validate() const {
    // rate 0 is a degenerate no-op term; allowed so adding one never changes
    // classification or simulation.
    if (!(rate >= 0.0)) throw std::invalid_argument("jump term rate must be >= 0");
    if (kind == JumpKind::exponential) {
        if (!(decay > 0.0)) throw std::invalid_argument("exponential decay must be > 0");
    } else {
        if (size == 0.0) throw std::invalid_argument("point mass size must be nonzero");
        if (size < 0.0) throw std::invalid_argument("point mass size is a magnitude; use side=down");
    }
}

void JumpSpec::validate() const {
    for (const auto& t : terms) t.validate();
}

double JumpSpec::total_rate() const {
    double r = 0.0;
    for (const auto& t : terms) r += t.rate;
    return r;
}

double JumpSpec::side_rate(JumpSide s) const {
    double r = 0.0;
    for (const auto& t : terms)
        if (t.side == s) r += t.rate;
    return r;
}

namespace {
// int_0^1 z * decay * exp(-decay z) dz, the small-jump first moment of a
// unit-rate exponential term.
double exp_small_mean(double eta) {
    return (1.0 - std::exp(-eta) * (1.0 + eta)) / eta;
}
}  // namespace

double JumpSpec::small_jump_mean() const {
    double m = 0.0;
    for (const auto& t : terms) {
        double contrib = 0.0;
        if (t.kind == JumpKind::exponential) {
            contrib = t.rate * exp_small_mean(t.decay);
        } else if (std::abs(t.size) < 1.0) {
            contrib = t.rate * t.size;
        }
        m += t.sign() * contrib;
    }
    return m;
}

double JumpSpec::moment_bound(JumpSide s) const {
    double bound = kInf;
    for (const auto& t : terms)
        if (t.side == s && t.kind == JumpKind::exponential)
            bound = std::min(bound, t.decay);
    return bound;
}

bool JumpSpec::has_exponential() const {
    return std::any_of(terms.begin(), terms.end(), [](const JumpTerm& t) {
        return t.kind == JumpKind::exponential;
    });
}

double JumpSpec::mgf_exponent(double theta) const {
    double e = 0.0;
    for (const auto& t : terms) {
        const double th = t.sign() * theta;  // exponent applied to signed jumps
        if (t.kind == JumpKind::point_mass) {
            e += t.rate * std::expm1(th * t.size);
        } else {
            if (th >= t.decay)
                throw std::domain_error("mgf_exponent: theta outside exponential moment range");
            e += t.rate * (t.decay / (t.decay - th) - 1.0);
        }
    }
    return e;
}

void LevyModel::validate() const {
    if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
    if (!std::isfinite(gamma)) throw std::invalid_argument("gamma must be finite");
    jumps.validate();
}

std::complex<double> characteristic_exponent(const LevyModel& model, double lam) {
    const std::complex<double> i(0.0, 1.0);
    std::complex<double> psi = -i * model.gamma * lam + 0.5 * model.sigma * model.sigma * lam * lam;
    for (const auto& t : model.jumps.terms) {
        const double s = t.sign();
        if (t.kind == JumpKind::point_mass) {
            const double z = s * t.size;
            std::complex<double> term = 1.0 - std::exp(i * lam * z);
            if (std::abs(z) < 1.0) term += i * lam * z;
            psi += t.rate * term;
        } else {
            const double eta = t.decay;
            // density eta*exp(-eta u) du on u>0, jump value z = s*u.
            const std::complex<double> lap = eta / (eta - i * lam * s);
            std::complex<double> term = 1.0 - lap;
            term += i * lam * s * (1.0 - std::exp(-eta) * (1.0 + eta)) / eta;
            psi += t.rate * term;
        }
    }
    return psi;
}

std::pair<PathClass, CaseTag> classify(const LevyModel& model, double alpha) {
    model.validate();
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
    PathClass pc;
    pc.bounded_variation = model.bounded_variation();
    if (pc.bounded_variation) pc.delta = model.natural_drift();
    const bool case2 =
        pc.bounded_variation && pc.delta >= 0.0 && pc.delta <= alpha;
    return {pc, case2 ? CaseTag::case2 : CaseTag::case1};
}

CostSpec CostSpec::quadratic(double a, double b, double c) {
    if (a < 0.0) throw std::invalid_argument("quadratic cost needs a >= 0");
    CostSpec s;
    s.kind = Kind::quadratic;
    s.a = a;
    s.b = b;
    s.c = c;
    s.k1 = std::abs(c) + 1.0;
    s.k2 = a + std::abs(b) + 1.0;
    s.N = 2;
    if (a > 0.0) {
        s.fp_neg_inf = -kInf;
        s.fp_pos_inf = kInf;
    } else {
        s.fp_neg_inf = s.fp_pos_inf = b;
    }
    return s;
}

CostSpec CostSpec::linear(double slope, double intercept) {
    CostSpec s;
    s.kind = Kind::linear;
    s.a = 0.0;
    s.b = slope;
    s.c = intercept;
    s.k1 = std::abs(intercept) + 1.0;
    s.k2 = std::abs(slope) + 1.0;
    s.N = 1;
    s.fp_neg_inf = s.fp_pos_inf = slope;
    return s;
}

CostSpec CostSpec::custom(std::function<double(double)> f,
                          std::function<double(double)> fp, double k1, double k2,
                          int N, double fp_lo, double fp_hi) {
    CostSpec s;
    s.kind = Kind::custom;
    s.f_custom = std::move(f);
    s.fp_custom = std::move(fp);
    s.k1 = k1;
    s.k2 = k2;
    s.N = N;
    s.fp_neg_inf = fp_lo;
    s.fp_pos_inf = fp_hi;
    return s;
}

void ProblemSpec::validate() const {
    model.validate();
    if (!(q > 0.0)) throw std::invalid_argument("q must be > 0");
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
    if (!std::isfinite(beta)) throw std::invalid_argument("beta must be finite");
}

AssumptionReport check_assumptions(const ProblemSpec& spec, double theta_bar,
                                   std::span<const double> grid) {
    if (grid.empty()) throw std::invalid_argument("check_assumptions: empty grid");
    AssumptionReport rep;
    spec.validate();

    if (!(theta_bar > 0.0)) rep.fail("theta_bar must be > 0");
    const double up = spec.model.jumps.moment_bound(JumpSide::up);
    const double dn = spec.model.jumps.moment_bound(JumpSide::down);
    if (theta_bar >= up || theta_bar >= dn) {
        std::ostringstream os;
        os << "exponential moment divergent: theta_bar=" << theta_bar
           << " >= min decay " << std::min(up, dn);
        rep.fail(os.str());
    }

    const CostSpec& c = spec.cost;
    constexpr double kMonoTol = 1e-10;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        if (!(grid[i] < grid[i + 1]))
            throw std::invalid_argument("check_assumptions: grid must be sorted");
        if (c.fp(grid[i + 1]) < c.fp(grid[i]) - kMonoTol) {
            std::ostringstream os;
            os << "convexity violated: f' decreasing at x=" << grid[i];
            rep.fail(os.str());
        }
    }
    for (double x : grid) {
        const double bound = c.k1 + c.k2 * std::pow(std::abs(x), c.N);
        if (std::abs(c.f(x)) > bound) {
            std::ostringstream os;
            os << "growth certificate violated at x=" << x << ": |f|=" << std::abs(c.f(x))
               << " > " << bound;
            rep.fail(os.str());
        }
    }
    // f(x) + int_x^y f' = f(y) on adjacent grid pairs, Simpson quadrature.
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double x = grid[i], y = grid[i + 1];
        const int n = 64;
        const double h = (y - x) / n;
        double integral = c.fp(x) + c.fp(y);
        for (int k = 1; k < n; ++k) integral += (k % 2 ? 4.0 : 2.0) * c.fp(x + k * h);
        integral *= h / 3.0;
        const double lhs = c.f(x) + integral;
        const double scale = std::max({1.0, std::abs(c.f(x)), std::abs(c.f(y))});
        if (std::abs(lhs - c.f(y)) > 1e-6 * scale) {
            std::ostringstream os;
            os << "f' is not the derivative of f on [" << x << "," << y << "]";
            rep.fail(os.str());
        }
    }
    return rep;
}

}  // namespace refract
