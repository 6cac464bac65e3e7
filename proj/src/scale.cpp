#include "refract/scale.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace refract {

void SnModel::validate() const {
    if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
    down_jumps.validate();
    for (const auto& t : down_jumps.terms)
        if (t.side != JumpSide::down)
            throw std::invalid_argument("SnModel admits only downward jumps");
}

bool SnModel::rational_transform() const {
    for (const auto& t : down_jumps.terms)
        if (t.kind == JumpKind::point_mass) return false;
    return true;
}

double laplace_exponent(const SnModel& model, double theta) {
    double psi = model.drift * theta + 0.5 * model.sigma * model.sigma * theta * theta;
    for (const auto& t : model.down_jumps.terms) {
        if (t.kind == JumpKind::exponential)
            psi += t.rate * (t.decay / (t.decay + theta) - 1.0);
        else
            psi += t.rate * (std::exp(-theta * std::abs(t.size)) - 1.0);
    }
    return psi;
}

double laplace_exponent_dtheta(const SnModel& model, double theta) {
    double d = model.drift + model.sigma * model.sigma * theta;
    for (const auto& t : model.down_jumps.terms) {
        if (t.kind == JumpKind::exponential) {
            const double s = t.decay + theta;
            d -= t.rate * t.decay / (s * s);
        } else {
            const double a = std::abs(t.size);
            d -= t.rate * a * std::exp(-theta * a);
        }
    }
    return d;
}

std::complex<double> laplace_exponent(const SnModel& model, std::complex<double> theta) {
    std::complex<double> psi =
        model.drift * theta + 0.5 * model.sigma * model.sigma * theta * theta;
    for (const auto& t : model.down_jumps.terms) {
        if (t.kind == JumpKind::exponential)
            psi += t.rate * (t.decay / (t.decay + theta) - 1.0);
        else
            psi += t.rate * (std::exp(-theta * std::abs(t.size)) - 1.0);
    }
    return psi;
}

double right_inverse(const SnModel& model, double q, double alpha_shift) {
    model.validate();
    if (!(q > 0.0)) throw std::invalid_argument("q must be > 0");
    const double d_eff = model.drift - alpha_shift;
    if (model.sigma == 0.0 && d_eff <= 0.0)
        throw std::runtime_error("right inverse does not exist: psi bounded above");

    auto g = [&](double th) { return laplace_exponent(model, th) - alpha_shift * th - q; };
    auto gp = [&](double th) { return laplace_exponent_dtheta(model, th) - alpha_shift; };

    double lo = 0.0;  // g(0) = -q < 0
    double hi = std::max(1.0, q);
    int iters = 0;
    while (g(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++iters > 200) throw std::runtime_error("right_inverse: bracketing failed");
    }
    double th = hi;
    const double tol = 1e-12 * std::max(1.0, q);
    for (int it = 0; it < 200; ++it) {
        const double val = g(th);
        if (std::abs(val) <= tol) return th;
        if (val > 0.0)
            hi = th;
        else
            lo = th;
        const double der = gp(th);
        double next = der != 0.0 ? th - val / der : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        th = next;
    }
    if (std::abs(g(th)) <= tol) return th;
    throw std::runtime_error("right_inverse: no convergence");
}

namespace {

std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> c(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
    return c;
}

std::vector<double> poly_add(std::vector<double> a, const std::vector<double>& b) {
    if (b.size() > a.size()) a.resize(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
    return a;
}

std::vector<double> poly_der(const std::vector<double>& a) {
    if (a.size() <= 1) return {0.0};
    std::vector<double> d(a.size() - 1);
    for (std::size_t i = 1; i < a.size(); ++i) d[i - 1] = a[i] * static_cast<double>(i);
    return d;
}

std::complex<double> poly_eval(const std::vector<double>& a, std::complex<double> z) {
    std::complex<double> v = 0.0;
    for (auto it = a.rbegin(); it != a.rend(); ++it) v = v * z + *it;
    return v;
}

}  // namespace

std::vector<std::complex<double>> poly_roots(std::vector<double> coeffs) {
    double maxc = 0.0;
    for (double c : coeffs) maxc = std::max(maxc, std::abs(c));
    if (maxc == 0.0) throw std::invalid_argument("zero polynomial");
    while (coeffs.size() > 1 && std::abs(coeffs.back()) < 1e-14 * maxc)
        coeffs.pop_back();
    const auto n = static_cast<Eigen::Index>(coeffs.size()) - 1;
    if (n < 1) return {};
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    for (Eigen::Index i = 0; i < n; ++i)
        comp(i, n - 1) = -coeffs[static_cast<std::size_t>(i)] / coeffs.back();
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, /*computeEigenvectors=*/false);
    std::vector<std::complex<double>> roots(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) roots[static_cast<std::size_t>(i)] =
        es.eigenvalues()(i);
    return roots;
}

ScaleFn::ScaleFn(const SnModel& model, double q, double alpha_shift, bool force_numeric)
    : eff_(model), q_(q) {
    model.validate();
    if (!(q > 0.0)) throw std::invalid_argument("q must be > 0");
    if (!(alpha_shift >= 0.0)) throw std::invalid_argument("alpha_shift must be >= 0");
    eff_.drift -= alpha_shift;
    phi_ = right_inverse(eff_, q, 0.0);
    w0_ = eff_.sigma > 0.0 ? 0.0 : 1.0 / eff_.drift;

    if (eff_.rational_transform() && !force_numeric) {
        // Clear the exponential denominators: 1/(psi-q) = Q(th)/P(th) with
        // Q = prod (th + eta_i),
        // P = (s^2/2 th^2 + d th - (q+Lam)) Q + sum_i lam_i eta_i Q/(th+eta_i).
        std::vector<double> etas, rates;
        double lam_sum = 0.0;
        for (const auto& t : eff_.down_jumps.terms) {
            etas.push_back(t.decay);
            rates.push_back(t.rate);
            lam_sum += t.rate;
        }
        std::vector<double> Q{1.0};
        for (double e : etas) Q = poly_mul(Q, {e, 1.0});
        std::vector<double> base{-(q + lam_sum), eff_.drift,
                                 0.5 * eff_.sigma * eff_.sigma};
        while (base.size() > 1 && base.back() == 0.0) base.pop_back();
        std::vector<double> P = poly_mul(base, Q);
        for (std::size_t i = 0; i < etas.size(); ++i) {
            std::vector<double> part{rates[i] * etas[i]};
            for (std::size_t j = 0; j < etas.size(); ++j)
                if (j != i) part = poly_mul(part, {etas[j], 1.0});
            P = poly_add(std::move(P), part);
        }

        auto roots = poly_roots(P);
        const auto Pd = poly_der(P);
        // Polish with a few complex Newton steps.
        for (auto& z : roots)
            for (int it = 0; it < 3; ++it) {
                const auto pv = poly_eval(P, z);
                const auto dv = poly_eval(Pd, z);
                if (std::abs(dv) == 0.0) break;
                z -= pv / dv;
            }
        // Near-repeated roots: the simple-pole expansion degrades; fall back
        // to numerical inversion.
        bool separated = true;
        for (std::size_t i = 0; i < roots.size() && separated; ++i)
            for (std::size_t j = i + 1; j < roots.size(); ++j)
                if (std::abs(roots[i] - roots[j]) <
                    1e-6 * (1.0 + std::abs(roots[i]))) {
                    separated = false;
                    break;
                }
        if (separated) {
            rational_ = true;
            roots_ = std::move(roots);
            coeffs_.resize(roots_.size());
            for (std::size_t k = 0; k < roots_.size(); ++k)
                coeffs_[k] = poly_eval(Q, roots_[k]) / poly_eval(Pd, roots_[k]);
        }
    }
}

ScaleFn::Eval ScaleFn::operator()(double x) const {
    Eval e;
    if (x < 0.0) return e;
    if (rational_) {
        std::complex<double> v = 0.0, d = 0.0;
        for (std::size_t k = 0; k < roots_.size(); ++k) {
            const auto t = coeffs_[k] * std::exp(roots_[k] * x);
            v += t;
            d += roots_[k] * t;
        }
        e.value = v.real();
        e.derivative = d.real();
        return e;
    }
    if (x == 0.0) {
        e.value = w0_;
        e.derivative = talbot(1e-8).derivative;
        return e;
    }
    return talbot(x);
}

// Fixed-Talbot inversion of the Phi(q)-tilted transforms of W and W', so all
// singularities sit in Re(s) <= 0 and the recovered functions are bounded.
ScaleFn::Eval ScaleFn::talbot(double x) const {
    const int M = talbot_m_;
    const double r = 2.0 * M / (5.0 * x);
    auto FW = [&](std::complex<double> s) {
        return 1.0 / (laplace_exponent(eff_, s + phi_) - q_);
    };
    auto FD = [&](std::complex<double> s) {
        return (s + phi_) / (laplace_exponent(eff_, s + phi_) - q_) - w0_;
    };
    double sv = 0.5 * (FW(r) * std::exp(r * x)).real();
    double sd = 0.5 * (FD(r) * std::exp(r * x)).real();
    for (int k = 1; k < M; ++k) {
        const double th = k * M_PI / M;
        const double ct = std::cos(th) / std::sin(th);
        const std::complex<double> s(r * th * ct, r * th);
        const double sig = th + (th * ct - 1.0) * ct;
        const std::complex<double> w =
            std::exp(s * x) * std::complex<double>(1.0, sig);
        sv += (FW(s) * w).real();
        sd += (FD(s) * w).real();
    }
    const double tilt = std::exp(phi_ * x);
    Eval e;
    e.value = tilt * sv * r / M;
    e.derivative = tilt * sd * r / M;
    return e;
}

ScaleFn::Eval scale_w(const SnModel& model, double q, double alpha_shift, double x) {
    return ScaleFn(model, q, alpha_shift)(x);
}

}  // namespace refract
