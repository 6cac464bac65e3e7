#include "refract/resolvent.hpp"

#include <algorithm>
#include <cmath>

#include "refract/numeric.hpp"

namespace refract {

ResolventKernel::ResolventKernel(const SnModel& model, double q, double b,
                                 double alpha)
    : model_(model), q_(q), b_(b), alpha_(alpha) {
    model.validate();
    if (!(q > 0.0)) throw std::invalid_argument("q must be > 0");
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
    if (!std::isfinite(b)) throw std::invalid_argument("b must be finite");
    phi_ = right_inverse(model, q, 0.0);
    vphi_ = right_inverse(model, q, alpha);
    K_ = (vphi_ - phi_) / (alpha * phi_) * std::exp(vphi_ * b);
    W_ = ScaleFn(model, q, 0.0);
    WW_ = ScaleFn(model, q, alpha);
    rational_ = W_.rational() && WW_.rational();
    if (rational_) {
        double best = kInf;
        for (std::size_t l = 0; l < W_.roots().size(); ++l) {
            const double d = std::abs(W_.roots()[l] - std::complex<double>(phi_));
            if (d < best) {
                best = d;
                phi_root_ = l;
            }
        }
    }
}

// int_b^inf e^{-vphi z} W'(z-y) dz; the integrand vanishes below z = y.
double ResolventKernel::tail_integral(double y) const {
    const double a0 = std::max(b_, y);
    if (rational_) {
        std::complex<double> s = 0.0;
        for (std::size_t l = 0; l < W_.roots().size(); ++l) {
            const auto z = W_.roots()[l];
            s += W_.coeffs()[l] * z * std::exp(z * (a0 - y) - vphi_ * a0) /
                 (vphi_ - z);
        }
        return s.real();
    }
    // e^{-vphi y} int_{a0-y}^{Z} e^{-vphi w} W'(w) dw, truncated where the
    // e^{-(vphi-phi) w} envelope is negligible.
    const double w_lo = a0 - y;
    const double w_hi = w_lo + 40.0 / (vphi_ - phi_);
    auto f = [&](double w) { return std::exp(-vphi_ * (w + y)) * W_(w).derivative; };
    const double scale = std::abs(f(w_lo)) + std::abs(f(0.5 * (w_lo + w_hi))) + 1e-300;
    return adaptive_simpson(f, w_lo, w_hi, 1e-11 * scale * (w_hi - w_lo));
}

// e^{phi(x-b)} + alpha phi e^{-phi b} int_b^x e^{phi z} WW(x-z) dz (or its
// x-derivative, using WW(0) = 0 for unbounded variation).
double ResolventKernel::up_factor(double x, bool deriv) const {
    const double base = std::exp(phi_ * (x - b_));
    if (x <= b_) return deriv ? phi_ * base : base;
    if (rational_) {
        std::complex<double> s = 0.0;
        for (std::size_t k = 0; k < WW_.roots().size(); ++k) {
            const auto z = WW_.roots()[k];
            const auto c = deriv ? WW_.coeffs()[k] * z : WW_.coeffs()[k];
            s += c * expdiff(z - phi_, 0.0, x - b_);
        }
        return deriv ? phi_ * base * (1.0 + alpha_ * s.real())
                     : base * (1.0 + alpha_ * phi_ * s.real());
    }
    auto f = [&](double w) {
        const auto e = WW_(w);
        return std::exp(-phi_ * w) * (deriv ? e.derivative : e.value);
    };
    const double integral = adaptive_simpson(f, 0.0, x - b_, 1e-11 * (1.0 + x - b_));
    return deriv ? phi_ * base + alpha_ * phi_ * base * integral
                 : base * (1.0 + alpha_ * phi_ * integral);
}

// int_{max(b,y)}^x WW^{(')}(x-z) W'(z-y) dz for x > b, zero otherwise.
double ResolventKernel::convolution(double x, double y, bool deriv) const {
    if (!(x > b_)) return 0.0;
    const double lo = std::max(b_, y);
    if (!(x > lo)) return 0.0;
    const double L = x - lo;
    if (rational_) {
        std::complex<double> s = 0.0;
        for (std::size_t k = 0; k < WW_.roots().size(); ++k) {
            const auto Zk = WW_.roots()[k];
            const auto Ck = deriv ? WW_.coeffs()[k] * Zk : WW_.coeffs()[k];
            for (std::size_t l = 0; l < W_.roots().size(); ++l) {
                const auto zl = W_.roots()[l];
                const auto cl = W_.coeffs()[l] * zl;
                s += Ck * cl * std::exp(Zk * L + zl * (lo - y)) * L *
                     phi1((zl - Zk) * L);
            }
        }
        return s.real();
    }
    auto f = [&](double z) {
        const auto e = WW_(x - z);
        return (deriv ? e.derivative : e.value) * W_(z - y).derivative;
    };
    const double mid = std::abs(f(0.5 * (lo + x)));
    return adaptive_simpson(f, lo, x, 1e-11 * (1.0 + mid) * L);
}

// For y <= min(b, x) the density is an exponential sum sum_l E_l(x) e^{-z_l y}
// over the roots of psi - q. The coefficient of the Phi(q) root (the only one
// growing as y -> -inf) vanishes identically -- that is what makes the total
// mass finite -- so it is dropped analytically, avoiding the catastrophic
// cancellation of the three-term formula deep in the left tail.
double ResolventKernel::density_low(double x, double y, bool deriv) const {
    const double fa = up_factor(x, deriv) * K_;
    const double L = x - b_;
    std::complex<double> total = 0.0;
    for (std::size_t l = 0; l < W_.roots().size(); ++l) {
        if (l == phi_root_) continue;
        const auto z = W_.roots()[l];
        const auto cz = W_.coeffs()[l] * z;
        std::complex<double> E =
            fa * cz * std::exp((z - vphi_) * b_) / (vphi_ - z) -
            (deriv ? cz : W_.coeffs()[l]) * std::exp(z * x);
        if (x > b_) {
            for (std::size_t k = 0; k < WW_.roots().size(); ++k) {
                const auto Zk = WW_.roots()[k];
                const auto Ck = deriv ? WW_.coeffs()[k] * Zk : WW_.coeffs()[k];
                E -= alpha_ * Ck * cz * std::exp(Zk * L + z * b_) * L *
                     phi1((z - Zk) * L);
            }
        }
        total += E * std::exp(-z * y);
    }
    return total.real();
}

double ResolventKernel::density(double x, double y) const {
    if (rational_ && y <= std::min(b_, x)) return density_low(x, y, false);
    return up_factor(x, false) * K_ * tail_integral(y) -
           (W_(x - y).value + alpha_ * convolution(x, y, false));
}

double ResolventKernel::density_dx(double x, double y) const {
    if (rational_ && y <= std::min(b_, x)) return density_low(x, y, true);
    return up_factor(x, true) * K_ * tail_integral(y) -
           (W_(x - y).derivative + alpha_ * convolution(x, y, true));
}

double resolvent_density(const ResolventKernel& kernel, double x, double y) {
    return kernel.density(x, y);
}

double resolvent_density_dx(const ResolventKernel& kernel, double x, double y) {
    return kernel.density_dx(x, y);
}

namespace {

// Integrates h over [lo, hi], splitting at the kink points of the density.
double integrate_panel(const std::function<double(double)>& h, double lo, double hi,
                       std::initializer_list<double> kinks, double tol) {
    std::vector<double> pts{lo, hi};
    for (double k : kinks)
        if (k > lo && k < hi) pts.push_back(k);
    std::sort(pts.begin(), pts.end());
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        s += adaptive_simpson(h, pts[i], pts[i + 1], tol);
    return s;
}

}  // namespace

namespace {

double apply_impl(const ResolventKernel& kernel,
                  const std::function<double(double)>& g, double x,
                  const QuadratureConfig& quad, bool deriv) {
    auto h = [&](double y) {
        return g(y) * (deriv ? kernel.density_dx(x, y) : kernel.density(x, y));
    };
    const double b = kernel.b();
    const double tol_panel = quad.tol / 100.0;
    const double cut = quad.tol / 100.0;

    double lo = std::min(x, b) - 2.0 * quad.panel;
    double hi = std::max(x, b) + 2.0 * quad.panel;
    double total = integrate_panel(h, lo, hi, {x, b}, tol_panel);

    int used = 0;
    double last = kInf, prev = kInf;
    while (used < quad.max_panels) {
        prev = last;
        last = integrate_panel(h, hi, hi + quad.panel, {}, tol_panel);
        if (!std::isfinite(last))
            throw std::runtime_error("resolvent_apply: non-finite panel");
        total += last;
        hi += quad.panel;
        ++used;
        if (std::abs(last) < cut && std::abs(last) <= std::abs(prev)) break;
    }
    if (used >= quad.max_panels)
        throw std::runtime_error("resolvent_apply: right tail did not converge");

    last = kInf;
    prev = kInf;
    while (used < quad.max_panels) {
        prev = last;
        last = integrate_panel(h, lo - quad.panel, lo, {}, tol_panel);
        if (!std::isfinite(last))
            throw std::runtime_error("resolvent_apply: non-finite panel");
        total += last;
        lo -= quad.panel;
        ++used;
        if (std::abs(last) < cut && std::abs(last) <= std::abs(prev)) break;
    }
    if (used >= quad.max_panels)
        throw std::runtime_error("resolvent_apply: left tail did not converge");
    return total;
}

}  // namespace

double resolvent_apply(const ResolventKernel& kernel,
                       const std::function<double(double)>& g, double x,
                       const QuadratureConfig& quad) {
    return apply_impl(kernel, g, x, quad, false);
}

double resolvent_apply_dx(const ResolventKernel& kernel,
                          const std::function<double(double)>& g, double x,
                          const QuadratureConfig& quad) {
    return apply_impl(kernel, g, x, quad, true);
}

namespace {

// Piecewise-linear interpolant on a uniform grid, clamped to the endpoint
// values outside the grid (affine continuation would inflate the sup norm
// of the Picard operator past its contraction factor).
struct GridFn {
    double lo = 0.0, h = 1.0;
    const std::vector<double>* vals = nullptr;

    double operator()(double x) const {
        const auto& v = *vals;
        const auto n = v.size();
        const double pos = (x - lo) / h;
        if (pos <= 0.0) return v[0];
        if (pos >= static_cast<double>(n - 1)) return v[n - 1];
        const auto i = static_cast<std::size_t>(pos);
        const double f = pos - static_cast<double>(i);
        return v[i] + f * (v[i + 1] - v[i]);
    }
};

// 5-point Gauss-Legendre on [0, 1].
constexpr double kGl5x[5] = {0.0469100770306680, 0.2307653449471585, 0.5,
                             0.7692346550528415, 0.9530899229693320};
constexpr double kGl5w[5] = {0.1184634425280945, 0.2393143352496832,
                             0.2844444444444444, 0.2393143352496832,
                             0.1184634425280945};

// m0 = int_a^c R(x,y) dy and m1 = int_a^c R(x,y) (y-a)/(c-a) dy, splitting
// at the kernel kinks y = x and y = b; the pieces are smooth exponentials
// so fixed Gauss-Legendre is plenty at panel widths of order the grid step.
void hat_moments(const ResolventKernel& k, double x, double a, double c,
                 double& m0, double& m1) {
    double cuts[4] = {a, c, c, c};
    int nc = 1;
    for (double s : {k.b(), x})
        if (s > a && s < c) cuts[nc++] = s;
    cuts[nc] = c;
    std::sort(cuts, cuts + nc + 1);
    m0 = m1 = 0.0;
    for (int s = 0; s < nc; ++s) {
        const double len = cuts[s + 1] - cuts[s];
        if (!(len > 0.0)) continue;
        for (int g = 0; g < 5; ++g) {
            const double y = cuts[s] + kGl5x[g] * len;
            const double r = k.density(x, y) * kGl5w[g] * len;
            m0 += r;
            m1 += r * (y - a) / (c - a);
        }
    }
}

// Adds w * int R(x, y) hat_j(y + u) dy to row[j] for every hat function of
// the uniform grid (lo, h, n), with clamped continuation beyond the grid.
void accumulate_row(const ResolventKernel& k, double x, double u, double w,
                    double lo, double h, int n, double* row) {
    for (int j = 0; j + 1 < n; ++j) {
        const double a = lo + j * h - u;
        double m0, m1;
        hat_moments(k, x, a, a + h, m0, m1);
        row[j] += w * (m0 - m1);
        row[j + 1] += w * m1;
    }
    double tail = 0.0;
    for (int p = 0; p < 200; ++p) {
        const double c = lo - u - p;
        double m0, m1;
        hat_moments(k, x, c - 1.0, c, m0, m1);
        tail += m0;
        if (m0 < 1e-14) break;
    }
    row[0] += w * tail;
    tail = 0.0;
    const double hi = lo + (n - 1) * h;
    for (int p = 0; p < 200; ++p) {
        const double a = hi - u + p;
        double m0, m1;
        hat_moments(k, x, a, a + 1.0, m0, m1);
        tail += m0;
        if (m0 < 1e-14) break;
    }
    row[n - 1] += w * tail;
}

}  // namespace

double semi_analytic_v_prime(const ResolventKernel& kernel, const CostSpec& cost,
                             double x, const FixedPointConfig& fp,
                             const JumpSpec* up_jumps, FixedPointReport* report) {
    auto fprime = [&](double y) { return cost.fp(y); };
    if (up_jumps == nullptr || up_jumps->terms.empty()) {
        if (report) {
            *report = FixedPointReport{};
            report->iterations = 0;
            report->final_update = 0.0;
            report->converged = true;
        }
        return resolvent_apply(kernel, fprime, x, fp.quad);
    }

    up_jumps->validate();
    double lam = 0.0;
    for (const auto& t : up_jumps->terms) {
        if (t.side != JumpSide::up)
            throw std::invalid_argument("up_jumps must contain only upward terms");
        lam += t.rate;
    }
    const double qhat = kernel.q() + lam;
    const double contraction = lam / qhat;
    if (!(contraction < 1.0))
        throw std::logic_error("fixed point not contractive");  // defensive; q > 0

    // Integration nodes (u_j, w_j) for int h(u) Pi(du) over (0, inf):
    // point masses exact, exponential terms by Gauss-Legendre after the
    // substitution u = -log(s)/eta.
    std::vector<std::pair<double, double>> nodes;
    static const double gl_x[8] = {0.0198550717512319, 0.1016667612931866,
                                   0.2372337950418355, 0.4082826787521751,
                                   0.5917173212478249, 0.7627662049581645,
                                   0.8983332387068134, 0.9801449282487681};
    static const double gl_w[8] = {0.0506142681451881, 0.1111905172266872,
                                   0.1568533229389436, 0.1813418916891810,
                                   0.1813418916891810, 0.1568533229389436,
                                   0.1111905172266872, 0.0506142681451881};
    for (const auto& t : up_jumps->terms) {
        if (t.kind == JumpKind::point_mass) {
            nodes.emplace_back(std::abs(t.size), t.rate);
        } else {
            for (int j = 0; j < 8; ++j)
                nodes.emplace_back(-std::log(gl_x[j]) / t.decay, t.rate * gl_w[j]);
        }
    }

    const ResolventKernel khat(kernel.model(), qhat, kernel.b(), kernel.alpha());

    const int n = fp.n_nodes;
    const double lo = kernel.b() - fp.span;
    const double h = 2.0 * fp.span / (n - 1);
    std::vector<double> xs(n), G0(n), cpart(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = lo + i * h;
        G0[i] = resolvent_apply(kernel, fprime, xs[i], fp.quad);
    }

    // Dense hat-basis representation of H -> sum_u w_u Rhat[H(.+u)] on the
    // working grid. Row sums equal lam/qhat up to quadrature error, so the
    // Picard updates provably contract at that rate in the sup norm.
    auto build = [&](const std::vector<std::pair<double, double>>& nds) {
        std::vector<double> M(static_cast<std::size_t>(n) * n, 0.0);
        for (int i = 0; i < n; ++i)
            for (const auto& [u, w] : nds)
                accumulate_row(khat, xs[i], u, w, lo, h, n,
                               &M[static_cast<std::size_t>(i) * n]);
        return M;
    };
    const std::vector<double> M0 = build({{0.0, lam}});
    const std::vector<double> M = build(nodes);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += M0[static_cast<std::size_t>(i) * n + j] * G0[j];
        cpart[i] = G0[i] - s;
    }

    std::vector<double> H = G0, Hn(n);
    FixedPointReport rep;
    rep.contraction = contraction;
    double prev_update = kInf;
    for (int it = 0; it < fp.max_iters; ++it) {
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j)
                s += M[static_cast<std::size_t>(i) * n + j] * H[j];
            Hn[i] = cpart[i] + s;
        }
        double update = 0.0, scale = 0.0;
        for (int i = 0; i < n; ++i) {
            update = std::max(update, std::abs(Hn[i] - H[i]));
            scale = std::max(scale, std::abs(Hn[i]));
        }
        H.swap(Hn);
        rep.iterations = it + 1;
        rep.final_update = update;
        // Ratios are meaningful only while the updates dominate the
        // quadrature error; near the floor they measure noise, not the
        // contraction factor.
        if (it >= 1 && prev_update > 1e3 * fp.tol * (1.0 + scale))
            rep.worst_ratio = std::max(rep.worst_ratio, update / prev_update);
        prev_update = update;
        if (update < fp.tol * (1.0 + scale)) {
            rep.converged = true;
            break;
        }
    }
    if (report) *report = rep;
    if (!rep.converged)
        throw std::runtime_error("semi_analytic_v_prime: fixed point not converged");
    GridFn hf{lo, h, &H};
    return hf(x);
}

}  // namespace refract
