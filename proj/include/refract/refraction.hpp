#pragma once

#include <functional>
#include <string>
#include <vector>

#include "refract/levy_model.hpp"
#include "refract/pathsim.hpp"

namespace refract {

// Controlled path sampled at grid times, jump marks (pre and post value at
// the same t), and threshold hitting times. U_t = x0 + X_t - L_t holds at
// every recorded time; l is the effective rate on each record interval.
struct ControlledPath {
    TimeGrid grid;
    std::vector<double> times;
    std::vector<double> U;
    std::vector<double> L;
    std::vector<double> l;

    // Linear interpolation between records; at duplicated times (jumps)
    // returns the post-jump value.
    double value_at(double t) const;
    double control_at(double t) const;
};

struct Strategy {
    enum class Kind { refraction, constant, feedback };
    Kind kind = Kind::refraction;
    double b = 0.0;     // refraction threshold, may be +-infinity
    double rate = 0.0;  // constant strategies
    std::function<double(double)> rule;  // feedback: state -> rate in [0, alpha]
    std::string name() const;

    static Strategy refraction(double b) {
        Strategy s;
        s.kind = Kind::refraction;
        s.b = b;
        return s;
    }
    static Strategy constant(double r) {
        Strategy s;
        s.kind = Kind::constant;
        s.rate = r;
        return s;
    }
    static Strategy feedback(std::function<double(double)> rule) {
        Strategy s;
        s.kind = Kind::feedback;
        s.rule = std::move(rule);
        return s;
    }
};

// Control rate of the refraction strategy when the state is at y.
inline double refraction_rate(double y, double b, CaseTag tag, double alpha,
                              double delta = 0.0) {
    if (y > b) return alpha;
    if (y == b && tag == CaseTag::case2) return delta;
    return 0.0;
}

namespace detail {

// Deterministic motion over a jump-free sub-interval under the refraction
// rule: rate alpha above b, 0 below, and at exactly b either pass-through
// or stick depending on the drift. Hitting times of b are computed exactly
// and emitted so the recorded path is piecewise linear between records.
struct RefractionAdvancer {
    double b;
    double alpha;

    template <class Emit>
    void advance(double& u, double& L, double t0, double tau, double d,
                 Emit&& emit) const {
        double rem = tau;
        double t = t0;
        while (rem > 0.0) {
            if (u > b) {
                if (d < alpha) {
                    const double th = (u - b) / (alpha - d);
                    if (th < rem) {
                        if (th > 0.0) {
                            L += alpha * th;
                            t += th;
                        }
                        u = b;
                        rem -= th;
                        if (rem > 0.0) emit(t, u, L);
                        continue;
                    }
                }
                L += alpha * rem;
                u += (d - alpha) * rem;
                return;
            }
            if (u < b) {
                if (d > 0.0) {
                    const double th = (b - u) / d;
                    if (th < rem) {
                        if (th > 0.0) t += th;
                        u = b;
                        rem -= th;
                        if (rem > 0.0) emit(t, u, L);
                        continue;
                    }
                }
                u += d * rem;
                return;
            }
            // Exactly at b. Rate alpha above, 0 below; d in [0, alpha]
            // means the state sticks at b with rate d (this is the Case 2
            // rate delta, since there d equals the drift delta).
            if (d > alpha) {
                L += alpha * rem;
                u += (d - alpha) * rem;
            } else if (d < 0.0) {
                u += d * rem;
            } else {
                L += d * rem;
            }
            return;
        }
    }
};

struct ConstantAdvancer {
    double r;

    template <class Emit>
    void advance(double& u, double& L, double, double tau, double d, Emit&&) const {
        L += r * tau;
        u += (d - r) * tau;
    }
};

struct FeedbackAdvancer {
    const std::function<double(double)>* rule;
    double alpha;

    template <class Emit>
    void advance(double& u, double& L, double, double tau, double d, Emit&&) const {
        const double r = (*rule)(u);
        if (!(r >= 0.0 && r <= alpha))
            throw std::domain_error("feedback rule returned rate outside [0, alpha]");
        L += r * tau;
        u += (d - r) * tau;
    }
};

// Sink concept:
//   void record(double t, double u, double L, int grid_idx);
// grid_idx is the grid point index when the record lands on the grid,
// -1 for jump marks and hitting times. Records arrive in time order;
// duplicated times carry pre/post jump values.
template <class Advancer, class Sink>
void drive(const DrivingPath& path, double x0, const Advancer& adv, Sink&& sink) {
    const auto& gauss = *path.gauss;
    const auto& jumps = *path.jumps;
    const double d = path.drift_rate;
    const int n = path.grid.n_steps();

    double u = x0 + path.x_offset;
    double L = 0.0;
    sink.record(0.0, u, L, 0);
    auto emit = [&sink](double t, double uu, double LL) { sink.record(t, uu, LL, -1); };

    std::size_t ji = 0;
    for (int k = 0; k < n; ++k) {
        const double t1 = path.grid.time(k + 1);
        double cur = path.grid.time(k);
        while (ji < jumps.size() && jumps[ji].time <= t1) {
            const JumpMark& m = jumps[ji++];
            if (m.time > cur) {
                adv.advance(u, L, cur, m.time - cur, d, emit);
                cur = m.time;
            }
            sink.record(cur, u, L, -1);
            u += m.size;
            sink.record(cur, u, L, -1);
        }
        if (t1 > cur) adv.advance(u, L, cur, t1 - cur, d, emit);
        if (!gauss.empty()) u += gauss[k];
        sink.record(t1, u, L, k + 1);
    }
}

}  // namespace detail

// Applies a strategy to a driving path, streaming records into the sink.
template <class Sink>
void apply_strategy_into(const DrivingPath& path, double x0, const Strategy& strat,
                         const ProblemSpec& spec, Sink&& sink) {
    switch (strat.kind) {
        case Strategy::Kind::refraction:
            if (strat.b == kInf) {
                detail::drive(path, x0, detail::ConstantAdvancer{0.0}, sink);
            } else if (strat.b == -kInf) {
                detail::drive(path, x0, detail::ConstantAdvancer{spec.alpha}, sink);
            } else {
                detail::drive(path, x0, detail::RefractionAdvancer{strat.b, spec.alpha},
                              sink);
            }
            break;
        case Strategy::Kind::constant:
            if (!(strat.rate >= 0.0 && strat.rate <= spec.alpha))
                throw std::domain_error("constant strategy rate outside [0, alpha]");
            detail::drive(path, x0, detail::ConstantAdvancer{strat.rate}, sink);
            break;
        case Strategy::Kind::feedback:
            detail::drive(path, x0, detail::FeedbackAdvancer{&strat.rule, spec.alpha},
                          sink);
            break;
    }
}

ControlledPath refract_path(const DrivingPath& path, double x0, double b,
                            const ProblemSpec& spec);
ControlledPath apply_strategy(const DrivingPath& path, double x0,
                              const Strategy& strat, const ProblemSpec& spec);

void dump_controlled_csv(const ControlledPath& cp, const std::string& filename);

// Pathwise coupling diagnostics for two controlled paths driven by the
// same randomness from x0 and x0+eps: U-difference non-increasing in
// [0, eps], L-difference non-decreasing in [0, eps], and the L-difference
// growing only where the paths straddle b. Checked at shared record times
// with a roundoff slack on top of tol.
struct CouplingReport {
    int n_points = 0;
    int violations_monotone_u = 0;
    int violations_monotone_l = 0;
    int violations_bounds = 0;
    int violations_support = 0;
    double worst_margin = 0.0;  // most negative slack observed
    bool clean() const {
        return violations_monotone_u == 0 && violations_monotone_l == 0 &&
               violations_bounds == 0 && violations_support == 0;
    }
};

CouplingReport check_coupling(const ControlledPath& base, const ControlledPath& shifted,
                              double eps, double b, double tol = 0.0);

}  // namespace refract
