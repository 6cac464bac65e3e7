#include "refract/refraction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace refract {

namespace {

struct Collector {
    ControlledPath cp;
    void record(double t, double u, double L, int) {
        cp.times.push_back(t);
        cp.U.push_back(u);
        cp.L.push_back(L);
    }
    ControlledPath take() {
        cp.l.resize(cp.times.empty() ? 0 : cp.times.size() - 1);
        for (std::size_t i = 0; i + 1 < cp.times.size(); ++i) {
            const double dt = cp.times[i + 1] - cp.times[i];
            cp.l[i] = dt > 0.0 ? (cp.L[i + 1] - cp.L[i]) / dt : 0.0;
        }
        return std::move(cp);
    }
};

// Value at t from records: linear interpolation, post-atom at duplicates.
std::size_t locate(const std::vector<double>& times, double t) {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0;
    return static_cast<std::size_t>(it - times.begin()) - 1;
}

double interp(const std::vector<double>& times, const std::vector<double>& vals,
              double t) {
    if (times.empty()) throw std::logic_error("empty controlled path");
    if (t <= times.front()) return vals.front();
    if (t >= times.back()) return vals.back();
    const std::size_t i = locate(times, t);
    const double t0 = times[i], t1 = times[i + 1];
    if (t1 == t0) return vals[i + 1];
    const double w = (t - t0) / (t1 - t0);
    return vals[i] + w * (vals[i + 1] - vals[i]);
}

}  // namespace

double ControlledPath::value_at(double t) const { return interp(times, U, t); }

// Piecewise-constant rate, right-continuous at record times.
double ControlledPath::control_at(double t) const {
    if (times.empty()) throw std::logic_error("empty controlled path");
    if (l.empty()) return 0.0;
    if (t <= times.front()) return l.front();
    if (t >= times.back()) return l.back();
    const std::size_t i = locate(times, t);
    return l[std::min(i, l.size() - 1)];
}

std::string Strategy::name() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::refraction:
            os << "refraction(b=" << b << ")";
            break;
        case Kind::constant:
            os << "constant(r=" << rate << ")";
            break;
        case Kind::feedback:
            os << "feedback";
            break;
    }
    return os.str();
}

ControlledPath refract_path(const DrivingPath& path, double x0, double b,
                            const ProblemSpec& spec) {
    spec.validate();
    Collector sink;
    apply_strategy_into(path, x0, Strategy::refraction(b), spec, sink);
    ControlledPath cp = sink.take();
    cp.grid = path.grid;
    return cp;
}

ControlledPath apply_strategy(const DrivingPath& path, double x0,
                              const Strategy& strat, const ProblemSpec& spec) {
    spec.validate();
    Collector sink;
    apply_strategy_into(path, x0, strat, spec, sink);
    ControlledPath cp = sink.take();
    cp.grid = path.grid;
    return cp;
}

void dump_controlled_csv(const ControlledPath& cp, const std::string& filename) {
    std::ofstream out(filename);
    out.precision(17);
    out << "t,U,L,l\n";
    for (std::size_t i = 0; i < cp.times.size(); ++i) {
        const double rate = i < cp.l.size() ? cp.l[i] : 0.0;
        out << cp.times[i] << "," << cp.U[i] << "," << cp.L[i] << "," << rate << "\n";
    }
}

CouplingReport check_coupling(const ControlledPath& base, const ControlledPath& shifted,
                              double eps, double b, double tol) {
    CouplingReport rep;
    // Differences are compared at shared record times (grid points and the
    // common jump marks). Crossing-time records exist in only one of the two
    // paths and the Gaussian cell increment lands atomically at the cell end,
    // so cross-interpolating one path at the other's private record times is
    // not scheme-exact. Records between checkpoints still feed the support
    // check through the running extremes below.
    const double slack = tol + 1e-12;  // accumulated roundoff
    std::size_t i = 0, j = 0;
    const auto nb = base.times.size();
    const auto ns = shifted.times.size();
    double prev_du = eps, prev_dl = 0.0;
    bool first = true;
    // Extremes of U over all records since the last checkpoint (inclusive).
    double run_min_ub = kInf, run_max_us = -kInf;

    auto note = [&rep](double margin, int& counter, double tol_) {
        if (margin < -tol_) {
            ++counter;
            rep.worst_margin = std::min(rep.worst_margin, margin);
        }
    };

    auto step = [&](double ub, double Lb, double us, double Ls) {
        const double du = us - ub;
        const double dl = Ls - Lb;
        run_min_ub = std::min(run_min_ub, ub);
        run_max_us = std::max(run_max_us, us);
        ++rep.n_points;
        note(du, rep.violations_bounds, slack);
        note(eps - du, rep.violations_bounds, slack);
        note(dl, rep.violations_bounds, slack);
        note(eps - dl, rep.violations_bounds, slack);
        if (!first) {
            note(prev_du - du, rep.violations_monotone_u, slack);
            note(dl - prev_dl, rep.violations_monotone_l, slack);
            if (dl > prev_dl + slack) {
                // L-difference grew: the paths must have differed and some
                // record in the interval closure must meet the straddle set
                // { U^{[eps]} >= b >= U }.
                if (!(prev_du > slack && run_min_ub <= b + slack &&
                      run_max_us >= b - slack))
                    ++rep.violations_support;
            }
        }
        prev_du = du;
        prev_dl = dl;
        run_min_ub = ub;
        run_max_us = us;
        first = false;
    };

    while (i < nb && j < ns) {
        const double tb = base.times[i];
        const double ts = shifted.times[j];
        if (tb < ts) {
            run_min_ub = std::min(run_min_ub, base.U[i]);
            ++i;
        } else if (ts < tb) {
            run_max_us = std::max(run_max_us, shifted.U[j]);
            ++j;
        } else {
            // Shared time: pair equal-time runs (jump pre/post) in lockstep;
            // surplus duplicates on one side only feed the extremes.
            const double t = tb;
            while (i < nb && j < ns && base.times[i] == t && shifted.times[j] == t) {
                step(base.U[i], base.L[i], shifted.U[j], shifted.L[j]);
                ++i;
                ++j;
            }
            while (i < nb && base.times[i] == t) {
                run_min_ub = std::min(run_min_ub, base.U[i]);
                ++i;
            }
            while (j < ns && shifted.times[j] == t) {
                run_max_us = std::max(run_max_us, shifted.U[j]);
                ++j;
            }
        }
    }
    return rep;
}

}  // namespace refract
