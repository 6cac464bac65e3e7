#include "refract/pathsim.hpp"

#include <cmath>
#include <fstream>

#include "refract/rng.hpp"

namespace refract {

double DrivingPath::value_at_grid(int k) const {
    const double t = grid.time(k);
    double x = x_offset + drift_rate * t;
    for (int j = 0; j < k && j < static_cast<int>(gauss->size()); ++j) x += (*gauss)[j];
    for (const auto& m : *jumps) {
        if (m.time > t) break;
        x += m.size;
    }
    return x;
}

DrivingPath sample_driving_path(const LevyModel& model, const TimeGrid& grid,
                                RngStreamKey key) {
    model.validate();
    grid.validate();

    DrivingPath path;
    path.grid = grid;
    path.key = key;
    path.drift_rate = model.natural_drift();
    path.x_offset = 0.0;

    const int n = grid.n_steps();
    auto gauss = std::make_shared<std::vector<double>>();
    if (model.sigma > 0.0) {
        gauss->resize(n);
        for (int k = 0; k < n; ++k) {
            const double cell = grid.time(k + 1) - grid.time(k);
            (*gauss)[k] = model.sigma * std::sqrt(cell) *
                          rng::normal(key.seed, key.path_index, rng::kGauss, k);
        }
    }
    path.gauss = std::move(gauss);

    auto jumps = std::make_shared<std::vector<JumpMark>>();
    const double total_rate = model.jumps.total_rate();
    if (total_rate > 0.0) {
        double t = 0.0;
        for (std::uint64_t i = 0;; ++i) {
            const double u = rng::uniform(key.seed, key.path_index, rng::kJumpTime, i);
            t += -std::log(u) / total_rate;
            if (t > grid.horizon) break;
            // Pick the term by rate weight.
            double pick = rng::uniform(key.seed, key.path_index, rng::kJumpTerm, i) * total_rate;
            const JumpTerm* term = &model.jumps.terms.back();
            for (const auto& jt : model.jumps.terms) {
                pick -= jt.rate;
                if (pick <= 0.0) {
                    term = &jt;
                    break;
                }
            }
            double mag;
            if (term->kind == JumpKind::point_mass) {
                mag = term->size;
            } else {
                const double v = rng::uniform(key.seed, key.path_index, rng::kJumpSize, i);
                mag = -std::log(v) / term->decay;
            }
            jumps->push_back({t, term->sign() * mag});
        }
    }
    path.jumps = std::move(jumps);
    return path;
}

DrivingPath coupled_view(const DrivingPath& path, double shift, double extra_drift) {
    DrivingPath view = path;
    view.x_offset += shift;
    view.drift_rate -= extra_drift;
    return view;
}

void dump_path_csv(const DrivingPath& path, const std::string& filename) {
    std::ofstream out(filename);
    out.precision(17);
    out << "t,X\n";
    const auto& jumps = *path.jumps;
    const auto& gauss = *path.gauss;
    const int n = path.grid.n_steps();
    double atoms = 0.0;  // accumulated Gaussian increments + jumps
    std::size_t jump_idx = 0;
    out << 0.0 << "," << path.x_offset << "\n";
    for (int k = 0; k < n; ++k) {
        const double t1 = path.grid.time(k + 1);
        while (jump_idx < jumps.size() && jumps[jump_idx].time <= t1) {
            const auto& m = jumps[jump_idx++];
            atoms += m.size;
            out << m.time << "," << path.x_offset + path.drift_rate * m.time + atoms << "\n";
        }
        if (k < static_cast<int>(gauss.size())) atoms += gauss[k];
        out << t1 << "," << path.x_offset + path.drift_rate * t1 + atoms << "\n";
    }
}

}  // namespace refract
