#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "refract/levy_model.hpp"

namespace refract {

struct TimeGrid {
    double dt = 0.0;
    double horizon = 0.0;

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
        if (!(horizon >= dt)) throw std::invalid_argument("horizon must be >= dt");
    }
    int n_steps() const {
        return static_cast<int>(std::ceil(horizon / dt - 1e-12));
    }
    // t_k; the last cell may be shorter than dt.
    double time(int k) const {
        const double t = k * dt;
        return t < horizon ? t : horizon;
    }
};

struct RngStreamKey {
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
};

struct JumpMark {
    double time = 0.0;
    double size = 0.0;
};

// One realization of X on a grid: Gaussian increments per cell, the
// uncompensated drift, and exact jump marks. Coupled views share the
// increment/jump vectors and only change offset and drift.
struct DrivingPath {
    TimeGrid grid;
    double drift_rate = 0.0;  // natural drift per unit time
    double x_offset = 0.0;    // additive shift of the whole path
    std::shared_ptr<const std::vector<double>> gauss;   // sigma-scaled, per cell
    std::shared_ptr<const std::vector<JumpMark>> jumps; // sorted by time
    RngStreamKey key;

    double drift_per_cell() const { return drift_rate * grid.dt; }
    // X at grid time t_k (scheme convention: cell increments applied at
    // cell ends, jumps at their marks).
    double value_at_grid(int k) const;
};

DrivingPath sample_driving_path(const LevyModel& model, const TimeGrid& grid,
                                RngStreamKey key);

// Same randomness, initial value shifted by `shift`, drift reduced by
// `extra_drift` per unit time.
DrivingPath coupled_view(const DrivingPath& path, double shift, double extra_drift);

// Debug dump: CSV with columns t,X_t at grid times and jump marks.
void dump_path_csv(const DrivingPath& path, const std::string& filename);

}  // namespace refract
