#include "chaoslab/time_grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace chaoslab {

std::uint64_t TimeGrid::step_of(double t) const {
    const double tolerance = 1e-9 * std::max(1.0, horizon);
    if (t < -tolerance || t > horizon + tolerance) {
        throw std::invalid_argument("time " + std::to_string(t) + " outside [0, horizon]");
    }
    const double coarse = std::round(t / requested_dt);
    if (std::abs(coarse * requested_dt - t) > tolerance) {
        throw std::invalid_argument("time " + std::to_string(t) + " is not on the dt grid");
    }
    const auto step = static_cast<std::uint64_t>(coarse) * refinement;
    return step > steps ? steps : step;
}

std::vector<std::uint64_t> TimeGrid::steps_of(const std::vector<double>& times) const {
    std::vector<std::uint64_t> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(step_of(t));
    return out;
}

TimeGrid plan_time_grid(double horizon, double dt, double max_intensity, double jump_cap) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw std::invalid_argument("horizon must be positive and finite");
    }
    if (!(dt > 0.0) || dt > horizon * (1.0 + 1e-12)) {
        throw std::invalid_argument("dt must lie in (0, horizon]");
    }
    const double ratio = horizon / dt;
    const double coarse_steps = std::round(ratio);
    if (std::abs(coarse_steps - ratio) > 1e-9 * std::max(1.0, ratio)) {
        throw std::invalid_argument("horizon must be an integer multiple of dt");
    }
    TimeGrid grid;
    grid.horizon = horizon;
    grid.requested_dt = horizon / coarse_steps;
    grid.refinement = 1;
    while (max_intensity * grid.requested_dt / static_cast<double>(grid.refinement) > jump_cap) {
        grid.refinement *= 2;
        if (grid.refinement > (1ULL << 40)) {
            throw std::invalid_argument("jump intensity too large for the dt cap");
        }
    }
    grid.steps = static_cast<std::uint64_t>(coarse_steps) * grid.refinement;
    grid.dt = horizon / static_cast<double>(grid.steps);
    return grid;
}

std::vector<double> uniform_times(double horizon, std::size_t count) {
    std::vector<double> times(count + 1);
    for (std::size_t k = 0; k <= count; ++k) {
        times[k] = k == count ? horizon : horizon * static_cast<double>(k) / static_cast<double>(count);
    }
    return times;
}

}  // namespace chaoslab
