#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace chaoslab {

/// Uniform Euler grid on [0, horizon]. `dt` may be a dyadic refinement of
/// the requested step so that max_intensity * dt stays below the jump cap.
struct TimeGrid {
    double horizon = 0.0;
    double dt = 0.0;
    double requested_dt = 0.0;
    std::uint64_t steps = 0;
    std::uint64_t refinement = 1;  // requested_dt / dt

    double time(std::uint64_t step) const noexcept {
        return step == steps ? horizon : static_cast<double>(step) * dt;
    }
    /// Step index of time t; throws std::invalid_argument if t is off-grid
    /// relative to the requested step.
    std::uint64_t step_of(double t) const;
    std::vector<std::uint64_t> steps_of(const std::vector<double>& times) const;
};

inline constexpr double kJumpCap = 0.1;

/// Throws std::invalid_argument unless horizon > 0, dt > 0 and horizon is
/// an integer multiple of dt (relative tolerance 1e-9).
TimeGrid plan_time_grid(double horizon, double dt, double max_intensity, double jump_cap = kJumpCap);

/// k * horizon / count for k = 0..count.
std::vector<double> uniform_times(double horizon, std::size_t count);

}  // namespace chaoslab
