#pragma once

// One explicit Euler step of a single path with frozen interaction terms,
// shared by the particle integrator, the decoupled limit paths and the
// propagator estimator.

#include <cmath>
#include <vector>

#include "chaoslab/model.hpp"
#include "chaoslab/rng.hpp"

namespace chaoslab::detail {

struct StepWorkspace {
    explicit StepWorkspace(const ModelSpec& spec)
        : drift(static_cast<std::size_t>(spec.dim_state)),
          diffusion(static_cast<std::size_t>(spec.dim_state * spec.dim_noise)),
          noise(static_cast<std::size_t>(spec.dim_noise)),
          jump(static_cast<std::size_t>(spec.dim_state), 0.0) {}

    std::vector<double> drift;
    std::vector<double> diffusion;
    std::vector<double> noise;
    std::vector<double> jump;
};

/// Advances x from t to t + dt in place:
///   x += f(t, x, alpha) dt + g(t, x, beta) dW + h(t, x_-) dN,
/// with P(dN = 1) = 1 - exp(-intensity dt). Returns dN.
inline int euler_step(const ModelSpec& spec, double t, double dt, std::uint64_t step, MutVec x,
                      double alpha, double beta, double intensity, const DriverSeed& brownian,
                      const DriverSeed& jump_seed, StepWorkspace& ws) {
    const auto m = x.size();
    const auto d = static_cast<std::size_t>(spec.dim_noise);
    spec.drift(t, x, alpha, ws.drift);
    spec.diffusion(t, x, beta, ws.diffusion);
    brownian_increment_into(brownian, step, dt, ws.noise);
    const int fired = step_jump_decision(intensity, spec.max_intensity(), dt, jump_seed, step);
    if (fired != 0 && !spec.jump_free) {
        spec.jump(t, x, ws.jump);  // evaluated at the pre-jump state
    }
    for (std::size_t k = 0; k < m; ++k) {
        double dx = ws.drift[k] * dt;
        for (std::size_t j = 0; j < d; ++j) dx += ws.diffusion[k * d + j] * ws.noise[j];
        x[k] += dx;
    }
    if (fired != 0 && !spec.jump_free) {
        for (std::size_t k = 0; k < m; ++k) x[k] += ws.jump[k];
    }
    return fired;
}

inline bool finite_state(ConstVec x) {
    for (double e : x) {
        if (!std::isfinite(e)) return false;
    }
    return true;
}

}  // namespace chaoslab::detail
