#pragma once

// Finite-n mean-field particle system: integration, empirical measures and
// the Lyapunov / exit-time monitor.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chaoslab/measure.hpp"
#include "chaoslab/model.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/time_grid.hpp"

namespace chaoslab {

struct Truncation {
    bool truncated = false;
    std::size_t particle = 0;
    double time = 0.0;  // time at which the non-finite state appeared
};

/// Snapshot-major storage: entry (s, i) is particle i at time_grid[s].
struct TrajectoryBundle {
    std::vector<double> time_grid;
    std::size_t particles = 0;
    int dim = 1;
    std::vector<double> states;          // snapshots * particles * dim
    std::vector<double> marks;           // particles
    std::vector<std::uint32_t> jump_counts;  // snapshots * particles
    std::vector<double> compensators;    // snapshots * particles, sum of lambda_i dt
    std::vector<double> alpha_means;     // snapshots * particles, <mu^n, alpha(x_i, .)>
    std::vector<double> beta_means;      // snapshots * particles
    std::vector<std::uint64_t> stream_ids;  // particle slot of each particle's streams
    DriverSeed seed;                     // root seed (particle/kind fields unused)
    std::string model_id;
    double horizon = 0.0;
    TimeGrid grid;
    Truncation truncation;

    std::size_t snapshots() const noexcept { return time_grid.size(); }
    ConstVec state(std::size_t snapshot, std::size_t particle) const noexcept {
        const auto m = static_cast<std::size_t>(dim);
        return {states.data() + (snapshot * particles + particle) * m, m};
    }
    std::size_t index(std::size_t snapshot, std::size_t particle) const noexcept {
        return snapshot * particles + particle;
    }
    /// Index of snapshot time t (tolerance 1e-9); throws std::invalid_argument.
    std::size_t snapshot_of(double t) const;
};

struct ParticleInit {
    std::vector<double> marks;   // n entries
    std::vector<double> states;  // n * m entries
};

struct SimulationOptions {
    int workers = 0;  // 0 = OpenMP default
    /// When > 0, interaction means use `partners` sampled partners per
    /// particle instead of the exact dense average. Never used by the
    /// acceptance runs.
    std::size_t partners = 0;
    /// Stream slot per particle (defaults to 0..n-1).
    std::vector<std::uint64_t> stream_ids;
    /// Explicit initial marks/states instead of sampling rho_0.
    std::optional<ParticleInit> init;
    double jump_cap = kJumpCap;
};

/// Explicit Euler for the n-particle system with step-start interaction
/// means; the jump of size h(t, x_i-) fires with probability
/// 1 - exp(-p_i psi(t, mean) dt). A non-finite state stops the run and the
/// bundle is returned flagged truncated, holding the snapshots up to the
/// last finite step.
TrajectoryBundle simulate_particles(const ModelSpec& spec, std::size_t n, double horizon, double dt,
                                    const DriverSeed& seed, const std::vector<double>& snapshot_times,
                                    const SimulationOptions& options = {});

/// The n atoms (p_i, X_t^i) with weight 1/n.
EmpiricalMeasure empirical_measure(const TrajectoryBundle& bundle, double t);

struct RadiusReport {
    double radius = 0.0;
    std::vector<double> exit_times;      // tau_R per particle (horizon if no exit)
    double exit_fraction = 0.0;          // P(tau_R < T)
    std::vector<double> lyapunov_curve;  // mean |X_{t ^ tau_R}|^2 per snapshot
    std::vector<double> lyapunov_se;
    std::vector<double> envelope;        // e^{Ct} (1 + E|X_0|^2)
    bool pass = true;                    // curve <= envelope + 3 SE everywhere
};

struct StabilityReport {
    std::vector<double> times;
    double rate_constant = 0.0;
    bool truncated = false;
    std::vector<RadiusReport> radii;
    bool pass() const noexcept;
};

/// Exit times of |X^i| from B_R (on the snapshot grid) and the stopped
/// second-moment curve against its exponential envelope. Needs a t = 0
/// snapshot.
StabilityReport stability_monitor(const TrajectoryBundle& bundle, const std::vector<double>& radii,
                                  double rate_constant);

/// Envelope rate from the certificates:
/// C = K-bar (1 + p_max C_psi + 6 J^2).
double lyapunov_constant(const ModelSpec& spec) noexcept;

}  // namespace chaoslab
