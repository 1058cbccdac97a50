#pragma once

// Limit measure flows as Monte Carlo ensembles, decoupled limit paths and
// the Picard fixed-point solver.

#include <cstdint>
#include <string>
#include <vector>

#include "chaoslab/measure.hpp"
#include "chaoslab/model.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/test_function.hpp"
#include "chaoslab/time_grid.hpp"

namespace chaoslab {

struct TrajectoryBundle;

struct PicardTrace {
    std::vector<double> distances;       // flow_distance(flow^k, flow^{k-1}), k = 1..
    std::vector<std::string> maximizers; // dictionary member attaining each distance
    std::size_t iterations = 0;
    bool converged = false;
    double tolerance = 0.0;
};

/// mu_t on a snapshot grid. Ensembles are stored at the snapshot times; the
/// per-integration-step summaries in `step_fields` drive decoupled paths.
/// Flows over dense kernels store an ensemble at every integration step.
struct MeasureFlow {
    std::vector<double> time_grid;
    std::vector<EmpiricalMeasure> ensembles;
    std::vector<std::vector<double>> mean_curve;
    TimeGrid grid;
    std::vector<FieldSummary> step_fields;  // grid.steps + 1 entries, or empty
    bool every_step = false;                // ensembles[k] is integration step k
    std::size_t iteration = 0;
    std::size_t M = 0;
    DriverSeed seed;
    std::string model_id;
    PicardTrace trace;

    std::size_t size() const noexcept { return time_grid.size(); }
    double horizon() const noexcept { return time_grid.empty() ? 0.0 : time_grid.back(); }
    /// Throws std::invalid_argument if t is not a grid time.
    std::size_t slice_index(double t) const;
    const EmpiricalMeasure& slice(double t) const { return ensembles[slice_index(t)]; }
    /// Pairing view used on [grid.time(step), grid.time(step + 1)).
    /// The returned field may reference this flow's storage.
    MeasureField field_at(const ModelSpec& spec, std::uint64_t step) const;
    /// Whether field_at is available (false for pairing-only flows).
    bool drives_paths(const ModelSpec& spec) const;
    /// Throws std::invalid_argument on broken invariants (weights, mean curve).
    void check() const;
};

/// Snapshot times actually stored for a requested set (all integration
/// steps when a kernel is dense).
std::vector<double> flow_snapshot_times(const ModelSpec& spec, const TimeGrid& grid,
                                        const std::vector<double>& requested);

/// Flow whose every slice is `initial` (the time-frozen ensemble).
MeasureFlow frozen_flow(const ModelSpec& spec, const EmpiricalMeasure& initial, const TimeGrid& grid,
                        const std::vector<double>& snapshot_times);

/// Pairing-only flow built from a particle run (used as a reference
/// measure, cannot drive decoupled paths unless every step was recorded).
MeasureFlow flow_from_bundle(const ModelSpec& spec, const TrajectoryBundle& bundle);

struct DecoupledPath {
    std::vector<double> times;  // flow.time_grid
    int dim = 1;
    std::vector<double> states;  // times.size() * dim
    std::vector<std::uint32_t> jump_counts;

    ConstVec state(std::size_t s) const noexcept {
        return {states.data() + s * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
};

/// Euler path of the limit equation driven by the flow's interaction field
/// and intensity p psi(t, mean_curve). Uses the Brownian / Jump streams of
/// `seed` (kind field ignored). Throws NumericalAbort on non-finite state.
DecoupledPath simulate_decoupled(const ModelSpec& spec, const MeasureFlow& flow, double p, ConstVec x0,
                                 const DriverSeed& seed);

struct PicardOptions {
    std::vector<double> snapshot_times;  // empty: about 20 slices on the requested grid, T included
    std::vector<TestFunction> dictionary;  // empty: euclidean dictionary of 64 members
    int workers = 0;
    double jump_cap = kJumpCap;
};

/// Default stopping tolerance: twice the Monte Carlo SE of one pairing of
/// an R_1 function against M atoms, 2 / sqrt(M).
double default_picard_tolerance(std::size_t M) noexcept;

/// Picard iteration over flows. Atoms (p_j, x0_j) come from the
/// InitialState / Mark streams of seed.with_particle(j) and every iteration
/// reuses the same driving streams per atom. flow^0 propagates the atoms
/// against the time-frozen initial ensemble; flow^k against flow^{k-1}.
/// Stops when flow_distance < tol or after max_iters; the result carries
/// the trace and the converged flag.
MeasureFlow solve_mkv_picard(const ModelSpec& spec, std::size_t M, double horizon, double dt,
                             std::size_t max_iters, double tol, const DriverSeed& seed,
                             const PicardOptions& options = {});

struct FlowDistance {
    double value = 0.0;
    double time = 0.0;
    std::string maximizer;
};

/// sup over grid times of max_phi |<a_t - b_t, phi>|. Throws
/// std::invalid_argument on mismatched grids or an empty dictionary.
FlowDistance flow_distance_detail(const MeasureFlow& a, const MeasureFlow& b,
                                  const std::vector<TestFunction>& dictionary);
double flow_distance(const MeasureFlow& a, const MeasureFlow& b,
                     const std::vector<TestFunction>& dictionary);

}  // namespace chaoslab
