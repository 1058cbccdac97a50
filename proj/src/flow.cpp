#include "chaoslab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "chaoslab/errors.hpp"
#include "chaoslab/metrics.hpp"
#include "chaoslab/parallel.hpp"
#include "chaoslab/particles.hpp"
#include "decoupled.hpp"
#include "euler_step.hpp"

namespace chaoslab {

namespace {

bool separable(const ModelSpec& spec) {
    return spec.kernel_alpha.is_separable() && spec.kernel_beta.is_separable();
}

FieldSummary summarize(const ModelSpec& spec, const std::vector<double>& states, std::size_t count) {
    return MeasureField(spec, states, count, 1.0 / static_cast<double>(count)).summary();
}

bool same_time(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

}  // namespace

std::size_t MeasureFlow::slice_index(double t) const {
    for (std::size_t s = 0; s < time_grid.size(); ++s) {
        if (same_time(time_grid[s], t)) return s;
    }
    throw std::invalid_argument("time " + std::to_string(t) + " is not on the flow grid");
}

bool MeasureFlow::drives_paths(const ModelSpec& spec) const {
    return separable(spec) ? step_fields.size() == grid.steps + 1 : every_step;
}

MeasureField MeasureFlow::field_at(const ModelSpec& spec, std::uint64_t step) const {
    if (!drives_paths(spec)) {
        throw std::logic_error("MeasureFlow: flow carries no per-step field (pairing-only flow)");
    }
    if (step > grid.steps) throw std::out_of_range("MeasureFlow: step beyond horizon");
    if (separable(spec)) return MeasureField(spec, step_fields[step]);
    return MeasureField(spec, ensembles[step]);
}

void MeasureFlow::check() const {
    if (ensembles.size() != time_grid.size() || mean_curve.size() != time_grid.size()) {
        throw std::invalid_argument("MeasureFlow: per-time arrays disagree in length");
    }
    for (std::size_t s = 0; s < size(); ++s) {
        const auto& e = ensembles[s];
        e.check();
        if (std::abs(e.weight() * static_cast<double>(e.size()) - 1.0) > 1e-12) {
            throw std::invalid_argument("MeasureFlow: weights do not sum to 1");
        }
        if (s > 0 && !(time_grid[s] > time_grid[s - 1])) {
            throw std::invalid_argument("MeasureFlow: time grid not increasing");
        }
        const auto mean = e.mean_state();
        for (std::size_t k = 0; k < mean.size(); ++k) {
            if (std::abs(mean[k] - mean_curve[s][k]) > 1e-12 * (1.0 + std::abs(mean[k]))) {
                throw std::invalid_argument("MeasureFlow: mean curve disagrees with the ensemble");
            }
        }
    }
}

std::vector<double> flow_snapshot_times(const ModelSpec& spec, const TimeGrid& grid,
                                        const std::vector<double>& requested) {
    const auto steps = grid.steps_of(requested);  // validates the times
    if (!std::is_sorted(steps.begin(), steps.end()) ||
        std::adjacent_find(steps.begin(), steps.end()) != steps.end()) {
        throw std::invalid_argument("flow snapshot times must be strictly increasing");
    }
    if (separable(spec)) {
        std::vector<double> out;
        out.reserve(steps.size());
        for (auto k : steps) out.push_back(grid.time(k));
        return out;
    }
    std::vector<double> all(grid.steps + 1);
    for (std::uint64_t k = 0; k <= grid.steps; ++k) all[k] = grid.time(k);
    return all;
}

MeasureFlow frozen_flow(const ModelSpec& spec, const EmpiricalMeasure& initial, const TimeGrid& grid,
                        const std::vector<double>& snapshot_times) {
    initial.check();
    MeasureFlow flow;
    flow.grid = grid;
    flow.time_grid = flow_snapshot_times(spec, grid, snapshot_times);
    flow.every_step = !separable(spec);
    flow.M = initial.size();
    flow.model_id = spec.model_hash();
    const auto mean = initial.mean_state();
    for (double t : flow.time_grid) {
        EmpiricalMeasure e = initial;
        e.time = t;
        flow.ensembles.push_back(std::move(e));
        flow.mean_curve.push_back(mean);
    }
    flow.step_fields.assign(grid.steps + 1, MeasureField(spec, initial).summary());
    return flow;
}

MeasureFlow flow_from_bundle(const ModelSpec& spec, const TrajectoryBundle& bundle) {
    MeasureFlow flow;
    flow.grid = bundle.grid;
    flow.time_grid = bundle.time_grid;
    flow.M = bundle.particles;
    flow.seed = bundle.seed;
    flow.model_id = bundle.model_id;
    for (double t : bundle.time_grid) {
        flow.ensembles.push_back(empirical_measure(bundle, t));
        flow.mean_curve.push_back(flow.ensembles.back().mean_state());
    }
    flow.every_step = bundle.snapshots() == bundle.grid.steps + 1 && !bundle.truncation.truncated;
    if (flow.every_step) {
        for (const auto& e : flow.ensembles) flow.step_fields.push_back(MeasureField(spec, e).summary());
    }
    return flow;
}

namespace detail {

BatchOutput advance_batch(const ModelSpec& spec, const MeasureFlow& flow, AtomBatch& batch,
                          std::uint64_t start, std::uint64_t end,
                          const std::vector<std::uint64_t>& record_steps, bool summarize_steps,
                          int workers) {
    const auto m = static_cast<std::size_t>(spec.dim_state);
    const std::size_t n = batch.size();
    const TimeGrid& grid = flow.grid;
    if (end > grid.steps || start > end) throw std::invalid_argument("advance_batch: bad step range");
    if (batch.states.size() != n * m || batch.seeds.size() != n) {
        throw std::invalid_argument("advance_batch: inconsistent batch");
    }
    batch.jumps.assign(n, 0);

    BatchOutput out;
    std::size_t next_record = 0;
    while (next_record < record_steps.size() && record_steps[next_record] < start) ++next_record;
    std::vector<unsigned char> finite(n, 1);
    std::vector<std::uint32_t> fired(n, 0);

    for (std::uint64_t step = start;; ++step) {
        if (summarize_steps) out.step_fields.push_back(summarize(spec, batch.states, n));
        while (next_record < record_steps.size() && record_steps[next_record] == step) {
            out.recorded.insert(out.recorded.end(), batch.states.begin(), batch.states.end());
            out.recorded_jumps.insert(out.recorded_jumps.end(), batch.jumps.begin(), batch.jumps.end());
            ++next_record;
        }
        if (step == end) break;

        const double t = grid.time(step);
        const MeasureField field = flow.field_at(spec, step);
        const double psi = spec.intensity_shape(t, field.mean_state());
        parallel_for(n, workers, [&](std::size_t i) {
            thread_local std::unique_ptr<StepWorkspace> ws;
            if (!ws || ws->drift.size() != m || ws->noise.size() != static_cast<std::size_t>(spec.dim_noise)) {
                ws = std::make_unique<StepWorkspace>(spec);
            }
            const MutVec x(batch.states.data() + i * m, m);
            const double alpha = field.alpha(x);
            const double beta = field.beta(x);
            fired[i] = static_cast<std::uint32_t>(euler_step(
                spec, t, grid.dt, step, x, alpha, beta, batch.marks[i] * psi,
                batch.seeds[i].with_kind(DriverKind::Brownian), batch.seeds[i].with_kind(DriverKind::Jump),
                *ws));
            finite[i] = finite_state(x) ? 1 : 0;
        });
        const auto bad = std::find(finite.begin(), finite.end(), 0);
        if (bad != finite.end()) {
            const auto i = static_cast<std::size_t>(bad - finite.begin());
            const auto first = batch.states.begin() + static_cast<std::ptrdiff_t>(i * m);
            throw NumericalAbort("non-finite state on a decoupled path (atom " + std::to_string(i) +
                                     ", t = " + std::to_string(grid.time(step + 1)) + ")",
                                 grid.time(step + 1), std::vector<double>(first, first + static_cast<std::ptrdiff_t>(m)));
        }
        for (std::size_t i = 0; i < n; ++i) batch.jumps[i] += fired[i];
    }
    return out;
}

}  // namespace detail

DecoupledPath simulate_decoupled(const ModelSpec& spec, const MeasureFlow& flow, double p, ConstVec x0,
                                 const DriverSeed& seed) {
    spec.check_complete();
    const auto m = static_cast<std::size_t>(spec.dim_state);
    if (x0.size() != m) throw std::invalid_argument("simulate_decoupled: x0 has the wrong dimension");
    if (!(p > 0.0) || p > spec.mark_law.bound) {
        throw std::invalid_argument("simulate_decoupled: mark outside (0, bound]");
    }
    if (flow.size() == 0 || !same_time(flow.horizon(), flow.grid.horizon)) {
        throw std::invalid_argument("simulate_decoupled: flow does not cover its horizon");
    }
    detail::AtomBatch batch{{p}, std::vector<double>(x0.begin(), x0.end()), {seed}, {}};
    const auto record = flow.grid.steps_of(flow.time_grid);
    const auto out = detail::advance_batch(spec, flow, batch, 0, flow.grid.steps, record, false, 1);
    DecoupledPath path;
    path.times = flow.time_grid;
    path.dim = spec.dim_state;
    path.states = out.recorded;
    path.jump_counts = out.recorded_jumps;
    return path;
}

double default_picard_tolerance(std::size_t M) noexcept {
    return 2.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(M, 1)));
}

MeasureFlow solve_mkv_picard(const ModelSpec& spec, std::size_t M, double horizon, double dt,
                             std::size_t max_iters, double tol, const DriverSeed& seed,
                             const PicardOptions& options) {
    spec.check_complete();
    if (M < 100) throw std::invalid_argument("solve_mkv_picard: M must be >= 100");
    if (!(tol > 0.0)) throw std::invalid_argument("solve_mkv_picard: tol must be > 0");
    if (max_iters < 1) throw std::invalid_argument("solve_mkv_picard: max_iters must be >= 1");
    const auto m = static_cast<std::size_t>(spec.dim_state);
    const TimeGrid grid = plan_time_grid(horizon, dt, spec.max_intensity(), options.jump_cap);

    std::vector<double> requested = options.snapshot_times;
    if (requested.empty()) {
        // Every stride-th requested step (about 20 slices) plus the horizon.
        const auto coarse_steps = static_cast<std::uint64_t>(std::llround(horizon / dt));
        const std::uint64_t stride = std::max<std::uint64_t>(1, (coarse_steps + 19) / 20);
        for (std::uint64_t k = 0; k < coarse_steps; k += stride) requested.push_back(static_cast<double>(k) * dt);
        requested.push_back(horizon);
    }
    const auto snapshots = flow_snapshot_times(spec, grid, requested);
    const auto record_steps = grid.steps_of(snapshots);

    std::vector<TestFunction> dictionary = options.dictionary;
    if (dictionary.empty()) {
        DictionaryOptions d;
        d.kind = DictionaryKind::Euclidean;
        d.seed = seed.master_seed;
        dictionary = dictionary_r1(spec.dim_state, 64, d);
    }

    // Atoms (p_j, x0_j), fixed across iterations.
    EmpiricalMeasure initial;
    initial.dim = spec.dim_state;
    initial.marks.resize(M);
    initial.states.resize(M * m);
    std::vector<DriverSeed> seeds(M);
    parallel_for(M, options.workers, [&](std::size_t j) {
        seeds[j] = seed.with_particle(j);
        StreamRng state_rng(seeds[j].with_kind(DriverKind::InitialState));
        spec.initial_law.sample(state_rng, MutVec(initial.states.data() + j * m, m));
        StreamRng mark_rng(seeds[j].with_kind(DriverKind::Mark));
        initial.marks[j] = spec.mark_law.sample(mark_rng);
    });
    for (double p : initial.marks) {
        if (!(p > 0.0) || p > spec.mark_law.bound) {
            throw std::domain_error("solve_mkv_picard: mark outside (0, bound]");
        }
    }

    auto iterate = [&](const MeasureFlow& previous, std::size_t index) {
        detail::AtomBatch batch{initial.marks, initial.states, seeds, {}};
        auto out = detail::advance_batch(spec, previous, batch, 0, grid.steps, record_steps, true,
                                         options.workers);
        MeasureFlow flow;
        flow.grid = grid;
        flow.time_grid = snapshots;
        flow.every_step = !separable(spec);
        flow.step_fields = std::move(out.step_fields);
        flow.iteration = index;
        flow.M = M;
        flow.seed = seed;
        flow.model_id = spec.model_hash();
        const std::size_t block = M * m;
        for (std::size_t s = 0; s < snapshots.size(); ++s) {
            EmpiricalMeasure e;
            e.time = snapshots[s];
            e.dim = spec.dim_state;
            e.marks = initial.marks;
            const auto first = out.recorded.begin() + static_cast<std::ptrdiff_t>(s * block);
            e.states.assign(first, first + static_cast<std::ptrdiff_t>(block));
            flow.mean_curve.push_back(e.mean_state());
            flow.ensembles.push_back(std::move(e));
        }
        return flow;
    };

    PicardTrace trace;
    trace.tolerance = tol;
    MeasureFlow current = iterate(frozen_flow(spec, initial, grid, snapshots), 0);
    MeasureFlow best;
    double best_distance = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= max_iters; ++k) {
        MeasureFlow next = iterate(current, k);
        const FlowDistance d = flow_distance_detail(next, current, dictionary);
        trace.distances.push_back(d.value);
        trace.maximizers.push_back(d.maximizer);
        trace.iterations = k;
        current = std::move(next);
        if (d.value < tol) {
            trace.converged = true;
            break;
        }
        if (d.value < best_distance) {
            best_distance = d.value;
            best = current;
        }
    }
    MeasureFlow result = trace.converged || best.size() == 0 ? std::move(current) : std::move(best);
    result.trace = std::move(trace);
    return result;
}

FlowDistance flow_distance_detail(const MeasureFlow& a, const MeasureFlow& b,
                                  const std::vector<TestFunction>& dictionary) {
    if (dictionary.empty()) throw std::invalid_argument("flow_distance: empty dictionary");
    if (a.size() != b.size()) throw std::invalid_argument("flow_distance: grid mismatch (length)");
    for (std::size_t s = 0; s < a.size(); ++s) {
        if (!same_time(a.time_grid[s], b.time_grid[s])) {
            throw std::invalid_argument("flow_distance: grid mismatch at index " + std::to_string(s));
        }
    }
    const std::size_t F = dictionary.size();
    std::vector<double> best(F, 0.0);
    std::vector<std::size_t> at(F, 0);
    parallel_for(F, 0, [&](std::size_t f) {
        for (std::size_t s = 0; s < a.size(); ++s) {
            const double v = std::abs(pair_extended(a.ensembles[s], dictionary[f]) -
                                      pair_extended(b.ensembles[s], dictionary[f]));
            if (v > best[f]) {
                best[f] = v;
                at[f] = s;
            }
        }
    });
    FlowDistance out;
    out.maximizer = dictionary.front().id;
    for (std::size_t f = 0; f < F; ++f) {
        if (best[f] > out.value) {
            out.value = best[f];
            out.time = a.time_grid[at[f]];
            out.maximizer = dictionary[f].id;
        }
    }
    return out;
}

double flow_distance(const MeasureFlow& a, const MeasureFlow& b, const std::vector<TestFunction>& dictionary) {
    return flow_distance_detail(a, b, dictionary).value;
}

}  // namespace chaoslab
