#include "chaoslab/particles.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "chaoslab/parallel.hpp"
#include "euler_step.hpp"

namespace chaoslab {

std::size_t TrajectoryBundle::snapshot_of(double t) const {
    const double tolerance = 1e-9 * std::max(1.0, std::abs(t));
    for (std::size_t s = 0; s < time_grid.size(); ++s) {
        if (std::abs(time_grid[s] - t) <= tolerance) return s;
    }
    throw std::invalid_argument("time " + std::to_string(t) + " is not a snapshot time");
}

namespace {

struct InteractionMeans {
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> mean_state;
};

InteractionMeans interaction_means(const ModelSpec& spec, const std::vector<double>& states,
                                   std::size_t n, const SimulationOptions& options,
                                   const DriverSeed& seed, std::uint64_t step,
                                   const std::vector<std::uint64_t>& stream_ids) {
    const auto m = static_cast<std::size_t>(spec.dim_state);
    const MeasureField field(spec, states, n, 1.0 / static_cast<double>(n));
    InteractionMeans out{std::vector<double>(n), std::vector<double>(n),
                         field.summary().mean_state};
    parallel_for(n, options.workers, [&](std::size_t i) {
        const ConstVec x(states.data() + i * m, m);
        if (options.partners == 0 || options.partners >= n) {
            out.alpha[i] = field.alpha(x);
            out.beta[i] = field.beta(x);
            return;
        }
        // Subsampled estimator: `partners` uniform draws with replacement.
        const DriverSeed partner_seed =
            seed.with_particle(stream_ids[i]).with_kind(DriverKind::Probe);
        double a = 0.0, b = 0.0;
        for (std::size_t s = 0; s < options.partners; ++s) {
            const auto block = stream_block(partner_seed, step, static_cast<std::uint32_t>(s));
            const auto j = std::min(n - 1, static_cast<std::size_t>(to_open_unit(block[0], block[1]) *
                                                                   static_cast<double>(n)));
            const ConstVec y(states.data() + j * m, m);
            a += spec.kernel_alpha(x, y);
            b += spec.kernel_beta(x, y);
        }
        out.alpha[i] = a / static_cast<double>(options.partners);
        out.beta[i] = b / static_cast<double>(options.partners);
    });
    return out;
}

}  // namespace

TrajectoryBundle simulate_particles(const ModelSpec& spec, std::size_t n, double horizon, double dt,
                                    const DriverSeed& seed, const std::vector<double>& snapshot_times,
                                    const SimulationOptions& options) {
    spec.check_complete();
    if (n == 0) throw std::invalid_argument("simulate_particles: n must be >= 1");
    const TimeGrid grid = plan_time_grid(horizon, dt, spec.max_intensity(), options.jump_cap);
    auto snapshot_steps = grid.steps_of(snapshot_times);
    if (!std::is_sorted(snapshot_steps.begin(), snapshot_steps.end()) ||
        std::adjacent_find(snapshot_steps.begin(), snapshot_steps.end()) != snapshot_steps.end()) {
        throw std::invalid_argument("simulate_particles: snapshot times must be strictly increasing");
    }
    const auto m = static_cast<std::size_t>(spec.dim_state);

    TrajectoryBundle bundle;
    bundle.particles = n;
    bundle.dim = spec.dim_state;
    bundle.seed = seed;
    bundle.seed.stream.particle = 0;
    bundle.model_id = spec.model_hash();
    bundle.horizon = horizon;
    bundle.grid = grid;
    bundle.stream_ids = options.stream_ids;
    if (bundle.stream_ids.empty()) {
        bundle.stream_ids.resize(n);
        for (std::size_t i = 0; i < n; ++i) bundle.stream_ids[i] = i;
    } else if (bundle.stream_ids.size() != n) {
        throw std::invalid_argument("simulate_particles: stream_ids must have n entries");
    }
    const auto& ids = bundle.stream_ids;

    std::vector<double> x(n * m);
    bundle.marks.resize(n);
    if (options.init) {
        if (options.init->marks.size() != n || options.init->states.size() != n * m) {
            throw std::invalid_argument("simulate_particles: explicit init has wrong size");
        }
        bundle.marks = options.init->marks;
        x = options.init->states;
    } else {
        parallel_for(n, options.workers, [&](std::size_t i) {
            StreamRng state_rng(seed.with_particle(ids[i]).with_kind(DriverKind::InitialState));
            spec.initial_law.sample(state_rng, MutVec(x.data() + i * m, m));
            StreamRng mark_rng(seed.with_particle(ids[i]).with_kind(DriverKind::Mark));
            bundle.marks[i] = spec.mark_law.sample(mark_rng);
        });
    }
    for (double p : bundle.marks) {
        if (!(p > 0.0) || p > spec.mark_law.bound) {
            throw std::domain_error("simulate_particles: mark outside (0, bound]");
        }
    }

    std::vector<std::uint32_t> counts(n, 0);
    std::vector<double> compensator(n, 0.0);
    std::size_t next_snapshot = 0;

    auto record = [&](std::uint64_t step, const InteractionMeans& means) {
        bundle.time_grid.push_back(grid.time(step));
        bundle.states.insert(bundle.states.end(), x.begin(), x.end());
        bundle.jump_counts.insert(bundle.jump_counts.end(), counts.begin(), counts.end());
        bundle.compensators.insert(bundle.compensators.end(), compensator.begin(), compensator.end());
        bundle.alpha_means.insert(bundle.alpha_means.end(), means.alpha.begin(), means.alpha.end());
        bundle.beta_means.insert(bundle.beta_means.end(), means.beta.begin(), means.beta.end());
        ++next_snapshot;
    };

    std::vector<double> x_next(n * m);
    std::vector<unsigned char> finite(n, 1);
    std::vector<std::uint32_t> fired(n, 0);
    for (std::uint64_t step = 0;; ++step) {
        const InteractionMeans means = interaction_means(spec, x, n, options, seed, step, ids);
        if (next_snapshot < snapshot_steps.size() && snapshot_steps[next_snapshot] == step) {
            record(step, means);
        }
        if (step == grid.steps) break;

        const double t = grid.time(step);
        const double psi = spec.intensity_shape(t, means.mean_state);
        x_next = x;
        parallel_for(n, options.workers, [&](std::size_t i) {
            thread_local std::unique_ptr<detail::StepWorkspace> ws;
            if (!ws || ws->drift.size() != m || ws->noise.size() != static_cast<std::size_t>(spec.dim_noise)) {
                ws = std::make_unique<detail::StepWorkspace>(spec);
            }
            const MutVec xi(x_next.data() + i * m, m);
            const double intensity = bundle.marks[i] * psi;
            const DriverSeed particle_seed = seed.with_particle(ids[i]);
            fired[i] = static_cast<std::uint32_t>(detail::euler_step(
                spec, t, grid.dt, step, xi, means.alpha[i], means.beta[i], intensity,
                particle_seed.with_kind(DriverKind::Brownian),
                particle_seed.with_kind(DriverKind::Jump), *ws));
            finite[i] = detail::finite_state(xi) ? 1 : 0;
        });
        const auto bad = std::find(finite.begin(), finite.end(), 0);
        if (bad != finite.end()) {
            bundle.truncation = {true, static_cast<std::size_t>(bad - finite.begin()),
                                 grid.time(step + 1)};
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            counts[i] += fired[i];
            compensator[i] += bundle.marks[i] * psi * grid.dt;
        }
        x.swap(x_next);
    }
    return bundle;
}

EmpiricalMeasure empirical_measure(const TrajectoryBundle& bundle, double t) {
    const std::size_t s = bundle.snapshot_of(t);
    EmpiricalMeasure measure;
    measure.time = bundle.time_grid[s];
    measure.dim = bundle.dim;
    measure.marks = bundle.marks;
    const auto m = static_cast<std::size_t>(bundle.dim);
    const auto begin = bundle.states.begin() + static_cast<std::ptrdiff_t>(s * bundle.particles * m);
    measure.states.assign(begin, begin + static_cast<std::ptrdiff_t>(bundle.particles * m));
    return measure;
}

double lyapunov_constant(const ModelSpec& spec) noexcept {
    const double J = spec.constants.kernel_J;
    return spec.constants.growth_K_bar * (1.0 + spec.max_intensity() + 6.0 * J * J);
}

bool StabilityReport::pass() const noexcept {
    return std::all_of(radii.begin(), radii.end(), [](const RadiusReport& r) { return r.pass; });
}

StabilityReport stability_monitor(const TrajectoryBundle& bundle, const std::vector<double>& radii,
                                  double rate_constant) {
    if (bundle.snapshots() == 0 || bundle.time_grid.front() != 0.0) {
        throw std::invalid_argument("stability_monitor: bundle needs a t = 0 snapshot");
    }
    const std::size_t n = bundle.particles;
    const std::size_t S = bundle.snapshots();
    auto squared = [&](std::size_t s, std::size_t i) {
        double v = 0.0;
        for (double e : bundle.state(s, i)) v += e * e;
        return v;
    };

    StabilityReport report;
    report.times = bundle.time_grid;
    report.rate_constant = rate_constant;
    report.truncated = bundle.truncation.truncated;

    double initial_moment = 0.0;
    for (std::size_t i = 0; i < n; ++i) initial_moment += squared(0, i);
    initial_moment /= static_cast<double>(n);

    for (double radius : radii) {
        RadiusReport r;
        r.radius = radius;
        r.exit_times.assign(n, bundle.horizon);
        std::vector<std::size_t> stop(n, S - 1);  // snapshot index of t ^ tau_R
        std::size_t exits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            bool exited = false;
            for (std::size_t s = 0; s < S; ++s) {
                if (std::sqrt(squared(s, i)) >= radius) {
                    r.exit_times[i] = bundle.time_grid[s];
                    stop[i] = s;
                    exited = true;
                    break;
                }
            }
            if (!exited && bundle.truncation.truncated && bundle.truncation.particle == i) {
                r.exit_times[i] = bundle.truncation.time;
                exited = true;
            }
            if (exited && r.exit_times[i] < bundle.horizon) ++exits;
        }
        r.exit_fraction = static_cast<double>(exits) / static_cast<double>(n);

        for (std::size_t s = 0; s < S; ++s) {
            double sum = 0.0, sum_sq = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double v = squared(std::min(s, stop[i]), i);
                sum += v;
                sum_sq += v * v;
            }
            const double mean = sum / static_cast<double>(n);
            const double var =
                n > 1 ? std::max(0.0, (sum_sq - sum * mean) / static_cast<double>(n - 1)) : 0.0;
            const double se = std::sqrt(var / static_cast<double>(n));
            const double envelope =
                std::exp(rate_constant * bundle.time_grid[s]) * (1.0 + initial_moment);
            r.lyapunov_curve.push_back(mean);
            r.lyapunov_se.push_back(se);
            r.envelope.push_back(envelope);
            if (mean > envelope + 3.0 * se) r.pass = false;
        }
        report.radii.push_back(std::move(r));
    }
    return report;
}

}  // namespace chaoslab
