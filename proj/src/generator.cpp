#include "chaoslab/generator.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "chaoslab/parallel.hpp"
#include "decoupled.hpp"

namespace chaoslab {

namespace {

bool same_time(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

struct GeneratorWorkspace {
    explicit GeneratorWorkspace(const ModelSpec& spec)
        : m(static_cast<std::size_t>(spec.dim_state)),
          d(static_cast<std::size_t>(spec.dim_noise)),
          drift(m), diffusion(m * d), jump(m), grad(m), hess(m * m), shifted(m) {}

    std::size_t m, d;
    std::vector<double> drift, diffusion, jump, grad, hess, shifted;
};

double generator_with(const ModelSpec& spec, const MeasureField& field, const TestFunction& phi, double t, double p,
                      ConstVec x, double psi, GeneratorWorkspace& ws) {
    const std::size_t m = ws.m, d = ws.d;
    spec.drift(t, x, field.alpha(x), ws.drift);
    spec.diffusion(t, x, field.beta(x), ws.diffusion);
    phi.grad_x(p, x, ws.grad);
    phi.hess_x(p, x, ws.hess);
    double out = 0.0;
    for (std::size_t k = 0; k < m; ++k) out += ws.grad[k] * ws.drift[k];
    double trace = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double h = ws.hess[i * m + j];
            if (h == 0.0) continue;
            double ggt = 0.0;
            for (std::size_t k = 0; k < d; ++k) ggt += ws.diffusion[i * d + k] * ws.diffusion[j * d + k];
            trace += h * ggt;
        }
    }
    out += 0.5 * trace;
    if (!spec.jump_free) {
        spec.jump(t, x, ws.jump);
        for (std::size_t k = 0; k < m; ++k) ws.shifted[k] = x[k] + ws.jump[k];
        out += p * (phi.value(p, ws.shifted) - phi.value(p, x)) * psi;
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double e : v) s += e;
    return s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double e : v) ss += (e - mean) * (e - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

void require_drivable(const ModelSpec& spec, const MeasureFlow& flow) {
    if (!flow.drives_paths(spec)) {
        throw std::invalid_argument("propagator: flow cannot drive decoupled paths");
    }
}

// phi(p_i, X_u^i) for paths started at (t, p_i, x_i).
std::vector<double> propagate_values(const ModelSpec& spec, const MeasureFlow& flow, double t, double u,
                                     detail::AtomBatch batch, const TestFunction& phi, int workers) {
    const auto m = static_cast<std::size_t>(spec.dim_state);
    const std::size_t n = batch.size();
    std::vector<double> values(n);
    if (!same_time(t, u)) {
        const auto start = flow.grid.step_of(t);
        const auto end = flow.grid.step_of(u);
        detail::advance_batch(spec, flow, batch, start, end, {}, false, workers);
    }
    for (std::size_t i = 0; i < n; ++i) values[i] = phi.value(batch.marks[i], ConstVec(batch.states.data() + i * m, m));
    return values;
}

void check_times(const MeasureFlow& flow, double t, double u) {
    if (!(t >= 0.0 && t <= u + 1e-12 && u <= flow.grid.horizon + 1e-12)) {
        throw std::invalid_argument("propagator: need 0 <= t <= u <= horizon");
    }
}

}  // namespace

double apply_generator(const ModelSpec& spec, const MeasureField& field, const TestFunction& phi, double t,
                       double p, ConstVec x) {
    GeneratorWorkspace ws(spec);
    const double psi = spec.jump_free ? 0.0 : spec.intensity_shape(t, field.mean_state());
    return generator_with(spec, field, phi, t, p, x, psi, ws);
}

double apply_generator(const ModelSpec& spec, const EmpiricalMeasure& nu, const TestFunction& phi, double t,
                       double p, ConstVec x) {
    return apply_generator(spec, MeasureField(spec, nu), phi, t, p, x);
}

ResidualReport fpk_residual_detail(const ModelSpec& spec, const MeasureFlow& flow, const TestFunction& phi,
                                   const std::vector<double>& times, int workers) {
    if (flow.size() == 0 || flow.time_grid.front() != 0.0) {
        throw std::invalid_argument("fpk_residual: flow must start at t = 0");
    }
    const std::size_t M = flow.ensembles.front().size();
    const auto m = static_cast<std::size_t>(spec.dim_state);
    for (const auto& e : flow.ensembles) {
        if (e.size() != M) throw std::invalid_argument("fpk_residual: slices differ in atom count");
    }
    std::vector<unsigned char> wanted(flow.size(), times.empty() ? 1 : 0);
    for (double t : times) wanted[flow.slice_index(t)] = 1;

    std::vector<double> phi0(M), integral(M, 0.0), previous(M), current(M), y(M);
    ResidualReport report;
    for (std::size_t s = 0; s < flow.size(); ++s) {
        const auto& e = flow.ensembles[s];
        const MeasureField field(spec, e);
        const double t = flow.time_grid[s];
        const double psi = spec.jump_free ? 0.0 : spec.intensity_shape(t, field.mean_state());
        parallel_for(M, workers, [&](std::size_t j) {
            thread_local std::unique_ptr<GeneratorWorkspace> ws;
            if (!ws || ws->m != m || ws->d != static_cast<std::size_t>(spec.dim_noise)) {
                ws = std::make_unique<GeneratorWorkspace>(spec);
            }
            current[j] = generator_with(spec, field, phi, t, e.marks[j], e.state(j), psi, *ws);
            const double value = phi.value(e.marks[j], e.state(j));
            if (s == 0) {
                phi0[j] = value;
            } else {
                integral[j] += 0.5 * (t - flow.time_grid[s - 1]) * (previous[j] + current[j]);
            }
            y[j] = value - phi0[j] - integral[j];
        });
        previous.swap(current);
        if (!wanted[s]) continue;
        const double r = mean_of(y);
        const double se = se_of(y, r);
        report.times.push_back(t);
        report.residual.push_back(r);
        report.se.push_back(se);
        if (std::abs(r) >= report.max_abs) {
            report.max_abs = std::abs(r);
            report.se_at_max = se;
            report.time_at_max = t;
        }
        if (se > 0.0) report.max_z = std::max(report.max_z, std::abs(r) / se);
    }
    return report;
}

double fpk_residual(const ModelSpec& spec, const MeasureFlow& flow, const TestFunction& phi,
                    const std::vector<double>& times) {
    return fpk_residual_detail(spec, flow, phi, times).max_abs;
}

MonteCarloEstimate propagator_estimate(const ModelSpec& spec, const MeasureFlow& flow, double t, double u,
                                       double p, ConstVec x, const TestFunction& phi, std::size_t reps,
                                       const DriverSeed& seed, int workers) {
    check_times(flow, t, u);
    if (same_time(t, u)) return {phi.value(p, x), 0.0};
    require_drivable(spec, flow);
    if (reps < 1) throw std::invalid_argument("propagator_estimate: reps must be >= 1");
    if (x.size() != static_cast<std::size_t>(spec.dim_state)) {
        throw std::invalid_argument("propagator_estimate: x has the wrong dimension");
    }
    detail::AtomBatch batch;
    batch.marks.assign(reps, p);
    for (std::size_t r = 0; r < reps; ++r) {
        batch.states.insert(batch.states.end(), x.begin(), x.end());
        batch.seeds.push_back(seed.with_particle(seed.stream.particle + r));
    }
    const auto values = propagate_values(spec, flow, t, u, std::move(batch), phi, workers);
    const double mean = mean_of(values);
    return {mean, se_of(values, mean)};
}

DriverSeed nested_seed(const DriverSeed& root, std::uint64_t outer) noexcept {
    DriverSeed s = root;
    const std::uint64_t domain = root.stream.replication & 0xFF00'0000'0000'0000ULL;
    const std::uint64_t low = splitmix64(root.stream.replication ^ splitmix64(outer + 1)) & 0x00FF'FFFF'FFFF'FFFFULL;
    s.stream.replication = domain | low;
    s.stream.particle = 0;
    return s;
}

ConstancyReport propagator_constancy_check(const ModelSpec& spec, const MeasureFlow& flow, const TestFunction& phi,
                                           double u, const std::vector<double>& t_grid, std::size_t reps,
                                           const DriverSeed& seed, std::size_t outer, int workers) {
    if (reps < 1 || outer < 1) throw std::invalid_argument("propagator_constancy_check: empty sample");
    ConstancyReport report;
    for (std::size_t g = 0; g < t_grid.size(); ++g) {
        const double t = t_grid[g];
        check_times(flow, t, u);
        const auto& slice = flow.slice(t);
        const std::size_t K = std::min(outer, slice.size());
        detail::AtomBatch batch;
        for (std::size_t j = 0; j < K; ++j) {
            const DriverSeed inner = nested_seed(seed, g * slice.size() + j);
            for (std::size_t r = 0; r < reps; ++r) {
                batch.marks.push_back(slice.marks[j]);
                const auto x = slice.state(j);
                batch.states.insert(batch.states.end(), x.begin(), x.end());
                batch.seeds.push_back(inner.with_particle(r));
            }
        }
        if (!same_time(t, u)) require_drivable(spec, flow);
        const auto values = propagate_values(spec, flow, t, u, std::move(batch), phi, workers);
        std::vector<double> per_atom(K, 0.0);
        for (std::size_t j = 0; j < K; ++j) {
            for (std::size_t r = 0; r < reps; ++r) per_atom[j] += values[j * reps + r];
            per_atom[j] /= static_cast<double>(reps);
        }
        const double mean = mean_of(per_atom);
        report.times.push_back(t);
        report.values.push_back(mean);
        report.se.push_back(se_of(per_atom, mean));
    }
    for (std::size_t a = 0; a < report.times.size(); ++a) {
        for (std::size_t b = a + 1; b < report.times.size(); ++b) {
            const double dev = std::abs(report.values[a] - report.values[b]);
            if (dev >= report.max_deviation) {
                report.max_deviation = dev;
                report.pooled_se = std::hypot(report.se[a], report.se[b]);
            }
        }
    }
    return report;
}

FlowPropertyReport flow_property_check(const ModelSpec& spec, const MeasureFlow& flow, const TestFunction& phi,
                                       double t, double s, double u, double p, ConstVec x, std::size_t reps,
                                       std::size_t inner, const DriverSeed& seed, int workers) {
    check_times(flow, t, s);
    check_times(flow, s, u);
    if (reps < 2 || inner < 1) throw std::invalid_argument("flow_property_check: sample too small");
    const auto m = static_cast<std::size_t>(spec.dim_state);
    FlowPropertyReport report;
    report.direct = propagator_estimate(spec, flow, t, u, p, x, phi, reps, nested_seed(seed, 0), workers);

    // Outer paths to s, then `inner` continuations from each endpoint.
    detail::AtomBatch outer;
    const DriverSeed outer_seed = nested_seed(seed, 1);
    for (std::size_t r = 0; r < reps; ++r) {
        outer.marks.push_back(p);
        outer.states.insert(outer.states.end(), x.begin(), x.end());
        outer.seeds.push_back(outer_seed.with_particle(r));
    }
    if (!same_time(t, s)) {
        require_drivable(spec, flow);
        detail::advance_batch(spec, flow, outer, flow.grid.step_of(t), flow.grid.step_of(s), {}, false, workers);
    }
    detail::AtomBatch continuation;
    for (std::size_t r = 0; r < reps; ++r) {
        const DriverSeed cont = nested_seed(seed, 2 + r);
        for (std::size_t l = 0; l < inner; ++l) {
            continuation.marks.push_back(p);
            continuation.states.insert(continuation.states.end(), outer.states.begin() + static_cast<std::ptrdiff_t>(r * m),
                                       outer.states.begin() + static_cast<std::ptrdiff_t>((r + 1) * m));
            continuation.seeds.push_back(cont.with_particle(l));
        }
    }
    const auto values = propagate_values(spec, flow, s, u, std::move(continuation), phi, workers);
    std::vector<double> per_outer(reps, 0.0);
    for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t l = 0; l < inner; ++l) per_outer[r] += values[r * inner + l];
        per_outer[r] /= static_cast<double>(inner);
    }
    const double mean = mean_of(per_outer);
    report.nested = {mean, se_of(per_outer, mean)};
    report.deviation = std::abs(report.direct.estimate - report.nested.estimate);
    report.pooled_se = std::hypot(report.direct.standard_error, report.nested.standard_error);
    return report;
}

double gradient_constant(const ModelSpec& spec) noexcept {
    const auto& c = spec.constants;
    return c.drift_one_sided_L * (1.0 + c.kernel_J * c.kernel_J) +
           2.0 * spec.intensity_bound * (1.0 + c.jump_L_h * c.jump_L_h) * spec.mark_law.bound;
}

GradientReport gradient_bound_check(const ModelSpec& spec, const MeasureFlow& flow, const TestFunction& phi,
                                    double s, double t, double p, const std::vector<std::vector<double>>& x_probes,
                                    double eps, std::size_t reps, double C, const DriverSeed& seed, int workers) {
    check_times(flow, s, t);
    if (reps < 2) throw std::invalid_argument("gradient_bound_check: reps must be >= 2");
    const auto m = static_cast<std::size_t>(spec.dim_state);
    GradientReport report;
    report.s = s;
    report.t = t;
    report.p = p;
    report.constant = C;
    report.bound = std::exp(C * p * (t - s));
    report.sharper_bound = std::exp(0.5 * C * p * (t - s));
    for (std::size_t probe = 0; probe < x_probes.size(); ++probe) {
        const auto& x = x_probes[probe];
        if (x.size() != m) throw std::invalid_argument("gradient_bound_check: probe has the wrong dimension");
        double norm_x = 0.0;
        for (double e : x) norm_x += e * e;
        const double h = eps > 0.0 ? eps : 1e-3 * (1.0 + std::sqrt(norm_x));
        GradientProbe g;
        g.x = x;
        // Both sides of every coordinate share the probe's streams.
        const DriverSeed probe_seed = nested_seed(seed, probe);
        detail::AtomBatch batch;
        for (std::size_t k = 0; k < m; ++k) {
            for (int side = 0; side < 2; ++side) {
                for (std::size_t r = 0; r < reps; ++r) {
                    batch.marks.push_back(p);
                    std::vector<double> xs = x;
                    xs[k] += side == 0 ? h : -h;
                    batch.states.insert(batch.states.end(), xs.begin(), xs.end());
                    batch.seeds.push_back(probe_seed.with_particle(r));
                }
            }
        }
        if (!same_time(s, t)) require_drivable(spec, flow);
        const auto values = propagate_values(spec, flow, s, t, std::move(batch), phi, workers);
        double norm2 = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            std::vector<double> diff(reps);
            for (std::size_t r = 0; r < reps; ++r) {
                diff[r] = (values[(2 * k) * reps + r] - values[(2 * k + 1) * reps + r]) / (2.0 * h);
            }
            const double mean = mean_of(diff);
            g.gradient.push_back(mean);
            g.gradient_se.push_back(se_of(diff, mean));
            norm2 += mean * mean;
        }
        g.norm = std::sqrt(norm2);
        double var = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double w = g.norm > 0.0 ? g.gradient[k] / g.norm : 1.0;
            var += w * w * g.gradient_se[k] * g.gradient_se[k];
        }
        g.norm_se = std::sqrt(var);
        g.flagged = g.norm > report.bound + 3.0 * g.norm_se;
        g.exceeds_sharper = g.norm > report.sharper_bound + 3.0 * g.norm_se;
        if (g.flagged) ++report.flagged;
        report.probes.push_back(std::move(g));
    }
    return report;
}

}  // namespace chaoslab
