#include "chaoslab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "chaoslab/errors.hpp"
#include "chaoslab/hash.hpp"

namespace chaoslab {

InteractionKernel::InteractionKernel(PairKernelFn pair) : pair_(std::move(pair)) {
    if (!pair_) {
        throw std::invalid_argument("InteractionKernel: empty pair function");
    }
}

InteractionKernel::InteractionKernel(SeparableKernel separable) : separable_(std::move(separable)) {
    if (!separable_->left || !separable_->right) {
        throw std::invalid_argument("InteractionKernel: separable kernel needs left and right");
    }
}

InteractionKernel InteractionKernel::zero() {
    return InteractionKernel(SeparableKernel{[](ConstVec) { return 0.0; },
                                             [](ConstVec) { return 0.0; }, {}});
}

double InteractionKernel::operator()(ConstVec x, ConstVec y) const {
    if (pair_) {
        return pair_(x, y);
    }
    if (!separable_) {
        throw std::logic_error("InteractionKernel: evaluated before initialisation");
    }
    return from_summary(x, separable_->right(y));
}

double InteractionKernel::right(ConstVec y) const { return separable_->right(y); }

double InteractionKernel::from_summary(ConstVec x, double right_mean) const {
    const double offset = separable_->offset ? separable_->offset(x) : 0.0;
    return separable_->left(x) * right_mean + offset;
}

std::string ModelSpec::model_hash() const {
    std::string canonical = name;
    char buffer[64];
    for (const auto& [key, value] : parameters) {
        std::snprintf(buffer, sizeof(buffer), "%.17g", value);
        canonical += ';' + key + '=' + buffer;
    }
    return hex64(fnv1a64(canonical));
}

void ModelSpec::check_complete() const {
    if (dim_state <= 0 || dim_noise <= 0) {
        throw std::invalid_argument("ModelSpec '" + name + "': dimensions must be positive");
    }
    if (!drift || !diffusion || !intensity_shape || !mark_law.sample || !initial_law.sample) {
        throw std::invalid_argument("ModelSpec '" + name + "': missing coefficient function");
    }
    if (!jump_free && !jump) {
        throw std::invalid_argument("ModelSpec '" + name + "': jump map missing");
    }
    if (!(intensity_bound > 0.0) || !(mark_law.bound > 0.0)) {
        throw std::invalid_argument("ModelSpec '" + name + "': C_psi and mark bound must be > 0");
    }
}

ProbeBox ProbeBox::cube(int dim, double half_width, double horizon) {
    ProbeBox box;
    box.lower.assign(static_cast<std::size_t>(dim), -half_width);
    box.upper.assign(static_cast<std::size_t>(dim), half_width);
    box.interaction_lower = -half_width;
    box.interaction_upper = half_width;
    box.horizon = horizon;
    return box;
}

namespace {

struct CoefficientSample {
    std::vector<double> drift;
    std::vector<double> diffusion;
    std::vector<double> jump;
};

double squared_norm(ConstVec v) {
    double s = 0.0;
    for (double e : v) s += e * e;
    return s;
}

bool all_finite(ConstVec v) {
    return std::all_of(v.begin(), v.end(), [](double e) { return std::isfinite(e); });
}

CoefficientSample evaluate(const ModelSpec& spec, double t, ConstVec x, double y) {
    const auto m = static_cast<std::size_t>(spec.dim_state);
    const auto d = static_cast<std::size_t>(spec.dim_noise);
    CoefficientSample s{std::vector<double>(m), std::vector<double>(m * d),
                        std::vector<double>(m, 0.0)};
    spec.drift(t, x, y, s.drift);
    spec.diffusion(t, x, y, s.diffusion);
    if (!spec.jump_free) {
        spec.jump(t, x, s.jump);
    }
    if (!all_finite(s.drift) || !all_finite(s.diffusion) || !all_finite(s.jump)) {
        std::vector<double> point(x.begin(), x.end());
        point.push_back(y);
        throw NumericalAbort("validate_model: non-finite coefficient output at probe point", t,
                             std::move(point));
    }
    return s;
}

double distance(ConstVec a, ConstVec b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

bool exceeds(double lhs, double rhs) { return lhs > rhs * (1.0 + 1e-12) + 1e-12; }

}  // namespace

ValidationReport validate_model(const ModelSpec& spec, std::size_t probes,
                                const std::vector<double>& radius_grid, std::uint64_t seed,
                                const ProbeBox& box) {
    spec.check_complete();
    if (probes == 0) {
        throw std::invalid_argument("validate_model: probes must be >= 1");
    }
    for (double r : radius_grid) {
        if (!(r > 0.0)) throw std::invalid_argument("validate_model: radii must be positive");
    }
    const auto m = static_cast<std::size_t>(spec.dim_state);
    if (box.lower.size() != m || box.upper.size() != m) {
        throw std::invalid_argument("validate_model: probe box dimension mismatch");
    }

    const DriverSeed probe_seed{seed, {replication_in(StreamDomain::Validation, 0), 0,
                                       DriverKind::Probe}};
    StreamRng rng(probe_seed);
    StreamRng mark_rng(probe_seed.with_kind(DriverKind::Mark));
    const double K_bar = spec.constants.growth_K_bar;

    ValidationReport report;
    report.probes = probes;
    report.worst_growth_ratio = -std::numeric_limits<double>::infinity();
    report.worst_jump_ratio = -std::numeric_limits<double>::infinity();

    std::vector<double> x(m);
    for (std::size_t probe = 0; probe < probes; ++probe) {
        const double t = rng.uniform(0.0, box.horizon);
        for (std::size_t k = 0; k < m; ++k) x[k] = rng.uniform(box.lower[k], box.upper[k]);
        const double y = rng.uniform(box.interaction_lower, box.interaction_upper);
        const auto c = evaluate(spec, t, x, y);

        double inner = 0.0, inner_jump = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            inner += x[k] * c.drift[k];
            inner_jump += x[k] * c.jump[k];
        }
        const double x2 = squared_norm(x);
        const double lhs = 2.0 * inner + squared_norm(c.diffusion);
        const double base = 1.0 + x2 + y * y;
        report.worst_growth_ratio = std::max(report.worst_growth_ratio, lhs / base);
        if (exceeds(lhs, K_bar * base)) {
            report.violations.push_back({"A'_grow", t, x, y, lhs, K_bar * base});
        }
        const double lhs_jump = squared_norm(c.jump) + 2.0 * inner_jump;
        const double base_jump = 1.0 + x2;
        report.worst_jump_ratio = std::max(report.worst_jump_ratio, lhs_jump / base_jump);
        if (exceeds(lhs_jump, K_bar * base_jump)) {
            report.violations.push_back({"A'_grow(jump)", t, x, y, lhs_jump, K_bar * base_jump});
        }

        const double psi = spec.intensity_shape(t, x);
        if (!std::isfinite(psi)) {
            throw NumericalAbort("validate_model: non-finite psi at probe point", t, x);
        }
        if (!(psi > 0.0) || exceeds(psi, spec.intensity_bound)) {
            report.violations.push_back({"psi_range", t, x, y, psi, spec.intensity_bound});
        }
        const double mark = spec.mark_law.sample(mark_rng);
        if (!(mark > 0.0) || exceeds(mark, spec.mark_law.bound)) {
            report.violations.push_back({"mark_range", t, {}, 0.0, mark, spec.mark_law.bound});
        }
    }

    // Local Lipschitz ratios: half of the pairs are far apart inside B_R,
    // half are close (finite-difference scale) to catch steep gradients.
    report.radii = radius_grid;
    std::vector<double> x1(m), x2(m);
    for (double radius : radius_grid) {
        double worst = 0.0;
        for (std::size_t probe = 0; probe < probes; ++probe) {
            const double t = rng.uniform(0.0, box.horizon);
            auto ball_point = [&](std::vector<double>& out) {
                double norm = 0.0;
                for (auto& e : out) {
                    e = rng.normal();
                    norm += e * e;
                }
                norm = std::sqrt(norm);
                const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(m));
                for (auto& e : out) e *= r / norm;
            };
            ball_point(x1);
            double y1 = rng.uniform(-radius, radius);
            double y2;
            if (probe % 2 == 0) {
                ball_point(x2);
                y2 = rng.uniform(-radius, radius);
            } else {
                const double step = 1e-4 * (1.0 + radius);
                for (std::size_t k = 0; k < m; ++k) x2[k] = x1[k] + step * rng.normal();
                y2 = y1 + step * rng.normal();
            }
            const double denominator = distance(x1, x2) + std::abs(y1 - y2);
            if (denominator <= 0.0) continue;
            const auto c1 = evaluate(spec, t, x1, y1);
            const auto c2 = evaluate(spec, t, x2, y2);
            const double numerator = distance(c1.drift, c2.drift) +
                                     distance(c1.diffusion, c2.diffusion) +
                                     distance(c1.jump, c2.jump);
            worst = std::max(worst, numerator / denominator);
        }
        report.worst_local_lipschitz.push_back(worst);
    }
    return report;
}

ValidationReport validate_model(const ModelSpec& spec, std::size_t probes,
                                const std::vector<double>& radius_grid, std::uint64_t seed) {
    return validate_model(spec, probes, radius_grid, seed, ProbeBox::cube(spec.dim_state, 10.0));
}

}  // namespace chaoslab
