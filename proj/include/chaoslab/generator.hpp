#pragma once

// Generators L_c + L_j, the weak-form (FPK) residual, and Monte Carlo
// estimates of the propagator P_{t,u} phi with its identities and gradient
// bound.

#include <cstdint>
#include <vector>

#include "chaoslab/flow.hpp"
#include "chaoslab/measure.hpp"
#include "chaoslab/model.hpp"
#include "chaoslab/test_function.hpp"

namespace chaoslab {

/// (L_c + L_j) phi at (t, p, x) with the pairings taken from `field`:
///   d_x phi . f(t, x, <nu, alpha(x, .)>) + 1/2 tr[d_x^2 phi g g^T]
///   + p (phi(p, x + h(t, x)) - phi(p, x)) psi(t, <nu, I>).
double apply_generator(const ModelSpec& spec, const MeasureField& field, const TestFunction& phi, double t,
                       double p, ConstVec x);
double apply_generator(const ModelSpec& spec, const EmpiricalMeasure& nu, const TestFunction& phi, double t,
                       double p, ConstVec x);

struct ResidualReport {
    std::vector<double> times;
    std::vector<double> residual;  // <mu_t, phi> - <mu_0, phi> - int_0^t <mu_s, L phi> ds
    std::vector<double> se;        // from the per-atom path decomposition
    double max_abs = 0.0;
    double se_at_max = 0.0;
    double time_at_max = 0.0;
    double max_z = 0.0;  // max |residual| / se over times with se > 0
};

/// Weak-form defect on `times` (a subset of the flow grid, or empty for the
/// whole grid), integrating by trapezoid over the flow grid. Atom j of every
/// slice must be the same path, as in flows from solve_mkv_picard.
ResidualReport fpk_residual_detail(const ModelSpec& spec, const MeasureFlow& flow, const TestFunction& phi,
                                   const std::vector<double>& times = {}, int workers = 0);
double fpk_residual(const ModelSpec& spec, const MeasureFlow& flow, const TestFunction& phi,
                    const std::vector<double>& times = {});

struct MonteCarloEstimate {
    double estimate = 0.0;
    double standard_error = 0.0;
};

/// Mean of phi(p, X_u^{t,p,x}) over `reps` decoupled paths against the
/// flow. Path r uses seed.with_particle(seed.stream.particle + r).
MonteCarloEstimate propagator_estimate(const ModelSpec& spec, const MeasureFlow& flow, double t, double u,
                                       double p, ConstVec x, const TestFunction& phi, std::size_t reps,
                                       const DriverSeed& seed, int workers = 0);

/// Seed for inner loop `outer` of a nested estimate, disjoint from the
/// outer streams.
DriverSeed nested_seed(const DriverSeed& root, std::uint64_t outer) noexcept;

struct ConstancyReport {
    std::vector<double> times;
    std::vector<double> values;  // <mu_t, P_{t,u} phi>
    std::vector<double> se;
    double max_deviation = 0.0;
    double pooled_se = 0.0;  // SE of the maximizing pair's difference
    bool within(double sigmas) const noexcept { return max_deviation <= sigmas * pooled_se; }
};

/// Nested Monte Carlo: `outer` atoms of mu_t, `reps` inner paths each.
ConstancyReport propagator_constancy_check(const ModelSpec& spec, const MeasureFlow& flow, const TestFunction& phi,
                                           double u, const std::vector<double>& t_grid, std::size_t reps,
                                           const DriverSeed& seed, std::size_t outer = 1000, int workers = 0);

struct FlowPropertyReport {
    MonteCarloEstimate direct;   // P_{t,u} phi (p, x)
    MonteCarloEstimate nested;   // P_{t,s} (P_{s,u} phi) (p, x)
    double deviation = 0.0;
    double pooled_se = 0.0;
    bool within(double sigmas) const noexcept { return deviation <= sigmas * pooled_se; }
};

FlowPropertyReport flow_property_check(const ModelSpec& spec, const MeasureFlow& flow, const TestFunction& phi,
                                       double t, double s, double u, double p, ConstVec x, std::size_t reps,
                                       std::size_t inner, const DriverSeed& seed, int workers = 0);

/// C = L_fbar (1 + J^2) + 2 C_psi (1 + L_h^2) * p_bound.
double gradient_constant(const ModelSpec& spec) noexcept;

struct GradientProbe {
    std::vector<double> x;
    std::vector<double> gradient;     // central differences per coordinate
    std::vector<double> gradient_se;
    double norm = 0.0;
    double norm_se = 0.0;
    bool flagged = false;             // norm > bound + 3 SE
    bool exceeds_sharper = false;     // norm > sharper bound + 3 SE (reported only)
};

struct GradientReport {
    double s = 0.0, t = 0.0, p = 0.0;
    double constant = 0.0;
    double bound = 0.0;          // exp(C p (t - s))
    double sharper_bound = 0.0;  // exp(C p (t - s) / 2)
    std::vector<GradientProbe> probes;
    std::size_t flagged = 0;
    bool pass() const noexcept { return flagged == 0; }
};

/// Central finite differences of P_{s,t} phi with common random numbers
/// across each +- pair. eps <= 0 selects 1e-3 (1 + |x|) per probe.
GradientReport gradient_bound_check(const ModelSpec& spec, const MeasureFlow& flow, const TestFunction& phi,
                                    double s, double t, double p, const std::vector<std::vector<double>>& x_probes,
                                    double eps, std::size_t reps, double C, const DriverSeed& seed,
                                    int workers = 0);

}  // namespace chaoslab
