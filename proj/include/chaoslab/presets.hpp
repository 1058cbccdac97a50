#pragma once

// Built-in model presets and a name registry for config-driven selection.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "chaoslab/model.hpp"

namespace chaoslab {

/// FitzHugh-Nagumo network with maximum-conductance synapses, state
/// (V, w, y) with y the fraction of open channels.
///
/// The numeric defaults are an illustrative configuration; every value can
/// be overridden from the [model] table of a config file.
struct FhnParams {
    double J = 1.0;          // synaptic weight
    double V_rev = 1.0;      // reversal potential
    double sigma = 0.2;      // synaptic weight noise
    double sigma_ext = 0.5;  // external noise
    double a = 0.7;
    double b = 0.8;
    double c = 0.08;
    double a_r = 1.0;
    double a_d = 1.0;
    double theta = 0.2;  // slope of the presynaptic sigmoid
    double V = 2.0;      // sigmoid threshold
    double transmitter_max = 1.0;  // T_max multiplying a_r
    double input_current = 0.4;    // I(t) = input_current (constant unless input_fn set)
    std::function<double(double)> input_fn;  // optional time-varying input
    double input_bound = 0.4;                // sup |I| on [0, T]

    // Jump extension: h = (jump_size, 0, 0), psi = psi0, p_i = mark.
    double jump_size = 0.5;
    double psi0 = 1.0;
    double mark = 1.0;

    // Initial law: independent Gaussians, y clipped to [0, 1].
    double V0_mean = 0.0, V0_sd = 0.4;
    double w0_mean = 0.5, w0_sd = 0.4;
    double y0_mean = 0.3, y0_sd = 0.05;

    /// Throws std::invalid_argument unless all scalar parameters are positive.
    void check() const;
};

/// chi(y) = 0.1 exp(-1 / (2 (1 - (2y - 1)^2))) on (0, 1), 0 elsewhere.
double fhn_chi(double y) noexcept;
/// Presynaptic activation a_r T_max / (1 + exp(-theta (V - V_thr))).
double fhn_activation(const FhnParams& params, double v) noexcept;
/// Argument of the square root in the (3,3) diffusion entry, before clamping.
double fhn_sqrt_argument(const FhnParams& params, double v, double y) noexcept;
/// Analytic bound K-bar valid for all x, y (derived with Young's inequality).
double fhn_growth_constant(const FhnParams& params) noexcept;

ModelSpec fhn_model(const FhnParams& params);

/// Closed-form benchmark: f = -a x + b z, alpha(x, y) = y, g = sigma,
/// h = jump_size, psi = psi0, p_i = mark, X_0 ~ N(x0_mean, x0_sd^2).
struct OuParams {
    double a = 1.0;
    double b = 0.5;
    double sigma = 0.5;
    double jump_size = 0.5;
    double psi0 = 1.0;
    double mark = 1.0;
    double x0_mean = 1.0;
    double x0_sd = 0.5;
    double psi_bound = 0.0;  // C_psi; 0 means "use psi0"

    void check() const;
    /// m(t) solving m' = (-a + b) m + mark psi0 jump_size, m(0) = x0_mean.
    double limit_mean(double t) const noexcept;
    /// v(t) solving v' = -2 a v + sigma^2 + mark psi0 jump_size^2, v(0) = x0_sd^2.
    double limit_variance(double t) const noexcept;
    /// Analytic K-bar = max(sigma^2, |b|, [jump_size != 0] max(2 jump_size^2, 1)).
    double growth_constant() const noexcept;
};

ModelSpec ou_benchmark_model(const OuParams& params);
ModelSpec ou_benchmark_model(double a, double b, double sigma, double jump_size, double psi0);

/// f = g = h = 0, states frozen at the initial law N(0, 1).
ModelSpec zero_model(int dim = 1);

/// Scalar f(x) = x^3 with unit noise; explodes in finite time.
ModelSpec cubic_model();

/// Name -> factory registry; "fhn", "ou", "zero" and "cubic" are built in.
/// Factories receive the flat parameter table of the [model] section.
using ModelFactory = std::function<ModelSpec(const std::map<std::string, double>&)>;

void register_model(const std::string& name, ModelFactory factory);
std::vector<std::string> registered_models();
/// Throws UsageError for unknown names or unknown parameter keys.
ModelSpec make_model(const std::string& name, const std::map<std::string, double>& params);

}  // namespace chaoslab
