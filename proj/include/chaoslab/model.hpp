#pragma once

// Coefficient bundle of a mean-field jump-diffusion system
//
//   dX^i = f(t, X^i, <mu^n, alpha(X^i, .)>) dt + g(t, X^i, <mu^n, beta(X^i, .)>) dW^i
//          + h(t, X^i_-) dN^i,       lambda_i = p_i psi(t, mean of X),
//
// plus the randomized probing that checks the growth and local Lipschitz
// certificates a spec declares.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/rng.hpp"

namespace chaoslab {

using ConstVec = std::span<const double>;
using MutVec = std::span<double>;

using DriftFn = std::function<void(double t, ConstVec x, double z, MutVec out)>;
/// Writes the m x d diffusion matrix row-major into `out`.
using DiffusionFn = std::function<void(double t, ConstVec x, double z, MutVec out)>;
using JumpFn = std::function<void(double t, ConstVec x, MutVec out)>;
using PairKernelFn = std::function<double(ConstVec x, ConstVec y)>;
using IntensityShapeFn = std::function<double(double t, ConstVec x_mean)>;
using ScalarOfStateFn = std::function<double(ConstVec x)>;

/// Rank-one kernel  k(x, y) = left(x) * right(y) + offset(x).
/// Its measure pairing costs O(1) per query once the mean of right(.) is known.
struct SeparableKernel {
    ScalarOfStateFn left;
    ScalarOfStateFn right;
    ScalarOfStateFn offset;  // may be empty (treated as 0)
};

/// Interaction kernel alpha or beta. `separable`, when present, must agree
/// with `pair` pointwise; the integrators then use the O(n) pairing.
class InteractionKernel {
public:
    InteractionKernel() = default;
    explicit InteractionKernel(PairKernelFn pair);
    explicit InteractionKernel(SeparableKernel separable);

    static InteractionKernel zero();

    double operator()(ConstVec x, ConstVec y) const;
    bool is_separable() const noexcept { return separable_.has_value(); }
    const SeparableKernel& separable() const { return *separable_; }

    /// right(y), needed to build the per-ensemble summary of a separable kernel.
    double right(ConstVec y) const;
    /// left(x) * summary + offset(x).
    double from_summary(ConstVec x, double right_mean) const;

private:
    PairKernelFn pair_;
    std::optional<SeparableKernel> separable_;
};

struct MarkLaw {
    std::function<double(StreamRng&)> sample;
    double limit = 1.0;  // p_i -> p
    double bound = 1.0;  // 0 < p_i <= bound
};

struct InitialLaw {
    std::function<void(StreamRng&, MutVec out)> sample;
    std::vector<double> mean;  // E[X_0], used by the analytic oracles
    double second_moment = 0.0;  // E|X_0|^2
};

/// Growth / Lipschitz certificates declared by a spec.
struct ModelConstants {
    double growth_K = 0.0;      // particle-system growth constant K
    double growth_K_bar = 0.0;  // limit-equation growth constant K-bar
    double kernel_J = 0.0;      // Lipschitz/growth constant of alpha, beta
    double jump_L_h = 0.0;      // upper Lipschitz constant of h
    double jump_L_h_lower = 0.0;  // lower (bi-Lipschitz) constant of h
    double drift_one_sided_L = 0.0;  // one-sided Lipschitz constant of f-bar
};

struct ModelSpec {
    std::string name;
    std::map<std::string, double> parameters;  // identity for hashing/reporting
    int dim_state = 1;
    int dim_noise = 1;

    DriftFn drift;
    DiffusionFn diffusion;
    JumpFn jump;
    InteractionKernel kernel_alpha = InteractionKernel::zero();
    InteractionKernel kernel_beta = InteractionKernel::zero();
    IntensityShapeFn intensity_shape;
    double intensity_bound = 1.0;  // C_psi
    MarkLaw mark_law;
    InitialLaw initial_law;
    ModelConstants constants;

    /// True when h is identically zero; the integrators then skip the
    /// jump update (the jump streams are still consumed identically).
    bool jump_free = false;

    /// Largest possible jump intensity p_i * psi.
    double max_intensity() const noexcept { return mark_law.bound * intensity_bound; }
    /// Stable hex digest of name + parameters.
    std::string model_hash() const;
    /// Throws std::invalid_argument when the spec is structurally incomplete.
    void check_complete() const;
};

using ModelPtr = std::shared_ptr<const ModelSpec>;

/// Rectangular probe region for validate_model.
struct ProbeBox {
    std::vector<double> lower;  // per state coordinate
    std::vector<double> upper;
    double interaction_lower = -10.0;  // range of the interaction argument y
    double interaction_upper = 10.0;
    double horizon = 1.0;  // t is probed in [0, horizon]

    static ProbeBox cube(int dim, double half_width, double horizon = 1.0);
};

struct Violation {
    std::string assumption;  // "A'_grow", "A'_grow(jump)", "psi_range", "mark_range"
    double t = 0.0;
    std::vector<double> x;
    double y = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct ValidationReport {
    std::size_t probes = 0;
    double worst_growth_ratio = 0.0;
    double worst_jump_ratio = 0.0;
    std::vector<double> radii;
    std::vector<double> worst_local_lipschitz;  // one entry per radius
    std::vector<Violation> violations;

    bool pass() const noexcept { return violations.empty(); }
};

/// Randomized check of the growth inequalities
///   2 x^T f + tr[g g^T] <= K-bar (1 + |x|^2 + |y|^2),
///   |h|^2 + 2 x^T h     <= K-bar (1 + |x|^2),
/// the psi range (0, C_psi] and the mark bound, plus empirical local
/// Lipschitz ratios of (f, g, h) inside each ball B_R. Deterministic in
/// (spec, probes, box, seed). Throws NumericalAbort on non-finite output.
ValidationReport validate_model(const ModelSpec& spec, std::size_t probes,
                                const std::vector<double>& radius_grid, std::uint64_t seed,
                                const ProbeBox& box);
ValidationReport validate_model(const ModelSpec& spec, std::size_t probes,
                                const std::vector<double>& radius_grid, std::uint64_t seed);

}  // namespace chaoslab
