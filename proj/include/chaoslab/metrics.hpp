#pragma once

// The compactified space E_* = E + {*}, its metric, R_1 dictionaries and
// the bounded-Lipschitz / d_{q,T} estimators, plus the rate function gamma.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "chaoslab/measure.hpp"
#include "chaoslab/test_function.hpp"

namespace chaoslab {

struct MeasureFlow;
struct TrajectoryBundle;

struct StarPoint {
    friend bool operator==(const StarPoint&, const StarPoint&) = default;
};

struct FinitePoint {
    double p = 0.0;
    std::vector<double> x;
};

/// A point (p, x) of E or the added point *.
class ExtendedPoint {
public:
    static ExtendedPoint star() { return ExtendedPoint(StarPoint{}); }
    static ExtendedPoint finite(double p, std::vector<double> x) {
        return ExtendedPoint(FinitePoint{p, std::move(x)});
    }

    bool is_star() const noexcept { return std::holds_alternative<StarPoint>(value_); }
    /// Throws std::bad_variant_access for *.
    const FinitePoint& point() const { return std::get<FinitePoint>(value_); }

private:
    explicit ExtendedPoint(std::variant<StarPoint, FinitePoint> v) : value_(std::move(v)) {}
    std::variant<StarPoint, FinitePoint> value_;
};

/// Base point (p0, x0) of l; empty x means the origin.
struct BasePoint {
    double p = 0.0;
    std::vector<double> x;

    double x_at(std::size_t k) const noexcept { return k < x.size() ? x[k] : 0.0; }
};

/// Euclidean distance from (p, x) to the base point in R x R^m.
double base_radius(double p, ConstVec x, const BasePoint& base);

/// l(a) = 1 / (1 + |a - base|), and l(*) = 0.
double compactified_l(const ExtendedPoint& a, const BasePoint& base);

/// min(|a - b|, |l(a) - l(b)|) on finite pairs, l(a) against *, 0 on (*, *).
/// Since l is 1-Lipschitz the minimum is always the l-branch.
double compactified_distance(const ExtendedPoint& a, const ExtendedPoint& b, const BasePoint& base);

enum class DictionaryKind {
    /// Radial members phi = G(l(p, x)) with G(0) = 0 and G'(1) = 0: smooth,
    /// Lipschitz for the compactified metric, and phi(*) = 0.
    Compactified,
    /// Gaussian and odd Gaussian bumps in (p, x); R_1 for the Euclidean
    /// distance, vanishing at infinity.
    Euclidean,
};

struct DictionaryOptions {
    DictionaryKind kind = DictionaryKind::Compactified;
    BasePoint base;
    double scale = 2.0;  // Euclidean kind: spread of the bump centres
    std::uint64_t seed = 0;
};

DictionaryKind parse_dictionary_kind(const std::string& name);
std::string to_string(DictionaryKind kind);

/// `size` members, reproducible in (dim, size, options); every member has
/// certified sup_norm + lip_norm <= 1 and star_value 0.
std::vector<TestFunction> dictionary_r1(int dim, std::size_t size, const DictionaryOptions& options = {});

/// <iota nu, phi> = sum_i w phi(p_i, x_i) + (1 - mass) phi(*).
double pair_extended(const EmpiricalMeasure& nu, const TestFunction& phi);

struct BLEstimate {
    double value = 0.0;
    double se = 0.0;  // jackknife over replications
    std::string maximizer;
    std::size_t maximizer_index = 0;
    std::vector<double> per_function;  // E[|<A_r - B_r, phi>|^q]^{1/q}
};

/// max over the dictionary of E_r[|<A_r - B, phi>|^q]^{1/q}, with B fixed.
/// Needs >= 2 replications, q >= 2 and a non-empty dictionary.
BLEstimate bl_distance(const std::vector<EmpiricalMeasure>& samples, const EmpiricalMeasure& reference,
                       const std::vector<TestFunction>& dictionary, double q, int workers = 0);

/// Paired form: replication r of A against replication r of B.
BLEstimate bl_distance(const std::vector<EmpiricalMeasure>& samples,
                       const std::vector<EmpiricalMeasure>& references,
                       const std::vector<TestFunction>& dictionary, double q, int workers = 0);

struct DqtEstimate {
    double value = 0.0;
    double se = 0.0;  // SE at the maximizing time
    double time = 0.0;
    std::string maximizer;
    std::vector<double> times;
    std::vector<BLEstimate> per_time;
};

/// max over times of bl_distance; samples[s] holds the replications at times[s].
DqtEstimate d_qT(const std::vector<double>& times, const std::vector<std::vector<EmpiricalMeasure>>& samples,
                 const std::vector<EmpiricalMeasure>& references,
                 const std::vector<TestFunction>& dictionary, double q, int workers = 0);

/// Particle replications against a flow on `times` (each must be a
/// snapshot of every bundle and a grid time of the flow).
DqtEstimate d_qT(const std::vector<TrajectoryBundle>& replications, const MeasureFlow& flow,
                 const std::vector<TestFunction>& dictionary, double q,
                 const std::vector<double>& times, int workers = 0);

enum class RateCase { AboveHalf = 1, AtHalf = 2, BelowHalf = 3 };

/// Parameters (kappa, q, m) of gamma. `excluded` is set when kappa hits the
/// excluded value of the selected case.
struct RateParams {
    double kappa = 0.0;
    double q = 2.0;
    int m = 1;
    bool excluded = false;

    static RateParams make(double kappa, double q, int m);
    RateCase rate_case() const noexcept;
};

/// Three-case rate; throws std::domain_error for excluded kappa (naming the
/// case) and std::invalid_argument for kappa <= q, q < 2, m < 1 or n < 1.
double gamma_rate(const RateParams& params, double n);

/// Slowest power of n in gamma(n) + n^{-(1 - 1/q)}; the log factor of the
/// q = m/2 case is ignored.
double predicted_exponent(const RateParams& params);

}  // namespace chaoslab
