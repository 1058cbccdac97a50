#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "chaoslab/errors.hpp"
#include "chaoslab/measure.hpp"
#include "chaoslab/model.hpp"
#include "chaoslab/presets.hpp"
#include "doctest.h"

using namespace chaoslab;

namespace {

ProbeBox fhn_box() {
    ProbeBox box;
    box.lower = {-3.0, -3.0, 0.0};
    box.upper = {3.0, 3.0, 1.0};
    box.interaction_lower = 0.0;
    box.interaction_upper = 1.0;
    return box;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("ou benchmark satisfies its certificates") {
    const auto spec = ou_benchmark_model(OuParams{});
    const auto report = validate_model(spec, 20000, {1.0, 5.0}, 1);
    CHECK(report.pass());
    CHECK(report.worst_growth_ratio <= spec.constants.growth_K_bar);
    // f, g, h are globally Lipschitz with constant max(a, b)
    for (double l : report.worst_local_lipschitz) CHECK(l <= 1.0 + 1e-6);
}

TEST_CASE("ou closed forms") {
    OuParams p;
    p.jump_size = 0.0;
    p.b = 0.5;
    p.x0_mean = 1.0;
    CHECK(p.limit_mean(1.0) == doctest::Approx(0.6065306597126334).epsilon(1e-12));
    p.x0_sd = 0.0;
    CHECK(p.limit_variance(1.0) == doctest::Approx(0.10808308959542341).epsilon(1e-12));
    OuParams q;
    q.b = 0.0;
    q.x0_mean = 0.0;
    q.jump_size = 1.0;
    CHECK(q.limit_mean(1.0) == doctest::Approx(0.6321205588285577).epsilon(1e-12));
}

TEST_CASE("fhn chi") {
    CHECK(fhn_chi(0.5) == doctest::Approx(0.06065306597126335).epsilon(1e-14));
    CHECK(fhn_chi(0.0) == 0.0);
    CHECK(fhn_chi(1.0) == 0.0);
    CHECK(fhn_chi(-0.2) == 0.0);
    CHECK(fhn_chi(1.3) == 0.0);
    CHECK(fhn_chi(0.25) == doctest::Approx(fhn_chi(0.75)));
}

TEST_CASE("fhn model passes validation on its state box") {
    const auto spec = fhn_model(FhnParams{});
    CHECK(spec.dim_state == 3);
    const auto report = validate_model(spec, 20000, {1.0, 2.0, 4.0}, 3, fhn_box());
    CHECK(report.pass());
    CHECK(report.worst_growth_ratio <= spec.constants.growth_K_bar);
    CHECK(fhn_growth_constant(FhnParams{}) == spec.constants.growth_K_bar);
    // local Lipschitz ratios grow with the ball
    CHECK(report.worst_local_lipschitz[0] <= report.worst_local_lipschitz[2]);
}

TEST_CASE("fhn parameter checks") {
    FhnParams p;
    p.a_d = -1.0;
    CHECK_THROWS_AS(p.check(), std::invalid_argument);
    CHECK_THROWS(make_model("fhn", {{"theta", -0.5}}));
}

TEST_CASE("cubic model violates its declared growth constant") {
    const auto spec = cubic_model();
    const auto report = validate_model(spec, 2000, {1.0}, 1);
    CHECK_FALSE(report.pass());
    CHECK(report.violations.front().assumption == "A'_grow");
    CHECK(report.violations.front().lhs > report.violations.front().rhs);
}

TEST_CASE("validation is deterministic in the seed") {
    const auto spec = fhn_model(FhnParams{});
    const auto a = validate_model(spec, 500, {1.0}, 9, fhn_box());
    const auto b = validate_model(spec, 500, {1.0}, 9, fhn_box());
    CHECK(a.worst_growth_ratio == b.worst_growth_ratio);
    CHECK(a.worst_local_lipschitz == b.worst_local_lipschitz);
}

TEST_CASE("validation rejects non-finite coefficients") {
    auto spec = zero_model(1);
    spec.drift = [](double, ConstVec, double, MutVec out) { out[0] = std::numeric_limits<double>::quiet_NaN(); };
    CHECK_THROWS_AS(validate_model(spec, 10, {1.0}, 1), NumericalAbort);
}

TEST_CASE("validation flags a psi outside its bound") {
    auto spec = zero_model(1);
    spec.intensity_shape = [](double, ConstVec) { return 2.0; };
    spec.intensity_bound = 1.0;
    const auto report = validate_model(spec, 10, {1.0}, 1);
    CHECK_FALSE(report.pass());
    CHECK(report.violations.front().assumption == "psi_range");
}

TEST_CASE("incomplete spec") {
    ModelSpec spec;
    CHECK_THROWS_AS(spec.check_complete(), std::invalid_argument);
    CHECK_THROWS_AS(validate_model(spec, 10, {1.0}, 1), std::invalid_argument);
}

TEST_CASE("registry") {
    CHECK_THROWS_AS(make_model("nope", {}), UsageError);
    CHECK_THROWS_AS(make_model("ou", {{"bogus", 1.0}}), UsageError);
    const auto ou = make_model("ou", {{"a", 2.0}});
    CHECK(ou.parameters.at("a") == 2.0);
    CHECK(ou.model_hash() == make_model("ou", {{"a", 2.0}}).model_hash());
    CHECK(ou.model_hash() != make_model("ou", {{"a", 3.0}}).model_hash());
    register_model("test-zero2", [](const std::map<std::string, double>&) { return zero_model(2); });
    CHECK(make_model("test-zero2", {}).dim_state == 2);
    const auto names = registered_models();
    for (const char* n : {"fhn", "ou", "zero", "cubic"}) {
        CHECK(std::find(names.begin(), names.end(), n) != names.end());
    }
}

TEST_CASE("separable and dense kernels agree") {
    const auto spec = ou_benchmark_model(OuParams{});
    const std::vector<double> y{0.3};
    const std::vector<double> x{-1.2};
    const InteractionKernel dense([](ConstVec a, ConstVec b) { return b[0] + 0.0 * a[0]; });
    CHECK(spec.kernel_alpha(x, y) == doctest::Approx(dense(x, y)));
    CHECK(spec.kernel_alpha.is_separable());
    CHECK_FALSE(dense.is_separable());
    CHECK(InteractionKernel::zero()(x, y) == 0.0);
}

TEST_CASE("measure field pairings") {
    auto spec = ou_benchmark_model(OuParams{});
    EmpiricalMeasure nu;
    nu.dim = 1;
    nu.marks = {1.0, 1.0, 1.0, 1.0};
    nu.states = {1.0, 2.0, 3.0, 6.0};
    nu.check();
    const MeasureField separable(spec, nu);
    const std::vector<double> x{0.7};
    CHECK(separable.alpha(x) == doctest::Approx(3.0));
    CHECK(separable.mean_state()[0] == doctest::Approx(3.0));

    spec.kernel_alpha = InteractionKernel([](ConstVec a, ConstVec b) { return a[0] * b[0] * b[0]; });
    const MeasureField dense(spec, nu);
    CHECK(dense.alpha(x) == doctest::Approx(0.7 * (1 + 4 + 9 + 36) / 4.0));
    CHECK_THROWS(MeasureField(spec, FieldSummary{{3.0}, 0.0, 0.0}));

    nu.mass = 1.5;
    CHECK_THROWS_AS(nu.check(), std::invalid_argument);
    nu.mass = 1.0;
    nu.states.pop_back();
    CHECK_THROWS_AS(nu.check(), std::invalid_argument);
}

}
