#include <cmath>
#include <stdexcept>

#include "chaoslab/flow.hpp"
#include "chaoslab/generator.hpp"
#include "chaoslab/metrics.hpp"
#include "chaoslab/presets.hpp"
#include "chaoslab/test_function.hpp"
#include "doctest.h"

using namespace chaoslab;
namespace tf = chaoslab::test_functions;

namespace {

EmpiricalMeasure point_masses(std::vector<double> xs) {
    EmpiricalMeasure nu;
    nu.dim = 1;
    nu.marks.assign(xs.size(), 1.0);
    nu.states = std::move(xs);
    return nu;
}

// Central differences against the analytic derivatives.
void check_derivatives(const TestFunction& phi, double p, std::vector<double> x) {
    const std::size_t m = x.size();
    std::vector<double> g(m), H(m * m), gp(m), gm(m);
    phi.grad_x(p, x, g);
    phi.hess_x(p, x, H);
    const double h = 1e-5;
    for (std::size_t k = 0; k < m; ++k) {
        auto xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        const double fd = (phi(p, xp) - phi(p, xm)) / (2 * h);
        CHECK(std::abs(fd - g[k]) <= 1e-6 * std::max(1.0, std::abs(g[k])));
        phi.grad_x(p, xp, gp);
        phi.grad_x(p, xm, gm);
        for (std::size_t j = 0; j < m; ++j) {
            const double fdh = (gp[j] - gm[j]) / (2 * h);
            CHECK(std::abs(fdh - H[j * m + k]) <= 1e-5 * std::max(1.0, std::abs(H[j * m + k])));
        }
    }
}

MeasureFlow ou_flow(const ModelSpec& spec, std::size_t M, double dt, std::vector<double> snapshots,
                    std::uint64_t seed = 3) {
    PicardOptions options;
    options.snapshot_times = std::move(snapshots);
    return solve_mkv_picard(spec, M, 1.0, dt, 20, default_picard_tolerance(M), DriverSeed{seed, {}}, options);
}

}  // namespace

TEST_SUITE("generator") {

TEST_CASE("test function derivatives") {
    check_derivatives(tf::tanh_coordinate(0, 1, 0.5), 1.0, {0.3});
    check_derivatives(tf::tanh_coordinate(1, 3, 0.5), 1.0, {0.3, -1.1, 2.0});
    check_derivatives(tf::square(2, 3), 1.0, {0.3, -1.1, 2.0});
    check_derivatives(tf::coordinate(0, 2, 2.0), 1.0, {0.3, -1.1});
    check_derivatives(tf::linear_combination(0.3, tf::square(0, 2), -2.0, tf::tanh_coordinate(1, 2)), 1.0,
                      {0.7, 0.2});
    for (auto kind : {DictionaryKind::Compactified, DictionaryKind::Euclidean}) {
        for (int dim : {1, 3}) {
            DictionaryOptions d;
            d.kind = kind;
            const auto dict = dictionary_r1(dim, 8, d);
            for (const auto& phi : dict) {
                check_derivatives(phi, 0.8, std::vector<double>(static_cast<std::size_t>(dim), 0.45));
                check_derivatives(phi, 1.0, std::vector<double>(static_cast<std::size_t>(dim), -1.3));
            }
        }
    }
}

TEST_CASE("test function certificates") {
    CHECK(tf::tanh_coordinate(0, 1, 0.5).in_r1());
    CHECK_FALSE(tf::tanh_coordinate(0, 1, 1.0).in_r1());
    CHECK_FALSE(tf::coordinate(0, 1).in_r1());
    CHECK(tf::zero().in_r1());
    CHECK(tf::constant(2.0).star_value == 2.0);
    CHECK(std::isnan(tf::coordinate(0, 1).star_value));
}

TEST_CASE("generator on closed forms") {
    const auto spec = ou_benchmark_model(OuParams{});
    const auto delta0 = point_masses({0.0, 0.0});
    const std::vector<double> x{0.7};
    CHECK(apply_generator(spec, delta0, tf::constant(3.0), 0.2, 1.0, x) == 0.0);
    // 2x(-ax) + sigma^2 + p psi0 ((x + c)^2 - x^2)
    CHECK(apply_generator(spec, delta0, tf::square(0, 1), 0.2, 1.0, x) == doctest::Approx(0.22).epsilon(1e-12));
    // without jumps L x = f(t, x, <nu, alpha(x, .)>)
    const auto nojump = ou_benchmark_model(1.0, 0.5, 0.5, 0.0, 1.0);
    const auto nu = point_masses({1.0, 3.0});
    CHECK(apply_generator(nojump, nu, tf::coordinate(0, 1), 0.0, 1.0, x) == doctest::Approx(-0.7 + 0.5 * 2.0));
    // linearity
    const auto f = tf::square(0, 1), g = tf::tanh_coordinate(0, 1);
    const double lhs = apply_generator(spec, nu, tf::linear_combination(2.0, f, -3.0, g), 0.1, 1.0, x);
    const double rhs = 2.0 * apply_generator(spec, nu, f, 0.1, 1.0, x) - 3.0 * apply_generator(spec, nu, g, 0.1, 1.0, x);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("generator agrees with the drift the integrator uses") {
    const auto spec = fhn_model(FhnParams{});
    EmpiricalMeasure nu;
    nu.dim = 3;
    nu.marks = {1.0, 1.0};
    nu.states = {0.1, 0.2, 0.3, -0.5, 0.4, 0.6};
    const std::vector<double> x{0.2, -0.1, 0.5};
    const MeasureField field(spec, nu);
    std::vector<double> f(3);
    spec.drift(0.0, x, field.alpha(x), f);
    const double psi = spec.intensity_shape(0.0, field.mean_state());
    std::vector<double> h(3);
    spec.jump(0.0, x, h);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(apply_generator(spec, nu, tf::coordinate(k, 3), 0.0, 1.0, x) == doctest::Approx(f[k] + psi * h[k]));
    }
}

TEST_CASE("static flow has zero residual") {
    const auto spec = zero_model(1);
    const auto grid = plan_time_grid(1.0, 0.1, spec.max_intensity());
    const auto flow = frozen_flow(spec, point_masses({-1.0, 0.5, 2.0}), grid, uniform_times(1.0, 10));
    const auto r = fpk_residual_detail(spec, flow, tf::square(0, 1));
    CHECK(r.max_abs == 0.0);
    CHECK(r.times.size() == 11);
}

TEST_CASE("picard flow satisfies the weak form; a wrong model does not") {
    const auto spec = ou_benchmark_model(OuParams{});
    const auto flow = ou_flow(spec, 4000, 0.005, uniform_times(1.0, 100));
    for (const auto& phi : {tf::coordinate(0, 1), tf::square(0, 1), tf::tanh_coordinate(0, 1, 0.5)}) {
        const auto r = fpk_residual_detail(spec, flow, phi);
        CHECK(r.max_abs <= 3.0 * r.se_at_max);
    }
    auto wrong = ou_benchmark_model(2.0, 0.5, 0.5, 0.5, 1.0);
    const auto bad = fpk_residual_detail(wrong, flow, tf::coordinate(0, 1));
    CHECK(bad.max_z > 10.0);
    CHECK(fpk_residual(spec, flow, tf::coordinate(0, 1), {0.0}) == 0.0);
    CHECK_THROWS_AS(fpk_residual(spec, flow, tf::coordinate(0, 1), {0.333}), std::invalid_argument);
}

TEST_CASE("propagator at equal times is exact") {
    const auto spec = ou_benchmark_model(OuParams{});
    const auto flow = ou_flow(spec, 200, 0.05, {0.0, 0.5, 1.0});
    const std::vector<double> x{0.3};
    const auto e = propagator_estimate(spec, flow, 0.5, 0.5, 1.0, x, tf::tanh_coordinate(0, 1), 10, DriverSeed{});
    CHECK(e.estimate == std::tanh(0.3));
    CHECK(e.standard_error == 0.0);
    CHECK_THROWS_AS(propagator_estimate(spec, flow, 0.7, 0.5, 1.0, x, tf::zero(), 10, DriverSeed{}),
                    std::invalid_argument);
}

TEST_CASE("propagator mean matches the discrete oracle") {
    OuParams p;
    const auto spec = ou_benchmark_model(p);
    const auto flow = ou_flow(spec, 2000, 0.01, {0.0, 0.25, 1.0});
    const double t = 0.25, u = 1.0, x0 = -0.4;
    const auto e = propagator_estimate(spec, flow, t, u, 1.0, std::vector<double>{x0}, tf::coordinate(0, 1), 20000,
                                       DriverSeed{21, {replication_in(StreamDomain::Propagator, 0), 0, {}}});
    // E X_{k+1} = (1 - a dt) E X_k + b abar_k dt + c (1 - exp(-p psi0 dt)) exactly for Euler
    const auto& g = flow.grid;
    double m = x0;
    const std::vector<double> any{0.0};
    for (auto k = g.step_of(t); k < g.step_of(u); ++k) {
        const double abar = flow.field_at(spec, k).alpha(any);
        m = (1.0 - p.a * g.dt) * m + p.b * abar * g.dt - p.jump_size * std::expm1(-p.psi0 * g.dt);
    }
    CHECK(std::abs(e.estimate - m) <= 3.0 * e.standard_error);
}

TEST_CASE("frozen dynamics leave the propagator constant") {
    const auto spec = zero_model(1);
    const auto grid = plan_time_grid(1.0, 0.1, spec.max_intensity());
    const auto flow = frozen_flow(spec, point_masses({-1.0, 0.5, 2.0}), grid, {0.0, 0.5, 1.0});
    const auto phi = tf::tanh_coordinate(0, 1, 0.5);
    const auto r = propagator_constancy_check(spec, flow, phi, 1.0, {0.0, 0.5, 1.0}, 4, DriverSeed{});
    CHECK(r.max_deviation == 0.0);
    CHECK(r.values[0] == doctest::Approx((phi(1, std::vector<double>{-1.0}) + phi(1, std::vector<double>{0.5}) +
                                          phi(1, std::vector<double>{2.0})) / 3.0));
    const auto e = propagator_estimate(spec, flow, 0.0, 1.0, 1.0, std::vector<double>{0.5}, phi, 5, DriverSeed{});
    CHECK(e.estimate == phi(1.0, std::vector<double>{0.5}));
}

TEST_CASE("propagator constancy and flow property on the ou flow") {
    const auto spec = ou_benchmark_model(OuParams{});
    const auto flow = ou_flow(spec, 2000, 0.01, {0.0, 0.5, 1.0});
    const auto phi = tf::tanh_coordinate(0, 1, 0.5);
    const DriverSeed seed{5, {replication_in(StreamDomain::Propagator, 1), 0, {}}};
    const auto c = propagator_constancy_check(spec, flow, phi, 1.0, {0.0, 0.5, 1.0}, 16, seed, 1000);
    CHECK(c.within(3.0));
    CHECK(c.pooled_se > 0.0);
    const auto f = flow_property_check(spec, flow, phi, 0.0, 0.5, 1.0, 1.0, std::vector<double>{0.2}, 4000, 8, seed);
    CHECK(f.within(3.0));
}

TEST_CASE("gradient constant from the certificates") {
    const auto spec = ou_benchmark_model(OuParams{});
    const auto& c = spec.constants;
    CHECK(gradient_constant(spec) ==
          doctest::Approx(c.drift_one_sided_L * (1 + c.kernel_J * c.kernel_J) +
                          2.0 * spec.intensity_bound * (1 + c.jump_L_h * c.jump_L_h) * spec.mark_law.bound));
    CHECK(gradient_constant(spec) == doctest::Approx(0.25 * 2.0 + 2.0));
}

TEST_CASE("gradient of the ou propagator equals the coupled-path derivative") {
    OuParams p;
    const auto spec = ou_benchmark_model(p);
    const auto flow = ou_flow(spec, 1000, 0.01, {0.0, 0.5, 1.0});
    const DriverSeed seed{7, {replication_in(StreamDomain::Validation, 1), 0, {}}};
    const double factor = std::pow(1.0 - p.a * flow.grid.dt, 50.0);
    const auto lin = gradient_bound_check(spec, flow, tf::coordinate(0, 1), 0.5, 1.0, 1.0, {{0.3}, {-2.0}}, 0.0, 50,
                                          gradient_constant(spec), seed);
    CHECK(lin.pass());
    for (const auto& g : lin.probes) {
        CHECK(g.gradient[0] == doctest::Approx(factor).epsilon(1e-8));
        CHECK(std::abs(g.gradient[0] / std::exp(-0.5 * p.a) - 1.0) < 0.01);
    }
    // tanh: d/dx E tanh(X_t) = factor * E sech^2(X_t) along the same paths
    TestFunction pathwise = tf::tanh_coordinate(0, 1);
    pathwise.value = [factor](double, ConstVec x) {
        const double c = std::cosh(x[0]);
        return factor / (c * c);
    };
    const auto nonlin = gradient_bound_check(spec, flow, tf::tanh_coordinate(0, 1), 0.5, 1.0, 1.0, {{0.3}}, 0.0, 400,
                                             gradient_constant(spec), seed);
    const auto oracle = propagator_estimate(spec, flow, 0.5, 1.0, 1.0, std::vector<double>{0.3}, pathwise, 400,
                                            nested_seed(seed, 0));
    CHECK(nonlin.probes[0].gradient[0] == doctest::Approx(oracle.estimate).epsilon(1e-5));
    CHECK(nonlin.pass());
    // t = s: the gradient of an R_1 function is at most 1
    const auto same = gradient_bound_check(spec, flow, tf::tanh_coordinate(0, 1, 0.5), 1.0, 1.0, 1.0, {{0.0}}, 0.0, 2,
                                           gradient_constant(spec), seed);
    CHECK(same.probes[0].norm <= 0.5 + 1e-6);
    CHECK(same.bound == 1.0);
}

}
