#include <cmath>
#include <stdexcept>

#include "chaoslab/presets.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/time_grid.hpp"
#include "doctest.h"

using namespace chaoslab;

namespace {

double mean_at(const TrajectoryBundle& b, double t, std::size_t k = 0) {
    const auto s = b.snapshot_of(t);
    double sum = 0.0;
    for (std::size_t i = 0; i < b.particles; ++i) sum += b.state(s, i)[k];
    return sum / static_cast<double>(b.particles);
}

}  // namespace

TEST_SUITE("particles") {

TEST_CASE("time grid planning") {
    const auto g = plan_time_grid(1.0, 0.01, 200.0);
    CHECK(g.refinement == 32);
    CHECK(g.dt * 200.0 <= 0.1);
    CHECK(g.steps == 3200);
    CHECK(g.step_of(0.5) == 1600);
    CHECK_THROWS_AS(g.step_of(0.005), std::invalid_argument);
    CHECK_THROWS_AS(plan_time_grid(1.0, 0.3, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(plan_time_grid(0.0, 0.1, 1.0), std::invalid_argument);
    CHECK(plan_time_grid(1.0, 0.01, 1.0).refinement == 1);
    const auto u = uniform_times(1.0, 4);
    CHECK(u.size() == 5);
    CHECK(u.back() == 1.0);
}

TEST_CASE("runs are reproducible and independent of the worker count") {
    const auto spec = fhn_model(FhnParams{});
    const DriverSeed seed{11, {0, 0, DriverKind::Brownian}};
    SimulationOptions one, four;
    one.workers = 1;
    four.workers = 4;
    const auto a = simulate_particles(spec, 64, 0.5, 0.01, seed, {0.0, 0.25, 0.5}, one);
    const auto b = simulate_particles(spec, 64, 0.5, 0.01, seed, {0.0, 0.25, 0.5}, four);
    CHECK(a.states == b.states);
    CHECK(a.jump_counts == b.jump_counts);
    CHECK(a.alpha_means == b.alpha_means);
    const auto c = simulate_particles(spec, 64, 0.5, 0.01, DriverSeed{12, seed.stream}, {0.0, 0.5}, one);
    CHECK(c.states != std::vector<double>(a.states.begin(), a.states.begin() + 2 * 64 * 3));
}

TEST_CASE("particle streams do not depend on n") {
    // with no interaction, particle i follows the same path for any n
    const auto spec = ou_benchmark_model(1.0, 0.0, 0.5, 0.5, 1.0);
    const DriverSeed seed{2, {0, 0, DriverKind::Brownian}};
    const auto small = simulate_particles(spec, 3, 1.0, 0.01, seed, {1.0});
    const auto large = simulate_particles(spec, 10, 1.0, 0.01, seed, {1.0});
    for (std::size_t i = 0; i < 3; ++i) CHECK(small.state(0, i)[0] == large.state(0, i)[0]);
}

TEST_CASE("zero dynamics keep the initial states") {
    const auto spec = zero_model(2);
    const auto b = simulate_particles(spec, 50, 1.0, 0.1, DriverSeed{}, {0.0, 1.0});
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(b.state(0, i)[0] == b.state(1, i)[0]);
        CHECK(b.state(0, i)[1] == b.state(1, i)[1]);
    }
}

TEST_CASE("a single particle interacts only with itself") {
    const auto spec = ou_benchmark_model(OuParams{});
    const auto b = simulate_particles(spec, 1, 0.1, 0.01, DriverSeed{}, {0.0});
    CHECK(b.alpha_means[0] == b.state(0, 0)[0]);
}

TEST_CASE("explicit initial condition and stream ids") {
    const auto spec = ou_benchmark_model(OuParams{});
    SimulationOptions options;
    options.init = ParticleInit{{1.0, 1.0}, {3.0, -3.0}};
    options.stream_ids = {100, 200};
    const auto b = simulate_particles(spec, 2, 0.1, 0.01, DriverSeed{}, {0.0, 0.1}, options);
    CHECK(b.state(0, 0)[0] == 3.0);
    CHECK(b.state(0, 1)[0] == -3.0);
    CHECK(b.stream_ids[1] == 200);
    options.stream_ids = {1};
    CHECK_THROWS_AS(simulate_particles(spec, 2, 0.1, 0.01, DriverSeed{}, {0.0}, options), std::invalid_argument);
}

TEST_CASE("bad snapshot requests") {
    const auto spec = zero_model();
    CHECK_THROWS_AS(simulate_particles(spec, 4, 1.0, 0.1, DriverSeed{}, {0.05}), std::invalid_argument);
    CHECK_THROWS_AS(simulate_particles(spec, 4, 1.0, 0.1, DriverSeed{}, {0.5, 0.2}), std::invalid_argument);
    CHECK_THROWS_AS(simulate_particles(spec, 0, 1.0, 0.1, DriverSeed{}, {0.5}), std::invalid_argument);
    const auto b = simulate_particles(spec, 4, 1.0, 0.1, DriverSeed{}, {0.5});
    CHECK_THROWS_AS(empirical_measure(b, 0.4), std::invalid_argument);
}

TEST_CASE("ou particle mean follows the limit ODE") {
    OuParams p;
    const auto spec = ou_benchmark_model(p);
    const auto b = simulate_particles(spec, 4000, 1.0, 0.01, DriverSeed{5, {}}, {0.0, 0.5, 1.0});
    for (double t : {0.5, 1.0}) {
        const double se = std::sqrt(p.limit_variance(t) / 4000.0);
        CHECK(std::abs(mean_at(b, t) - p.limit_mean(t)) < 4.0 * se + 0.01);
    }
    const auto nu = empirical_measure(b, 1.0);
    CHECK(nu.mean_state()[0] == doctest::Approx(mean_at(b, 1.0)));
}

TEST_CASE("jump counts minus compensators are centred") {
    auto spec = zero_model(1);
    spec.jump = [](double, ConstVec, MutVec out) { out[0] = 1.0; };
    spec.jump_free = false;
    spec.intensity_shape = [](double, ConstVec) { return 1.0; };
    spec.intensity_bound = 1.0;
    spec.mark_law = {[](StreamRng&) { return 2.0; }, 2.0, 2.0};
    const std::size_t n = 4000;
    const auto b = simulate_particles(spec, n, 1.0, 0.01, DriverSeed{8, {}}, {0.5, 1.0});
    for (std::size_t s = 0; s < 2; ++s) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += b.jump_counts[b.index(s, i)] - b.compensators[b.index(s, i)];
            // the jumps move the state by h = 1 each
            CHECK(b.state(s, i)[0] - b.state(0, i)[0] ==
                  doctest::Approx(double(b.jump_counts[b.index(s, i)]) - b.jump_counts[b.index(0, i)]));
        }
        const double var = 2.0 * b.time_grid[s];
        CHECK(std::abs(sum / n) < 4.0 * std::sqrt(var / n));
    }
}

TEST_CASE("jump-free models consume the jump stream but skip h") {
    auto spec = ou_benchmark_model(1.0, 0.5, 0.5, 0.0, 1.0);
    CHECK(spec.jump_free);
    const auto a = simulate_particles(spec, 20, 1.0, 0.05, DriverSeed{3, {}}, {1.0});
    spec.jump_free = false;  // h is identically 0 anyway
    const auto b = simulate_particles(spec, 20, 1.0, 0.05, DriverSeed{3, {}}, {1.0});
    CHECK(a.states == b.states);
    CHECK(a.jump_counts == b.jump_counts);
}

TEST_CASE("explosive drift truncates instead of throwing") {
    const auto spec = cubic_model();
    SimulationOptions options;
    options.init = ParticleInit{{1.0, 1.0, 1.0}, {0.1, 3.0, -0.2}};
    const auto b = simulate_particles(spec, 3, 5.0, 0.01, DriverSeed{}, {0.0, 5.0}, options);
    CHECK(b.truncation.truncated);
    CHECK(b.truncation.particle == 1);
    CHECK(b.truncation.time > 0.0);
    CHECK(b.snapshots() == 1);
}

TEST_CASE("partner subsampling approximates the dense pairing") {
    const auto spec = ou_benchmark_model(OuParams{});
    SimulationOptions options;
    options.partners = 50;
    const auto b = simulate_particles(spec, 400, 0.5, 0.01, DriverSeed{4, {}}, {0.0, 0.5}, options);
    const auto exact = simulate_particles(spec, 400, 0.5, 0.01, DriverSeed{4, {}}, {0.0, 0.5});
    CHECK(std::abs(mean_at(b, 0.5) - mean_at(exact, 0.5)) < 0.05);
}

TEST_CASE("stability monitor") {
    const auto spec = ou_benchmark_model(OuParams{});
    const auto b = simulate_particles(spec, 2000, 1.0, 0.01, DriverSeed{6, {}}, uniform_times(1.0, 10));
    const double C = lyapunov_constant(spec);
    CHECK(C == doctest::Approx(spec.constants.growth_K_bar * (1.0 + 1.0 + 6.0 * spec.constants.kernel_J *
                                                                            spec.constants.kernel_J)));
    const auto report = stability_monitor(b, {0.5, 100.0}, C);
    CHECK(report.pass());
    CHECK(report.radii[1].exit_fraction == 0.0);
    CHECK(report.radii[0].exit_fraction > 0.5);
    for (double tau : report.radii[1].exit_times) CHECK(tau == 1.0);
    const auto late = simulate_particles(spec, 10, 1.0, 0.01, DriverSeed{}, {0.5, 1.0});
    CHECK_THROWS_AS(stability_monitor(late, {1.0}, C), std::invalid_argument);
}

TEST_CASE("fhn gating variable stays in its box") {
    const auto spec = fhn_model(FhnParams{});
    const auto b = simulate_particles(spec, 10, 1.0, 0.001, DriverSeed{7, {}}, uniform_times(1.0, 100));
    for (std::size_t s = 0; s < b.snapshots(); ++s) {
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(b.state(s, i)[2] >= -0.05);
            CHECK(b.state(s, i)[2] <= 1.05);
        }
    }
}

}
