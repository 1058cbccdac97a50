// Acceptance gate: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "chaoslab/flow.hpp"
#include "chaoslab/generator.hpp"
#include "chaoslab/metrics.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/presets.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/study.hpp"

using namespace chaoslab;
namespace fs = std::filesystem;
namespace tf = chaoslab::test_functions;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v, int digits = 4) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

int g_workers = 0;
fs::path g_out;

DriverSeed seed_in(StreamDomain domain, std::uint64_t master, std::uint64_t index = 0) {
    return DriverSeed{master, {replication_in(domain, index), 0, DriverKind::Brownian}};
}

// ---------------------------------------------------------------------------

Outcome compensated_martingale() {
    auto spec = zero_model(1);
    spec.name = "counting";
    spec.jump = [](double, ConstVec, MutVec out) { out[0] = 1.0; };
    spec.jump_free = false;
    spec.intensity_shape = [](double, ConstVec) { return 1.0; };
    spec.intensity_bound = 1.0;
    spec.mark_law = {[](StreamRng&) { return 2.0; }, 2.0, 2.0};
    const std::size_t n = 10000;
    SimulationOptions opts;
    opts.workers = g_workers;
    const auto b = simulate_particles(spec, n, 1.0, 1e-3, seed_in(StreamDomain::Particles, 101),
                                      {0.25, 0.5, 1.0}, opts);
    Outcome o{true, ""};
    for (std::size_t s = 0; s < b.snapshots(); ++s) {
        double sum = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = double(b.jump_counts[b.index(s, i)]) - b.compensators[b.index(s, i)];
            sum += d;
            sq += d * d;
        }
        const double mean = sum / n;
        const double se = std::sqrt((sq / n - mean * mean) / (n - 1));
        o.pass = o.pass && std::abs(mean) <= 3.0 * se;
        o.detail += "t=" + num(b.time_grid[s]) + " z=" + num(mean / se, 3) + " ";
    }
    return o;
}

Outcome ou_moments() {
    OuParams p;
    p.a = 1.0;
    p.b = 0.5;
    p.sigma = 0.5;
    p.jump_size = 0.0;
    p.x0_sd = 0.0;  // deterministic start at x0_mean = 1
    const auto spec = ou_benchmark_model(p);
    const std::size_t n = 5000;
    SimulationOptions opts;
    opts.workers = g_workers;
    const auto b = simulate_particles(spec, n, 1.0, 1e-3, seed_in(StreamDomain::Particles, 102), {1.0}, opts);
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += b.state(0, i)[0];
        sq += b.state(0, i)[0] * b.state(0, i)[0];
    }
    const double mean = sum / n;
    const double var = (sq - n * mean * mean) / (n - 1);
    const double mean_err = std::abs(mean / p.limit_mean(1.0) - 1.0);
    const double var_err = std::abs(var / p.limit_variance(1.0) - 1.0);
    return {mean_err <= 0.02 && var_err <= 0.05,
            "mean " + num(mean, 6) + " vs " + num(p.limit_mean(1.0), 6) + " var " + num(var, 6) + " vs " +
                num(p.limit_variance(1.0), 6)};
}

Outcome jump_source() {
    // a - b = 1 and x0 mean 0, so m(t) = 1 - exp(-t)
    OuParams p;
    p.a = 1.5;
    p.b = 0.5;
    p.sigma = 0.5;
    p.jump_size = 1.0;
    p.psi0 = 1.0;
    p.mark = 1.0;
    p.x0_mean = 0.0;
    const auto spec = ou_benchmark_model(p);
    const std::size_t n = 20000;
    SimulationOptions opts;
    opts.workers = g_workers;
    const auto b = simulate_particles(spec, n, 1.0, 1e-3, seed_in(StreamDomain::Particles, 103), {1.0}, opts);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += b.state(0, i)[0];
    const double mean = sum / n;
    const double oracle = 0.6321205588285577;  // 1 - e^{-1}
    return {std::abs(mean / oracle - 1.0) <= 0.03, "mean " + num(mean, 6) + " vs " + num(oracle, 10)};
}

Outcome fpk_residual_check() {
    const auto spec = ou_benchmark_model(OuParams{});
    const std::vector<TestFunction> phis{tf::coordinate(0, 1), tf::square(0, 1), tf::tanh_coordinate(0, 1)};
    auto solve = [&](std::size_t M, double dt) {
        PicardOptions opts;
        opts.snapshot_times = uniform_times(1.0, 100);
        opts.workers = g_workers;
        return solve_mkv_picard(spec, M, 1.0, dt, 20, default_picard_tolerance(M), seed_in(StreamDomain::Flow, 104),
                                opts);
    };
    const auto coarse = solve(10000, 1e-3);
    const auto fine = solve(40000, 5e-4);
    Outcome o{coarse.trace.converged && fine.trace.converged, ""};
    for (std::size_t k = 0; k < phis.size(); ++k) {
        const auto rc = fpk_residual_detail(spec, coarse, phis[k], {}, g_workers);
        const auto rf = fpk_residual_detail(spec, fine, phis[k], {}, g_workers);
        const bool within = rc.max_abs <= 3.0 * rc.se_at_max && rf.max_abs <= 3.0 * rf.se_at_max;
        const bool refines = rf.max_abs <= rc.max_abs + std::hypot(rc.se_at_max, rf.se_at_max);
        o.pass = o.pass && within && refines;
        o.detail += phis[k].id + " " + num(rc.max_abs, 2) + "/" + num(rc.se_at_max, 2) + "->" + num(rf.max_abs, 2) +
                    "/" + num(rf.se_at_max, 2) + " ";
    }
    return o;
}

MeasureFlow ou_flow(std::uint64_t master) {
    const auto spec = ou_benchmark_model(OuParams{});
    PicardOptions opts;
    opts.snapshot_times = {0.0, 0.25, 0.5, 0.75, 1.0};
    opts.workers = g_workers;
    return solve_mkv_picard(spec, 10000, 1.0, 0.01, 20, default_picard_tolerance(10000),
                            seed_in(StreamDomain::Flow, master), opts);
}

Outcome propagator_identities() {
    const auto spec = ou_benchmark_model(OuParams{});
    const auto flow = ou_flow(105);
    const auto phi = tf::tanh_coordinate(0, 1, 0.5);
    const DriverSeed seed = seed_in(StreamDomain::Propagator, 105);

    bool exact = true;
    for (double u : {0.0, 0.5, 1.0}) {
        for (double x : {-2.0, 0.0, 1.3}) {
            const auto e = propagator_estimate(spec, flow, u, u, 1.0, std::vector<double>{x}, phi, 8, seed, g_workers);
            exact = exact && e.estimate == phi(1.0, std::vector<double>{x}) && e.standard_error == 0.0;
        }
    }
    const auto c = propagator_constancy_check(spec, flow, phi, 1.0, {0.0, 0.5, 1.0}, 16, seed, 2000, g_workers);
    const auto f = flow_property_check(spec, flow, phi, 0.0, 0.5, 1.0, 1.0, std::vector<double>{0.4}, 4000, 16,
                                       nested_seed(seed, 99), g_workers);
    return {exact && c.within(3.0) && f.within(3.0),
            std::string("P_uu exact=") + (exact ? "yes" : "no") + " constancy " + num(c.max_deviation, 3) + "/" +
                num(c.pooled_se, 3) + " flow-property " + num(f.deviation, 3) + "/" + num(f.pooled_se, 3)};
}

Outcome gradient_bound() {
    OuParams p;
    const auto spec = ou_benchmark_model(p);
    const auto flow = ou_flow(106);
    const double C = gradient_constant(spec);
    StreamRng rng(seed_in(StreamDomain::Validation, 106).with_kind(DriverKind::Probe));
    std::vector<std::vector<double>> probes;
    for (int i = 0; i < 20; ++i) probes.push_back({rng.uniform(-3.0, 3.0)});
    const DriverSeed seed = seed_in(StreamDomain::Validation, 106, 1);
    const auto bounded = gradient_bound_check(spec, flow, tf::tanh_coordinate(0, 1, 0.5), 0.0, 1.0, 1.0, probes, 0.0,
                                              400, C, seed, g_workers);
    const auto linear =
        gradient_bound_check(spec, flow, tf::coordinate(0, 1), 0.0, 1.0, 1.0, probes, 0.0, 50, C, seed, g_workers);
    const double oracle = std::exp(-p.a);
    double worst = 0.0;
    for (const auto& g : linear.probes) worst = std::max(worst, std::abs(g.norm / oracle - 1.0));
    return {bounded.pass() && linear.pass() && worst <= 0.05,
            "C=" + num(C) + " bound " + num(bounded.bound) + " flagged " + std::to_string(bounded.flagged) +
                " coupled-path rel.err " + num(worst, 3)};
}

StudyConfig default_study() {
    StudyConfig c;  // OU, q=2, kappa=8, n_grid 50..1600, 32 replications, M_reference 32000
    c.m = 1;
    c.workers = g_workers;
    c.output_dir = g_out.string();
    c.output_prefix = "chaos_rate";
    return c;
}

Outcome chaos_rate() {
    const auto report = run_chaos_study(default_study());
    write_chaos_outputs(report);
    std::string values;
    for (const auto& row : report.rows) values += num(row.value, 3) + " ";
    return {report.pass(), "slope " + num(report.fit.slope, 3) + " [" + num(report.fit.ci_low, 3) + ", " +
                               num(report.fit.ci_high, 3) + "] d=" + values +
                               (report.monotone ? "monotone" : "not monotone")};
}

Outcome gamma_values() {
    struct Case {
        double kappa, q;
        int m;
        double n, expected;
    };
    const Case cases[] = {{5, 2, 3, 100, 0.16309573444801934},
                          {5, 2, 4, 100, 0.5246077861321453},
                          {5, 2, 5, 100, 0.22158505369413067}};
    double worst = 0.0;
    for (const auto& c : cases) {
        const double v = gamma_rate(RateParams::make(c.kappa, c.q, c.m), c.n);
        worst = std::max(worst, std::abs(v / c.expected - 1.0));
    }
    auto rejects = [](double kappa, double q, int m) {
        try {
            gamma_rate(RateParams::make(kappa, q, m), 10);
        } catch (const std::domain_error&) {
            return true;
        }
        return false;
    };
    const bool rejected = rejects(4, 2, 3) && rejects(4, 2, 4) && rejects(5.0 / 3.0, 2, 5);
    return {worst <= 1e-12 && rejected, "max rel.err " + num(worst, 3) + (rejected ? " rejections ok" : " rejection missing")};
}

Outcome metric_axioms() {
    StreamRng rng(DriverSeed{109, {replication_in(StreamDomain::Validation, 9), 0, DriverKind::Probe}});
    const BasePoint base;
    auto draw = [&]() {
        if (rng.uniform() < 0.1) return ExtendedPoint::star();
        const double scale = std::exp(rng.uniform(-3.0, 4.0));
        return ExtendedPoint::finite(rng.uniform(0.0, 2.0), {scale * rng.normal(), scale * rng.normal()});
    };
    std::size_t failures = 0;
    for (int i = 0; i < 100000; ++i) {
        const auto a = draw(), b = draw(), c = draw();
        const double ab = compactified_distance(a, b, base);
        const double ac = compactified_distance(a, c, base);
        const double bc = compactified_distance(b, c, base);
        if (ab != compactified_distance(b, a, base) || ab > 1.0 || ab < 0.0 || ac > ab + bc + 1e-15) ++failures;
    }

    const auto dict = dictionary_r1(1, 64);
    auto three = [&]() {
        EmpiricalMeasure nu;
        nu.dim = 1;
        for (int k = 0; k < 3; ++k) {
            nu.marks.push_back(rng.uniform(0.5, 1.5));
            nu.states.push_back(2.0 * rng.normal());
        }
        return nu;
    };
    const std::vector<EmpiricalMeasure> same{three(), three(), three()};
    bool zero_ok = bl_distance(same, same, dict, 2.0).value == 0.0;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<EmpiricalMeasure> a{three(), three(), three(), three()};
        const auto b = three();
        const auto est = bl_distance(a, b, dict, 2.0);
        double brute = 0.0;
        for (const auto& phi : dict) {
            double acc = 0.0;
            for (const auto& nu : a) {
                double pa = 0.0, pb = 0.0;
                for (int k = 0; k < 3; ++k) {
                    pa += phi(nu.marks[k], nu.state(k)) / 3.0;
                    pb += phi(b.marks[k], b.state(k)) / 3.0;
                }
                acc += (pa - pb) * (pa - pb);
            }
            brute = std::max(brute, std::sqrt(acc / 4.0));
        }
        worst = std::max(worst, std::abs(est.value - brute));
    }
    return {failures == 0 && zero_ok && worst <= 1e-12,
            std::to_string(failures) + " axiom failures in 1e5 triples, BL brute-force gap " + num(worst, 3)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism(const std::string& cli) {
    const auto dir = g_out / "determinism";
    fs::create_directories(dir);
    const auto cfg = dir / "study.cfg";
    std::ofstream(cfg) << "[model]\nname = ou\n\n[study]\nn_grid = 50,100,200,400\nreplications = 16\n"
                          "M_reference = 8000\nm = 1\nseed = 110\n";
    std::set<std::string> csvs, jsons;
    std::string detail;
    for (int w : {1, 4, 8}) {
        const auto out = dir / ("w" + std::to_string(w));
        const std::string cmd = "\"" + cli + "\" chaos-study --config \"" + cfg.string() + "\" --workers " +
                                std::to_string(w) + " --out \"" + out.string() + "\" > /dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        detail += "w" + std::to_string(w) + ":rc=" + std::to_string(WEXITSTATUS(rc)) + " ";
        csvs.insert(slurp(out / "chaos.csv"));
        jsons.insert(slurp(out / "chaos.json"));
    }
    const bool pass = csvs.size() == 1 && jsons.size() == 1 && !csvs.begin()->empty();
    return {pass, detail + (pass ? "identical CSV/JSON" : "outputs differ")};
}

Outcome fhn_preset() {
    const auto spec = fhn_model(FhnParams{});
    ProbeBox box;
    box.lower = {-3.0, -3.0, 0.0};
    box.upper = {3.0, 3.0, 1.0};
    box.interaction_lower = 0.0;
    box.interaction_upper = 1.0;
    const auto report = validate_model(spec, 100000, {1.0, 2.0, 4.0}, 111, box);
    SimulationOptions opts;
    opts.workers = g_workers;
    const auto b = simulate_particles(spec, 10, 1.0, 1e-3, seed_in(StreamDomain::Particles, 111),
                                      uniform_times(1.0, 1000), opts);
    double lo = 1e300, hi = -1e300;
    for (std::size_t s = 0; s < b.snapshots(); ++s) {
        for (std::size_t i = 0; i < b.particles; ++i) {
            lo = std::min(lo, b.state(s, i)[2]);
            hi = std::max(hi, b.state(s, i)[2]);
        }
    }
    const bool finite = !b.truncation.truncated && b.snapshots() == 1001;
    return {report.pass() && finite && lo >= -0.05 && hi <= 1.05,
            std::to_string(report.violations.size()) + " violations, worst growth ratio " +
                num(report.worst_growth_ratio, 3) + "/" + num(spec.constants.growth_K_bar, 3) + ", x3 in [" +
                num(lo, 3) + ", " + num(hi, 3) + "]"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string out = "acceptance_out";
    std::string cli = CHAOSLAB_CLI_PATH;
    std::vector<int> only;
    app.add_option("--out", out, "scratch directory");
    app.add_option("--cli", cli, "path of the chaoslab executable");
    app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
    app.add_option("--workers", g_workers, "worker threads (0 = all)");
    CLI11_PARSE(app, argc, argv);
    g_out = out;
    fs::create_directories(g_out);

    struct Criterion {
        int id;
        const char* name;
        double budget_seconds;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "compensated martingale", 30, compensated_martingale},
        {2, "OU moment oracle", 120, ou_moments},
        {3, "jump-source oracle", 120, jump_source},
        {4, "weak-form residual", 300, fpk_residual_check},
        {5, "propagator identities", 600, propagator_identities},
        {6, "gradient bound", 600, gradient_bound},
        {7, "chaos rate", 900, chaos_rate},
        {8, "gamma formula", 1, gamma_values},
        {9, "metric axioms", 60, metric_axioms},
        {10, "determinism", 900, [&] { return determinism(cli); }},
        {11, "FHN preset", 60, fhn_preset},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = seconds <= c.budget_seconds;
        const bool pass = o.pass && in_time;
        if (!pass) ++failed;
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
                  << num(seconds, 3) << " s" << (in_time ? "" : ", over budget") << "]" << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
