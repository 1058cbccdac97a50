#include "chaoslab/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "chaoslab/errors.hpp"
#include "chaoslab/flow.hpp"
#include "chaoslab/generator.hpp"
#include "chaoslab/hash.hpp"
#include "chaoslab/metrics.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/presets.hpp"
#include "chaoslab/study.hpp"

namespace chaoslab {

using nlohmann::json;

namespace {

struct ModelOptions {
    std::string config;
    std::string model;
    std::vector<std::string> params;
};

void add_model_options(CLI::App* cmd, ModelOptions& o) {
    cmd->add_option("--config", o.config, "config file ([model] section is read)");
    cmd->add_option("--model", o.model, "model name (fhn, ou, zero, cubic, or a registered custom model)");
    cmd->add_option("--param", o.params, "model parameter override key=value (repeatable)");
}

std::pair<std::string, std::map<std::string, double>> resolve_model(const ModelOptions& o) {
    std::string name = "ou";
    std::map<std::string, double> params;
    if (!o.config.empty()) std::tie(name, params) = load_model_section(o.config);
    if (!o.model.empty()) name = o.model;
    for (const auto& kv : o.params) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--param expects key=value, got '" + kv + "'");
        try {
            params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        } catch (const std::exception&) {
            throw UsageError("--param " + kv + ": value is not a number");
        }
    }
    return {name, params};
}

std::string canonical_model(const std::string& name, const std::map<std::string, double>& params) {
    std::string s = "model=" + name + "\n";
    for (const auto& [k, v] : params) s += "model." + k + "=" + format_number(v) + "\n";
    return s;
}

std::vector<double> snapshot_grid(double T, double dt, std::size_t count) {
    if (count < 2) return {0.0, T};
    const auto steps = static_cast<std::uint64_t>(std::llround(T / dt));
    const std::uint64_t stride = std::max<std::uint64_t>(1, steps / (count - 1));
    std::vector<double> out;
    for (std::uint64_t k = 0; k < steps; k += stride) out.push_back(static_cast<double>(k) * dt);
    out.push_back(T);
    return out;
}

std::string with_suffix(const std::string& prefix, const std::string& suffix) { return prefix + suffix; }

std::vector<double> parse_radii(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw UsageError("bad number in list: '" + item + "'");
        }
    }
    return out;
}

ProbeBox parse_box(const std::string& text, int dim, double horizon) {
    ProbeBox box;
    box.horizon = horizon;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw UsageError("--box expects lo:hi pairs, got '" + item + "'");
        try {
            box.lower.push_back(std::stod(item.substr(0, colon)));
            box.upper.push_back(std::stod(item.substr(colon + 1)));
        } catch (const std::exception&) {
            throw UsageError("--box: bad number in '" + item + "'");
        }
    }
    if (static_cast<int>(box.lower.size()) != dim) {
        throw UsageError("--box needs " + std::to_string(dim) + " intervals");
    }
    return box;
}

json violation_json(const Violation& v) {
    return {{"assumption", v.assumption}, {"t", v.t}, {"x", v.x}, {"y", v.y}, {"lhs", v.lhs}, {"rhs", v.rhs}};
}

// ---- simulate ------------------------------------------------------------

struct SimulateArgs {
    ModelOptions model;
    std::size_t n = 100;
    double T = 1.0;
    double dt = 0.01;
    std::size_t snapshots = 11;
    std::uint64_t seed = 1;
    int workers = 0;
    std::string radii = "5,10,50";
    std::string out = "simulate";
};

int run_simulate(const SimulateArgs& a, std::ostream& out) {
    const auto [name, params] = resolve_model(a.model);
    const ModelSpec spec = make_model(name, params);
    std::ostringstream canon;
    canon << "simulate\n" << canonical_model(name, params) << "n=" << a.n << "\nT=" << format_number(a.T)
          << "\ndt=" << format_number(a.dt) << "\nsnapshots=" << a.snapshots << "\nseed=" << a.seed << '\n';
    const std::string hash = hex64(fnv1a64(canon.str()));

    SimulationOptions opts;
    opts.workers = a.workers;
    const DriverSeed seed{a.seed, {replication_in(StreamDomain::Particles, 0), 0, DriverKind::Brownian}};
    const auto bundle = simulate_particles(spec, a.n, a.T, a.dt, seed, snapshot_grid(a.T, a.dt, a.snapshots), opts);
    const auto stability = stability_monitor(bundle, parse_radii(a.radii), lyapunov_constant(spec));

    json j;
    j["schema"] = kJsonSchema;
    j["build_id"] = build_id();
    j["config_hash"] = hash;
    j["seed"] = a.seed;
    j["model"] = name;
    j["model_hash"] = spec.model_hash();
    j["particles"] = a.n;
    j["time_grid"] = bundle.time_grid;
    j["integration"] = {{"dt", bundle.grid.dt}, {"requested_dt", bundle.grid.requested_dt}, {"steps", bundle.grid.steps}};
    j["truncated"] = bundle.truncation.truncated;
    if (bundle.truncation.truncated) {
        j["truncation"] = {{"particle", bundle.truncation.particle}, {"time", bundle.truncation.time}};
    }
    json mean_curve = json::array();
    for (double t : bundle.time_grid) mean_curve.push_back(empirical_measure(bundle, t).mean_state());
    j["mean_curve"] = mean_curve;
    json radii = json::array();
    for (const auto& r : stability.radii) {
        radii.push_back({{"radius", r.radius},
                         {"exit_fraction", r.exit_fraction},
                         {"lyapunov_curve", r.lyapunov_curve},
                         {"envelope", r.envelope},
                         {"pass", r.pass}});
    }
    j["stability"] = {{"rate_constant", stability.rate_constant}, {"radii", radii}, {"pass", stability.pass()}};

    write_text_file(with_suffix(a.out, ".csv"), bundle_csv(bundle, hash, a.seed));
    write_text_file(with_suffix(a.out, ".json"), j.dump(2) + "\n");
    out << "simulated " << a.n << " particles of '" << name << "' to t = "
        << format_number(bundle.time_grid.back()) << (bundle.truncation.truncated ? " (truncated)" : "") << '\n'
        << "wrote " << a.out << ".csv and " << a.out << ".json\n";
    if (bundle.truncation.truncated) {
        throw NumericalAbort("non-finite state in particle " + std::to_string(bundle.truncation.particle),
                             bundle.truncation.time, {});
    }
    return kExitOk;
}

// ---- solve-limit -----------------------------------------------------------

struct SolveArgs {
    ModelOptions model;
    std::size_t M = 2000;
    double T = 1.0;
    double dt = 0.01;
    double tol = 0.0;
    std::size_t max_iters = 20;
    std::size_t snapshots = 21;
    std::uint64_t seed = 1;
    int workers = 0;
    std::string out = "flow";
};

int run_solve(const SolveArgs& a, std::ostream& out) {
    const auto [name, params] = resolve_model(a.model);
    const ModelSpec spec = make_model(name, params);
    std::ostringstream canon;
    canon << "solve-limit\n" << canonical_model(name, params) << "M=" << a.M << "\nT=" << format_number(a.T)
          << "\ndt=" << format_number(a.dt) << "\ntol=" << format_number(a.tol) << "\nmax_iters=" << a.max_iters
          << "\nsnapshots=" << a.snapshots << "\nseed=" << a.seed << '\n';
    const std::string hash = hex64(fnv1a64(canon.str()));
    PicardOptions opts;
    opts.workers = a.workers;
    opts.snapshot_times = snapshot_grid(a.T, a.dt, a.snapshots);
    const double tol = a.tol > 0.0 ? a.tol : default_picard_tolerance(a.M);
    const DriverSeed seed{a.seed, {replication_in(StreamDomain::Flow, 0), 0, DriverKind::Brownian}};
    const auto flow = solve_mkv_picard(spec, a.M, a.T, a.dt, a.max_iters, tol, seed, opts);
    write_text_file(with_suffix(a.out, ".csv"), flow_csv(flow, hash, a.seed));
    write_text_file(with_suffix(a.out, ".json"), flow_json(flow, hash, a.seed));
    out << "picard: " << flow.trace.iterations << " iterations, "
        << (flow.trace.converged ? "converged" : "NOT converged") << " (tol " << format_number(tol) << ")\n";
    for (std::size_t k = 0; k < flow.trace.distances.size(); ++k) {
        out << "  d(flow^" << k + 1 << ", flow^" << k << ") = " << format_number(flow.trace.distances[k]) << '\n';
    }
    out << "wrote " << a.out << ".csv and " << a.out << ".json\n";
    return kExitOk;
}

// ---- validate --------------------------------------------------------------

struct ValidateArgs {
    ModelOptions model;
    std::size_t probes = 2000;
    std::string radii = "1,2,5";
    std::string box;
    double half_width = 10.0;
    std::size_t M = 2000;
    double T = 1.0;
    double dt = 0.01;
    std::size_t reps = 400;
    std::size_t gradient_probes = 5;
    std::uint64_t seed = 1;
    int workers = 0;
    bool skip_flow = false;
    std::string out;
};

int run_validate(const ValidateArgs& a, std::ostream& out) {
    const auto [name, params] = resolve_model(a.model);
    const ModelSpec spec = make_model(name, params);
    ProbeBox box;
    if (!a.box.empty()) {
        box = parse_box(a.box, spec.dim_state, a.T);
    } else if (name == "fhn") {
        box.lower = {-3.0, -3.0, 0.0};
        box.upper = {3.0, 3.0, 1.0};
        box.horizon = a.T;
    } else {
        box = ProbeBox::cube(spec.dim_state, a.half_width, a.T);
    }

    json checks = json::array();
    bool all_pass = true;
    auto add = [&](json check, bool asserted, bool pass) {
        check["asserted"] = asserted;
        check["pass"] = pass;
        if (asserted && !pass) all_pass = false;
        checks.push_back(std::move(check));
    };

    const auto report = validate_model(spec, a.probes, parse_radii(a.radii), a.seed, box);
    json violations = json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(report.violations.size(), 20); ++i) {
        violations.push_back(violation_json(report.violations[i]));
    }
    add({{"name", "validate_model"},
         {"probes", report.probes},
         {"worst_growth_ratio", report.worst_growth_ratio},
         {"worst_jump_ratio", report.worst_jump_ratio},
         {"radii", report.radii},
         {"worst_local_lipschitz", report.worst_local_lipschitz},
         {"violations", report.violations.size()},
         {"first_violations", violations}},
        true, report.pass());

    if (!a.skip_flow) {
        PicardOptions opts;
        opts.workers = a.workers;
        opts.snapshot_times = snapshot_grid(a.T, a.dt, static_cast<std::size_t>(std::llround(a.T / a.dt)) + 1);
        const DriverSeed flow_seed{a.seed, {replication_in(StreamDomain::Flow, 0), 0, DriverKind::Brownian}};
        const auto flow = solve_mkv_picard(spec, a.M, a.T, a.dt, 20, default_picard_tolerance(a.M), flow_seed, opts);
        add({{"name", "picard"}, {"iterations", flow.trace.iterations}, {"distances", flow.trace.distances}}, false,
            flow.trace.converged);

        std::vector<TestFunction> phis;
        for (int k = 0; k < spec.dim_state; ++k) {
            phis.push_back(test_functions::coordinate(static_cast<std::size_t>(k), spec.dim_state));
            phis.push_back(test_functions::tanh_coordinate(static_cast<std::size_t>(k), spec.dim_state, 0.5));
        }
        for (const auto& phi : phis) {
            const auto r = fpk_residual_detail(spec, flow, phi, {}, a.workers);
            add({{"name", "fpk_residual"},
                 {"phi", phi.id},
                 {"max_abs", r.max_abs},
                 {"se_at_max", r.se_at_max},
                 {"time_at_max", r.time_at_max}},
                true, r.max_abs <= 3.0 * r.se_at_max + 1e-12);
        }

        const TestFunction phi = test_functions::tanh_coordinate(0, spec.dim_state, 0.5);
        const DriverSeed prop_seed{a.seed, {replication_in(StreamDomain::Propagator, 0), 0, DriverKind::Brownian}};
        const double u = a.T;
        const auto constancy =
            propagator_constancy_check(spec, flow, phi, u, {0.0, 0.5 * u, u}, 1, prop_seed, a.M, a.workers);
        // The constancy identity leans on a bi-Lipschitz jump map; without
        // one the result is reported only.
        const bool bi_lipschitz = spec.jump_free || spec.constants.jump_L_h_lower > 0.0;
        add({{"name", "propagator_constancy"},
             {"phi", phi.id},
             {"times", constancy.times},
             {"values", constancy.values},
             {"max_deviation", constancy.max_deviation},
             {"pooled_se", constancy.pooled_se}},
            bi_lipschitz, constancy.within(3.0));

        const double C = gradient_constant(spec);
        std::vector<std::vector<double>> probes;
        StreamRng rng(DriverSeed{a.seed, {replication_in(StreamDomain::Validation, 1), 0, DriverKind::Probe}});
        for (std::size_t i = 0; i < a.gradient_probes; ++i) {
            std::vector<double> x(static_cast<std::size_t>(spec.dim_state));
            for (std::size_t k = 0; k < x.size(); ++k) {
                const double lo = k < box.lower.size() ? box.lower[k] : -1.0;
                const double hi = k < box.upper.size() ? box.upper[k] : 1.0;
                x[k] = rng.uniform(std::max(lo, -3.0), std::min(hi, 3.0));
            }
            probes.push_back(std::move(x));
        }
        const double p = spec.mark_law.limit;
        const auto grad = gradient_bound_check(spec, flow, phi, 0.0, 0.5 * u, p, probes, 0.0, a.reps, C,
                                               DriverSeed{a.seed, {replication_in(StreamDomain::Propagator, 1)}},
                                               a.workers);
        json norms = json::array();
        std::size_t sharper = 0;
        for (const auto& g : grad.probes) {
            norms.push_back({{"x", g.x}, {"norm", g.norm}, {"se", g.norm_se}, {"flagged", g.flagged}});
            sharper += g.exceeds_sharper ? 1 : 0;
        }
        add({{"name", "gradient_bound"},
             {"constant", C},
             {"bound", grad.bound},
             {"sharper_bound", grad.sharper_bound},
             {"exceeds_sharper", sharper},
             {"probes", norms}},
            true, grad.pass());
    }

    json j;
    j["schema"] = kJsonSchema;
    j["build_id"] = build_id();
    j["config_hash"] = hex64(fnv1a64("validate\n" + canonical_model(name, params)));
    j["seed"] = a.seed;
    j["model"] = name;
    j["checks"] = checks;
    j["pass"] = all_pass;
    const std::string text = j.dump(2) + "\n";
    if (!a.out.empty()) write_text_file(a.out, text);
    out << text;
    return all_pass ? kExitOk : kExitCheckFailed;
}

// ---- chaos-study ------------------------------------------------------------

struct StudyArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::string out;
    std::string reference;
};

int run_study(const StudyArgs& a, std::ostream& out, std::ostream& err) {
    StudyConfig config = a.config.empty() ? StudyConfig{} : load_study_config(a.config);
    if (a.seed) config.seed = *a.seed;
    if (a.workers) config.workers = *a.workers;
    if (!a.out.empty()) config.output_dir = a.out;
    if (!a.reference.empty()) config.reference = a.reference;
    const auto report = run_chaos_study(config);
    const auto csv = write_chaos_outputs(report);
    out << "n,d_qT,se\n";
    for (const auto& row : report.rows) {
        out << row.n << ',' << format_number(row.value) << ',' << format_number(row.se)
            << (row.complete ? "" : ",incomplete") << '\n';
    }
    if (report.fit.defined) {
        out << "slope " << format_number(report.fit.slope) << " (95% CI " << format_number(report.fit.ci_low)
            << ", " << format_number(report.fit.ci_high) << "), window [" << format_number(config.slope_min) << ", "
            << format_number(config.slope_max) << "], predicted exponent "
            << format_number(report.predicted_exponent) << '\n';
    } else {
        out << "slope undefined (fewer than 3 complete points)\n";
    }
    out << "wrote " << csv << '\n';
    err << "runtime " << report.runtime_seconds << " s\n";
    return kExitOk;
}

// ---- gamma -----------------------------------------------------------------

struct GammaArgs {
    double kappa = 0.0;
    double q = 2.0;
    int m = 1;
    std::vector<double> n;
};

int run_gamma(const GammaArgs& a, std::ostream& out) {
    const auto params = RateParams::make(a.kappa, a.q, a.m);
    char buffer[64];
    if (a.n.size() == 1) {
        std::snprintf(buffer, sizeof(buffer), "%.6f", gamma_rate(params, a.n.front()));
        out << buffer << '\n';
        return kExitOk;
    }
    out << "n,gamma\n";
    for (double n : a.n) {
        std::snprintf(buffer, sizeof(buffer), "%.6f", gamma_rate(params, n));
        out << format_number(n) << ',' << buffer << '\n';
    }
    return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) { return cli_main(argc, argv, std::cout, std::cerr); }

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mean-field jump-diffusion propagation-of-chaos lab"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "simulate the n-particle system");
    add_model_options(simulate, sim.model);
    simulate->add_option("--n", sim.n, "particles");
    simulate->add_option("--T", sim.T, "horizon");
    simulate->add_option("--dt", sim.dt, "time step");
    simulate->add_option("--snapshots", sim.snapshots, "number of snapshot times");
    simulate->add_option("--seed", sim.seed, "master seed");
    simulate->add_option("--workers", sim.workers, "worker threads (0 = all)");
    simulate->add_option("--radii", sim.radii, "comma list of exit radii");
    simulate->add_option("--out", sim.out, "output path prefix");

    SolveArgs solve;
    auto* solve_cmd = app.add_subcommand("solve-limit", "solve the limit flow by Picard iteration");
    add_model_options(solve_cmd, solve.model);
    solve_cmd->add_option("--M", solve.M, "atoms");
    solve_cmd->add_option("--T", solve.T, "horizon");
    solve_cmd->add_option("--dt", solve.dt, "time step");
    solve_cmd->add_option("--tol", solve.tol, "stopping tolerance (0 = 2/sqrt(M))");
    solve_cmd->add_option("--max-iters", solve.max_iters, "maximum Picard iterations");
    solve_cmd->add_option("--snapshots", solve.snapshots, "number of stored slices");
    solve_cmd->add_option("--seed", solve.seed, "master seed");
    solve_cmd->add_option("--workers", solve.workers, "worker threads (0 = all)");
    solve_cmd->add_option("--out", solve.out, "output path prefix");

    ValidateArgs val;
    auto* validate = app.add_subcommand("validate", "check certificates, FPK residual and propagator identities");
    add_model_options(validate, val.model);
    validate->add_option("--probes", val.probes, "random probes for the growth checks");
    validate->add_option("--radii", val.radii, "comma list of Lipschitz radii");
    validate->add_option("--box", val.box, "probe box lo:hi per coordinate, comma separated");
    validate->add_option("--half-width", val.half_width, "cube half width when --box is absent");
    validate->add_option("--M", val.M, "atoms of the solved flow");
    validate->add_option("--T", val.T, "horizon");
    validate->add_option("--dt", val.dt, "time step");
    validate->add_option("--reps", val.reps, "propagator repetitions");
    validate->add_option("--gradient-probes", val.gradient_probes, "probe points for the gradient bound");
    validate->add_option("--seed", val.seed, "master seed");
    validate->add_option("--workers", val.workers, "worker threads (0 = all)");
    validate->add_flag("--skip-flow", val.skip_flow, "only run the coefficient checks");
    validate->add_option("--out", val.out, "write the JSON verdict here too");

    StudyArgs study;
    auto* chaos = app.add_subcommand("chaos-study", "run a propagation-of-chaos rate study");
    chaos->add_option("--config", study.config, "study config file")->check(CLI::ExistingFile);
    chaos->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { study.seed = v; }, "master seed");
    chaos->add_option_function<int>("--workers", [&](const int& v) { study.workers = v; }, "worker threads");
    chaos->add_option("--out", study.out, "output directory");
    chaos->add_option("--reference", study.reference, "picard or particle:<N>");

    GammaArgs gamma;
    auto* gamma_cmd = app.add_subcommand("gamma", "print the rate function");
    gamma_cmd->add_option("--kappa", gamma.kappa, "kappa > q")->required();
    gamma_cmd->add_option("--q", gamma.q, "q >= 2");
    gamma_cmd->add_option("--m", gamma.m, "dimension m >= 1");
    gamma_cmd->add_option("--n", gamma.n, "one or more n")->required()->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*simulate) return run_simulate(sim, out);
        if (*solve_cmd) return run_solve(solve, out);
        if (*validate) return run_validate(val, out);
        if (*chaos) return run_study(study, out, err);
        if (*gamma_cmd) return run_gamma(gamma, out);
    } catch (const NumericalAbort& e) {
        err << "numerical abort: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitUsage;
}

}  // namespace chaoslab
