#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>

#include "chaoslab/cli.hpp"
#include "chaoslab/errors.hpp"
#include "chaoslab/flow.hpp"
#include "chaoslab/metrics.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/presets.hpp"
#include "chaoslab/study.hpp"

namespace py = pybind11;
using namespace chaoslab;

namespace {

using Params = std::map<std::string, double>;

py::array_t<double> cube(const std::vector<double>& data, std::size_t a, std::size_t b, std::size_t c) {
    py::array_t<double> out({a, b, c});
    std::memcpy(out.mutable_data(), data.data(), data.size() * sizeof(double));
    return out;
}

std::vector<double> snapshot_times(double T, std::size_t count) {
    return count <= 1 ? std::vector<double>{T} : uniform_times(T, count - 1);
}

DriverSeed root_seed(std::uint64_t seed, StreamDomain domain) {
    return DriverSeed{seed, {replication_in(domain, 0), 0, DriverKind::Brownian}};
}

// (n, m) array plus optional marks -> atoms.
EmpiricalMeasure to_measure(py::array_t<double, py::array::c_style | py::array::forcecast> states,
                            std::optional<std::vector<double>> marks) {
    if (states.ndim() == 1) states = states.reshape({states.shape(0), py::ssize_t{1}});
    if (states.ndim() != 2) throw std::invalid_argument("states must have shape (n, m)");
    EmpiricalMeasure nu;
    const auto n = static_cast<std::size_t>(states.shape(0));
    nu.dim = static_cast<int>(states.shape(1));
    nu.states.assign(states.data(), states.data() + states.size());
    nu.marks = marks ? *marks : std::vector<double>(n, 1.0);
    nu.check();
    return nu;
}

ExtendedPoint to_point(const std::optional<std::vector<double>>& v) {
    // None is the added point; otherwise (p, x_0, ..., x_{m-1})
    if (!v) return ExtendedPoint::star();
    if (v->empty()) throw std::invalid_argument("a finite point needs at least the mark p");
    return ExtendedPoint::finite(v->front(), std::vector<double>(v->begin() + 1, v->end()));
}

py::dict simulate(const std::string& model, const Params& params, std::size_t n, double T, double dt,
                  std::size_t snapshots, std::uint64_t seed, int workers) {
    const auto spec = make_model(model, params);
    SimulationOptions opts;
    opts.workers = workers;
    TrajectoryBundle b;
    {
        py::gil_scoped_release release;
        b = simulate_particles(spec, n, T, dt, root_seed(seed, StreamDomain::Particles), snapshot_times(T, snapshots),
                               opts);
    }
    const auto m = static_cast<std::size_t>(b.dim);
    py::dict out;
    out["times"] = b.time_grid;
    out["states"] = cube(b.states, b.snapshots(), b.particles, m);
    out["marks"] = b.marks;
    py::array_t<std::uint32_t> counts({b.snapshots(), b.particles});
    std::memcpy(counts.mutable_data(), b.jump_counts.data(), b.jump_counts.size() * sizeof(std::uint32_t));
    out["jump_counts"] = counts;
    py::array_t<double> comp({b.snapshots(), b.particles});
    std::memcpy(comp.mutable_data(), b.compensators.data(), b.compensators.size() * sizeof(double));
    out["compensators"] = comp;
    out["truncated"] = b.truncation.truncated;
    out["dt"] = b.grid.dt;
    return out;
}

py::dict solve_limit(const std::string& model, const Params& params, std::size_t M, double T, double dt,
                     std::size_t max_iters, double tol, std::size_t snapshots, std::uint64_t seed, int workers) {
    const auto spec = make_model(model, params);
    PicardOptions opts;
    opts.snapshot_times = snapshot_times(T, snapshots);
    if (opts.snapshot_times.front() != 0.0) opts.snapshot_times.insert(opts.snapshot_times.begin(), 0.0);
    opts.workers = workers;
    MeasureFlow flow;
    {
        py::gil_scoped_release release;
        flow = solve_mkv_picard(spec, M, T, dt, max_iters, tol > 0.0 ? tol : default_picard_tolerance(M),
                                root_seed(seed, StreamDomain::Flow), opts);
    }
    std::vector<double> states;
    for (const auto& e : flow.ensembles) states.insert(states.end(), e.states.begin(), e.states.end());
    py::dict out;
    out["times"] = flow.time_grid;
    out["states"] = cube(states, flow.size(), M, static_cast<std::size_t>(spec.dim_state));
    out["marks"] = flow.ensembles.front().marks;
    out["mean_curve"] = flow.mean_curve;
    out["distances"] = flow.trace.distances;
    out["iterations"] = flow.trace.iterations;
    out["converged"] = flow.trace.converged;
    out["tolerance"] = flow.trace.tolerance;
    return out;
}

py::dict validate(const std::string& model, const Params& params, std::size_t probes, const std::vector<double>& radii,
                  std::uint64_t seed, std::optional<std::vector<double>> lower, std::optional<std::vector<double>> upper) {
    const auto spec = make_model(model, params);
    ProbeBox box = ProbeBox::cube(spec.dim_state, 10.0);
    if (lower && upper) {
        box.lower = *lower;
        box.upper = *upper;
    }
    const auto r = validate_model(spec, probes, radii, seed, box);
    py::list violations;
    for (const auto& v : r.violations) {
        violations.append(py::dict(py::arg("assumption") = v.assumption, py::arg("t") = v.t, py::arg("x") = v.x,
                                   py::arg("lhs") = v.lhs, py::arg("rhs") = v.rhs));
    }
    py::dict out;
    out["pass"] = r.pass();
    out["worst_growth_ratio"] = r.worst_growth_ratio;
    out["worst_jump_ratio"] = r.worst_jump_ratio;
    out["worst_local_lipschitz"] = r.worst_local_lipschitz;
    out["violations"] = violations;
    out["growth_K_bar"] = spec.constants.growth_K_bar;
    return out;
}

py::dict bl(const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& samples,
            py::array_t<double, py::array::c_style | py::array::forcecast> reference, double q,
            const std::string& dictionary, std::size_t size, std::uint64_t dictionary_seed) {
    std::vector<EmpiricalMeasure> a;
    for (const auto& s : samples) a.push_back(to_measure(s, std::nullopt));
    const auto b = to_measure(reference, std::nullopt);
    DictionaryOptions d;
    d.kind = parse_dictionary_kind(dictionary);
    d.seed = dictionary_seed;
    const auto est = bl_distance(a, b, dictionary_r1(b.dim, size, d), q);
    py::dict out;
    out["value"] = est.value;
    out["se"] = est.se;
    out["maximizer"] = est.maximizer;
    return out;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> all{"chaoslab"};
    all.insert(all.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : all) argv.push_back(a.c_str());
    py::gil_scoped_release release;
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

PYBIND11_MODULE(_chaoslab, m) {
    m.doc() = "Mean-field jump-diffusion particle systems and their limit flows";

    py::register_exception<NumericalAbort>(m, "NumericalAbort", PyExc_ArithmeticError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

    m.def("models", &registered_models, "names of the registered models");
    m.def("fhn_chi", &fhn_chi, py::arg("y"));

    m.def(
        "gamma_rate",
        [](double kappa, double q, int dim, double n) { return gamma_rate(RateParams::make(kappa, q, dim), n); },
        py::arg("kappa"), py::arg("q"), py::arg("m"), py::arg("n"));
    m.def(
        "predicted_exponent",
        [](double kappa, double q, int dim) { return predicted_exponent(RateParams::make(kappa, q, dim)); },
        py::arg("kappa"), py::arg("q"), py::arg("m"));

    m.def("simulate", &simulate, py::arg("model") = "ou", py::arg("params") = Params{}, py::arg("n") = 100,
          py::arg("T") = 1.0, py::arg("dt") = 0.01, py::arg("snapshots") = 11, py::arg("seed") = 1,
          py::arg("workers") = 0);
    m.def("solve_limit", &solve_limit, py::arg("model") = "ou", py::arg("params") = Params{}, py::arg("M") = 2000,
          py::arg("T") = 1.0, py::arg("dt") = 0.01, py::arg("max_iters") = 20, py::arg("tol") = 0.0,
          py::arg("snapshots") = 11, py::arg("seed") = 1, py::arg("workers") = 0);
    m.def("validate_model", &validate, py::arg("model"), py::arg("params") = Params{}, py::arg("probes") = 2000,
          py::arg("radii") = std::vector<double>{1.0, 2.0, 5.0}, py::arg("seed") = 1, py::arg("lower") = py::none(),
          py::arg("upper") = py::none());

    m.def(
        "compactified_distance",
        [](std::optional<std::vector<double>> a, std::optional<std::vector<double>> b, double base_p,
           std::vector<double> base_x) {
            return compactified_distance(to_point(a), to_point(b), BasePoint{base_p, std::move(base_x)});
        },
        py::arg("a"), py::arg("b"), py::arg("base_p") = 0.0, py::arg("base_x") = std::vector<double>{},
        "distance on E plus the added point; None is the added point, finite points are (p, x...)");
    m.def("bl_distance", &bl, py::arg("samples"), py::arg("reference"), py::arg("q") = 2.0,
          py::arg("dictionary") = "compactified", py::arg("size") = 64, py::arg("dictionary_seed") = 0);

    m.def(
        "fit_rate_slope",
        [](const std::vector<double>& ns, const std::vector<double>& values, const std::vector<double>& weights) {
            const auto f = fit_rate_slope(ns, values, weights);
            py::dict out;
            out["slope"] = f.slope;
            out["intercept"] = f.intercept;
            out["slope_se"] = f.slope_se;
            out["ci"] = py::make_tuple(f.ci_low, f.ci_high);
            return out;
        },
        py::arg("ns"), py::arg("values"), py::arg("weights") = std::vector<double>{});

    m.def(
        "chaos_study",
        [](const std::string& config_path, std::optional<int> workers) {
            auto config = load_study_config(config_path);
            if (workers) config.workers = *workers;
            ChaosReport report;
            {
                py::gil_scoped_release release;
                report = run_chaos_study(config);
            }
            return chaos_json(report);
        },
        py::arg("config"), py::arg("workers") = py::none(), "runs a study and returns the JSON report text");

    m.def("cli", &run_cli, py::arg("args"), "runs the command-line tool in-process and returns its exit code");
    m.attr("build_id") = build_id();
}
