#include "chaoslab/study.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "chaoslab/errors.hpp"
#include "chaoslab/hash.hpp"
#include "chaoslab/parallel.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/presets.hpp"

#ifndef CHAOSLAB_BUILD_ID
#define CHAOSLAB_BUILD_ID "unknown"
#endif

namespace chaoslab {

using nlohmann::json;

std::string build_id() { return CHAOSLAB_BUILD_ID; }

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

namespace {

std::string join_numbers(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format_number(values[i]);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': expected a number, got '" + text + "'");
    }
}

std::uint64_t parse_count(const std::string& key, const std::string& text) {
    const double v = parse_double(key, text);
    if (v < 0 || v != std::floor(v)) throw UsageError("config key '" + key + "': expected a count, got '" + text + "'");
    return static_cast<std::uint64_t>(v);
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(parse_double(key, item));
    }
    return out;
}

boost::property_tree::ptree read_ini(const std::string& path) {
    if (!std::filesystem::exists(path)) throw UsageError("config file not found: " + path);
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw UsageError("cannot parse config file " + path + ": " + e.message());
    }
    return tree;
}

std::pair<std::string, std::map<std::string, double>> model_section(const boost::property_tree::ptree& tree) {
    std::string name = "ou";
    std::map<std::string, double> params;
    if (const auto section = tree.get_child_optional("model")) {
        for (const auto& [key, node] : *section) {
            const auto value = node.get_value<std::string>();
            if (key == "name") {
                name = value;
            } else {
                params[key] = parse_double("model." + key, value);
            }
        }
    }
    return {name, params};
}

}  // namespace

std::pair<std::string, std::map<std::string, double>> load_model_section(const std::string& path) {
    return model_section(read_ini(path));
}

StudyConfig load_study_config(const std::string& path) {
    const auto tree = read_ini(path);
    StudyConfig c;
    std::tie(c.model, c.model_params) = model_section(tree);
    for (const auto& [section, node] : tree) {
        if (section != "model" && section != "study" && section != "metric" && section != "output") {
            throw UsageError("unknown config section [" + section + "]");
        }
    }
    if (const auto study = tree.get_child_optional("study")) {
        for (const auto& [key, node] : *study) {
            const auto v = node.get_value<std::string>();
            const std::string k = "study." + key;
            if (key == "n_grid") {
                c.n_grid.clear();
                for (double n : parse_list(k, v)) {
                    if (n < 1 || n != std::floor(n)) throw UsageError("study.n_grid entries must be positive integers");
                    c.n_grid.push_back(static_cast<std::size_t>(n));
                }
            } else if (key == "replications") {
                c.replications = parse_count(k, v);
            } else if (key == "q") {
                c.q = parse_double(k, v);
            } else if (key == "kappa") {
                c.kappa = parse_double(k, v);
            } else if (key == "m") {
                c.m = static_cast<int>(parse_count(k, v));
            } else if (key == "M_reference") {
                c.M_reference = parse_count(k, v);
            } else if (key == "T") {
                c.T = parse_double(k, v);
            } else if (key == "dt") {
                c.dt = parse_double(k, v);
            } else if (key == "eval_points") {
                c.eval_points = parse_count(k, v);
            } else if (key == "seed") {
                c.seed = parse_count(k, v);
            } else if (key == "slope_min") {
                c.slope_min = parse_double(k, v);
            } else if (key == "slope_max") {
                c.slope_max = parse_double(k, v);
            } else if (key == "picard_max_iters") {
                c.picard_max_iters = parse_count(k, v);
            } else if (key == "picard_tol") {
                c.picard_tol = parse_double(k, v);
            } else if (key == "reference") {
                c.reference = v;
            } else if (key == "workers") {
                c.workers = static_cast<int>(parse_count(k, v));
            } else {
                throw UsageError("unknown config key " + k);
            }
        }
    }
    if (const auto metric = tree.get_child_optional("metric")) {
        for (const auto& [key, node] : *metric) {
            const auto v = node.get_value<std::string>();
            const std::string k = "metric." + key;
            if (key == "dictionary") {
                try {
                    c.dictionary = parse_dictionary_kind(v);
                } catch (const std::invalid_argument& e) {
                    throw UsageError(e.what());
                }
            } else if (key == "dictionary_size") {
                c.dictionary_size = parse_count(k, v);
            } else if (key == "dictionary_seed") {
                c.dictionary_seed = parse_count(k, v);
            } else if (key == "scale") {
                c.dictionary_scale = parse_double(k, v);
            } else if (key == "base_p") {
                c.base.p = parse_double(k, v);
            } else if (key == "base_x") {
                c.base.x = parse_list(k, v);
            } else {
                throw UsageError("unknown config key " + k);
            }
        }
    }
    if (const auto output = tree.get_child_optional("output")) {
        for (const auto& [key, node] : *output) {
            const auto v = node.get_value<std::string>();
            if (key == "dir") {
                c.output_dir = v;
            } else if (key == "prefix") {
                c.output_prefix = v;
            } else {
                throw UsageError("unknown config key output." + key);
            }
        }
    }
    return c;
}

void StudyConfig::validate() const {
    if (n_grid.empty()) throw UsageError("study.n_grid must not be empty");
    for (std::size_t i = 1; i < n_grid.size(); ++i) {
        if (n_grid[i] <= n_grid[i - 1]) throw UsageError("study.n_grid must be strictly increasing");
    }
    if (replications < 2) throw UsageError("study.replications must be >= 2");
    if (!(q >= 2.0)) throw UsageError("study.q must be >= 2");
    if (!(kappa > q)) throw UsageError("study.kappa must exceed q");
    if (M_reference < 10 * n_grid.back()) throw UsageError("study.M_reference must be >= 10 * max(n_grid)");
    if (!(T > 0.0) || !(dt > 0.0)) throw UsageError("study.T and study.dt must be positive");
    if (eval_points < 1) throw UsageError("study.eval_points must be >= 1");
    if (!(slope_min < slope_max)) throw UsageError("study.slope_min must be below slope_max");
    if (picard_max_iters < 1) throw UsageError("study.picard_max_iters must be >= 1");
    if (picard_tol < 0.0) throw UsageError("study.picard_tol must be >= 0");
    if (dictionary_size < 1) throw UsageError("metric.dictionary_size must be >= 1");
    if (reference != "picard" && reference.rfind("particle:", 0) != 0) {
        throw UsageError("study.reference must be 'picard' or 'particle:<N>'");
    }
    if (m > 0) {
        const auto params = RateParams::make(kappa, q, m);
        if (params.excluded) throw UsageError("study.kappa hits the excluded value of the rate formula");
    }
}

std::string StudyConfig::canonical() const {
    std::ostringstream os;
    os << "model=" << model << '\n';
    for (const auto& [k, v] : model_params) os << "model." << k << '=' << format_number(v) << '\n';
    os << "n_grid=";
    for (std::size_t i = 0; i < n_grid.size(); ++i) os << (i ? "," : "") << n_grid[i];
    os << "\nreplications=" << replications << "\nq=" << format_number(q) << "\nkappa=" << format_number(kappa)
       << "\nm=" << m << "\nM_reference=" << M_reference << "\nT=" << format_number(T)
       << "\ndt=" << format_number(dt) << "\neval_points=" << eval_points << "\nseed=" << seed
       << "\nslope=" << format_number(slope_min) << ',' << format_number(slope_max)
       << "\npicard=" << picard_max_iters << ',' << format_number(picard_tol) << "\nreference=" << reference
       << "\ndictionary=" << to_string(dictionary) << ',' << dictionary_size << ',' << dictionary_seed << ','
       << format_number(dictionary_scale) << "\nbase=" << format_number(base.p) << ';' << join_numbers(base.x)
       << '\n';
    return os.str();
}

std::string StudyConfig::hash() const { return hex64(fnv1a64(canonical())); }

SlopeFit fit_rate_slope(const std::vector<double>& ns, const std::vector<double>& values,
                        const std::vector<double>& weights) {
    const std::size_t k = ns.size();
    if (values.size() != k || (!weights.empty() && weights.size() != k)) {
        throw std::invalid_argument("fit_rate_slope: input lengths differ");
    }
    if (k < 3) throw std::invalid_argument("fit_rate_slope: needs at least 3 points");
    std::vector<double> x(k), y(k), w(k, 1.0);
    for (std::size_t i = 0; i < k; ++i) {
        if (!(values[i] > 0.0) || !(ns[i] > 0.0)) throw std::invalid_argument("fit_rate_slope: non-positive value");
        x[i] = std::log(ns[i]);
        y[i] = std::log(values[i]);
        if (!weights.empty()) {
            if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
                throw std::invalid_argument("fit_rate_slope: weights must be positive and finite");
            }
            w[i] = weights[i];
        }
    }
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < k; ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double xbar = sx / sw, ybar = sy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < k; ++i) {
        sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
        sxy += w[i] * (x[i] - xbar) * (y[i] - ybar);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_rate_slope: n values must not all coincide");
    SlopeFit fit;
    fit.defined = true;
    fit.points = k;
    fit.slope = sxy / sxx;
    fit.intercept = ybar - fit.slope * xbar;
    double rss = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double r = y[i] - fit.intercept - fit.slope * x[i];
        rss += w[i] * r * r;
    }
    const double dof = static_cast<double>(k - 2);
    fit.slope_se = std::sqrt(rss / dof / sxx);
    const boost::math::students_t dist(dof);
    const double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
    fit.ci_low = fit.slope - tq * fit.slope_se;
    fit.ci_high = fit.slope + tq * fit.slope_se;
    return fit;
}

namespace {

DriverSeed study_seed(std::uint64_t master, StreamDomain domain, std::uint64_t index) {
    return DriverSeed{master, {replication_in(domain, index), 0, DriverKind::Brownian}};
}

std::size_t particle_reference_size(const std::string& reference) {
    const std::string digits = reference.substr(std::string("particle:").size());
    try {
        std::size_t used = 0;
        const auto n = std::stoull(digits, &used);
        if (used != digits.size() || n < 1) throw std::invalid_argument(digits);
        return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw UsageError("study.reference: bad particle count '" + digits + "'");
    }
}

}  // namespace

ChaosReport run_chaos_study(const StudyConfig& config) {
    const auto started = std::chrono::steady_clock::now();
    config.validate();
    ChaosReport report;
    report.config = config;
    report.config_hash = config.hash();
    report.build = build_id();

    const ModelSpec spec = make_model(config.model, config.model_params);
    const int rate_m = config.rate_dimension(spec);
    report.rate_m = rate_m;
    const auto rate = RateParams::make(config.kappa, config.q, rate_m);
    if (rate.excluded) throw UsageError("study.kappa hits the excluded value of the rate formula");
    report.predicted_exponent = predicted_exponent(rate);

    report.times = config.eval_points == 1 ? std::vector<double>{config.T}
                                           : uniform_times(config.T, config.eval_points - 1);
    DictionaryOptions dopts;
    dopts.kind = config.dictionary;
    dopts.seed = config.dictionary_seed;
    dopts.scale = config.dictionary_scale;
    dopts.base = config.base;
    const auto dictionary = dictionary_r1(spec.dim_state, config.dictionary_size, dopts);

    MeasureFlow reference;
    if (config.reference == "picard") {
        PicardOptions popts;
        popts.snapshot_times = report.times;
        if (popts.snapshot_times.front() != 0.0) popts.snapshot_times.insert(popts.snapshot_times.begin(), 0.0);
        popts.workers = config.workers;
        const double tol = config.picard_tol > 0.0 ? config.picard_tol : default_picard_tolerance(config.M_reference);
        reference = solve_mkv_picard(spec, config.M_reference, config.T, config.dt, config.picard_max_iters, tol,
                                     study_seed(config.seed, StreamDomain::Flow, 0), popts);
        report.reference_kind = "picard";
        report.reference_trace = reference.trace;
    } else {
        const std::size_t N = particle_reference_size(config.reference);
        SimulationOptions sopts;
        sopts.workers = config.workers;
        const auto bundle = simulate_particles(spec, N, config.T, config.dt,
                                               study_seed(config.seed, StreamDomain::Reference, 0), report.times, sopts);
        if (bundle.truncation.truncated) {
            throw NumericalAbort("reference particle run produced a non-finite state", bundle.truncation.time, {});
        }
        reference = flow_from_bundle(spec, bundle);
        report.reference_kind = config.reference;
    }
    report.reference_size = reference.M;

    std::vector<TrajectoryBundle> largest;
    for (std::size_t gi = 0; gi < config.n_grid.size(); ++gi) {
        const std::size_t n = config.n_grid[gi];
        const std::size_t R = config.replications;
        std::vector<TrajectoryBundle> bundles(R);
        parallel_for(R, config.workers, [&](std::size_t r) {
            SimulationOptions sopts;
            sopts.workers = 1;
            bundles[r] = simulate_particles(spec, n, config.T, config.dt,
                                            study_seed(config.seed, StreamDomain::Particles, gi * 1'000'000 + r),
                                            report.times, sopts);
        });
        ChaosRow row;
        row.n = n;
        for (const auto& b : bundles) row.truncated_replications += b.truncation.truncated ? 1 : 0;
        row.complete = row.truncated_replications == 0;
        row.gamma = gamma_rate(rate, static_cast<double>(n));
        row.bound_curve = row.gamma + std::pow(static_cast<double>(n), -(1.0 - 1.0 / config.q));
        if (row.complete) {
            const auto d = d_qT(bundles, reference, dictionary, config.q, report.times, config.workers);
            row.value = d.value;
            row.se = d.se;
            row.time_at_max = d.time;
            row.maximizer = d.maximizer;
            row.per_time = d.per_time;
            largest = std::move(bundles);
        } else {
            row.value = std::numeric_limits<double>::quiet_NaN();
            row.se = std::numeric_limits<double>::quiet_NaN();
        }
        report.rows.push_back(std::move(row));
    }

    if (config.dictionary == DictionaryKind::Compactified && !largest.empty()) {
        auto& shift = report.base_shift;
        shift.computed = true;
        shift.n = largest.front().particles;
        shift.base = config.base;
        shift.base.p += 1.0;
        shift.base.x.resize(static_cast<std::size_t>(spec.dim_state), 0.0);
        for (auto& v : shift.base.x) v += 1.0;
        auto shifted = dopts;
        shifted.base = shift.base;
        const auto d = d_qT(largest, reference, dictionary_r1(spec.dim_state, config.dictionary_size, shifted),
                            config.q, report.times, config.workers);
        shift.value = d.value;
        shift.se = d.se;
    }

    std::vector<double> ns, values, weights;
    for (const auto& row : report.rows) {
        if (!row.complete || !(row.value > 0.0)) continue;
        ns.push_back(static_cast<double>(row.n));
        values.push_back(row.value);
        const double rel = row.se / row.value;  // SE of ln d
        weights.push_back(rel > 0.0 ? 1.0 / (rel * rel) : 1.0);
    }
    if (ns.size() >= 3) {
        report.fit = fit_rate_slope(ns, values, weights);
        report.slope_in_window = report.fit.slope >= config.slope_min && report.fit.slope <= config.slope_max;
    }
    report.monotone = std::all_of(report.rows.begin(), report.rows.end(), [](const ChaosRow& r) { return r.complete; });
    for (std::size_t i = 1; i < report.rows.size() && report.monotone; ++i) {
        const auto& a = report.rows[i - 1];
        const auto& b = report.rows[i];
        if (b.value >= a.value + std::hypot(a.se, b.se)) report.monotone = false;
    }
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

std::string csv_header(const std::string& config_hash, std::uint64_t seed) {
    std::ostringstream os;
    os << "# schema=" << kCsvSchema << '\n'
       << "# build_id=" << build_id() << '\n'
       << "# config_hash=" << config_hash << '\n'
       << "# seed=" << seed << '\n';
    return os.str();
}

std::string chaos_csv(const ChaosReport& report) {
    const auto& c = report.config;
    std::ostringstream os;
    os << csv_header(report.config_hash, c.seed);
    os << "record,n,t,phi_id,q,value,se\n";
    const std::string q = format_number(c.q);
    for (const auto& row : report.rows) {
        os << "dqt," << row.n << ',' << format_number(row.time_at_max) << ',' << row.maximizer << ',' << q << ','
           << format_number(row.value) << ',' << format_number(row.se) << '\n';
        for (std::size_t s = 0; s < row.per_time.size(); ++s) {
            const auto& e = row.per_time[s];
            os << "bl," << row.n << ',' << format_number(report.times[s]) << ',' << e.maximizer << ',' << q << ','
               << format_number(e.value) << ',' << format_number(e.se) << '\n';
        }
    }
    const std::string key = "gamma(kappa=" + format_number(c.kappa) + ";q=" + q +
                            ";m=" + std::to_string(report.rate_m) + ")";
    for (const auto& row : report.rows) {
        os << "gamma," << row.n << ",," << key << ',' << q << ',' << format_number(row.gamma) << ",\n";
        os << "bound," << row.n << ",," << key << "+n^-(1-1/q)," << q << ',' << format_number(row.bound_curve)
           << ",\n";
    }
    return os.str();
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string chaos_json(const ChaosReport& report) {
    const auto& c = report.config;
    json j;
    j["schema"] = kJsonSchema;
    j["build_id"] = report.build;
    j["config_hash"] = report.config_hash;
    j["seed"] = c.seed;
    json model_params = json::object();
    for (const auto& [k, v] : c.model_params) model_params[k] = v;
    j["config"] = {{"model", c.model},
                   {"model_params", model_params},
                   {"n_grid", c.n_grid},
                   {"replications", c.replications},
                   {"q", c.q},
                   {"kappa", c.kappa},
                   {"m", c.m},
                   {"M_reference", c.M_reference},
                   {"T", c.T},
                   {"dt", c.dt},
                   {"eval_points", c.eval_points},
                   {"slope_window", {c.slope_min, c.slope_max}},
                   {"picard_max_iters", c.picard_max_iters},
                   {"picard_tol", c.picard_tol},
                   {"reference", c.reference},
                   {"dictionary", to_string(c.dictionary)},
                   {"dictionary_size", c.dictionary_size},
                   {"dictionary_seed", c.dictionary_seed},
                   {"dictionary_scale", c.dictionary_scale},
                   {"base_p", c.base.p},
                   {"base_x", c.base.x}};
    j["times"] = report.times;
    j["reference"] = {{"kind", report.reference_kind},
                      {"atoms", report.reference_size},
                      {"picard_iterations", report.reference_trace.iterations},
                      {"picard_converged", report.reference_trace.converged},
                      {"picard_tolerance", report.reference_trace.tolerance},
                      {"picard_distances", report.reference_trace.distances}};
    json rows = json::array();
    for (const auto& row : report.rows) {
        json per_time = json::array();
        for (const auto& e : row.per_time) {
            per_time.push_back({{"value", e.value}, {"se", e.se}, {"maximizer", e.maximizer}});
        }
        rows.push_back({{"n", row.n},
                        {"complete", row.complete},
                        {"truncated_replications", row.truncated_replications},
                        {"d_qT", number_or_null(row.value)},
                        {"se", number_or_null(row.se)},
                        {"time_at_max", row.time_at_max},
                        {"maximizer", row.maximizer},
                        {"per_time", per_time},
                        {"gamma", row.gamma},
                        {"bound_curve", row.bound_curve}});
    }
    j["rows"] = rows;
    if (report.fit.defined) {
        j["fit"] = {{"defined", true},
                    {"slope", report.fit.slope},
                    {"intercept", report.fit.intercept},
                    {"slope_se", report.fit.slope_se},
                    {"ci95", {report.fit.ci_low, report.fit.ci_high}},
                    {"points", report.fit.points}};
    } else {
        j["fit"] = {{"defined", false}};
    }
    if (report.base_shift.computed) {
        const auto& b = report.base_shift;
        j["base_sensitivity"] = {
            {"n", b.n}, {"base_p", b.base.p}, {"base_x", b.base.x}, {"d_qT", b.value}, {"se", b.se}};
    }
    j["rate_m"] = report.rate_m;
    j["predicted_exponent"] = report.predicted_exponent;
    j["slope_in_window"] = report.slope_in_window;
    j["monotone"] = report.monotone;
    j["pass"] = report.pass();
    return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string write_chaos_outputs(const ChaosReport& report) {
    const auto base = (std::filesystem::path(report.config.output_dir) / report.config.output_prefix).string();
    write_text_file(base + ".csv", chaos_csv(report));
    write_text_file(base + ".json", chaos_json(report));
    json timing = {{"runtime_seconds", report.runtime_seconds},
                   {"workers", report.config.workers > 0 ? report.config.workers : default_workers()}};
    write_text_file(base + ".timing.json", timing.dump(2) + "\n");
    return base + ".csv";
}

std::string flow_csv(const MeasureFlow& flow, const std::string& config_hash, std::uint64_t seed) {
    std::ostringstream os;
    os << csv_header(config_hash, seed);
    const int m = flow.ensembles.empty() ? 1 : flow.ensembles.front().dim;
    os << "t,atom,p";
    for (int k = 0; k < m; ++k) os << ",x" << k;
    os << '\n';
    for (std::size_t s = 0; s < flow.size(); ++s) {
        const auto& e = flow.ensembles[s];
        const std::string t = format_number(flow.time_grid[s]);
        for (std::size_t i = 0; i < e.size(); ++i) {
            os << t << ',' << i << ',' << format_number(e.marks[i]);
            for (double v : e.state(i)) os << ',' << format_number(v);
            os << '\n';
        }
    }
    return os.str();
}

std::string flow_json(const MeasureFlow& flow, const std::string& config_hash, std::uint64_t seed) {
    json j;
    j["schema"] = kJsonSchema;
    j["build_id"] = build_id();
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["atoms"] = flow.M;
    j["iteration"] = flow.iteration;
    j["time_grid"] = flow.time_grid;
    j["mean_curve"] = flow.mean_curve;
    j["integration"] = {{"dt", flow.grid.dt}, {"requested_dt", flow.grid.requested_dt}, {"steps", flow.grid.steps}};
    j["trace"] = {{"iterations", flow.trace.iterations},
                  {"converged", flow.trace.converged},
                  {"tolerance", flow.trace.tolerance},
                  {"distances", flow.trace.distances},
                  {"maximizers", flow.trace.maximizers}};
    return j.dump(2) + "\n";
}

std::string bundle_csv(const TrajectoryBundle& bundle, const std::string& config_hash, std::uint64_t seed) {
    std::ostringstream os;
    os << csv_header(config_hash, seed);
    os << "t,particle,p";
    for (int k = 0; k < bundle.dim; ++k) os << ",x" << k;
    os << ",jumps,compensator\n";
    for (std::size_t s = 0; s < bundle.snapshots(); ++s) {
        const std::string t = format_number(bundle.time_grid[s]);
        for (std::size_t i = 0; i < bundle.particles; ++i) {
            os << t << ',' << i << ',' << format_number(bundle.marks[i]);
            for (double v : bundle.state(s, i)) os << ',' << format_number(v);
            const auto idx = bundle.index(s, i);
            os << ',' << bundle.jump_counts[idx] << ',' << format_number(bundle.compensators[idx]) << '\n';
        }
    }
    return os.str();
}

}  // namespace chaoslab
