#pragma once

// Chaos-rate studies: configuration, the end-to-end run, slope fitting and
// the CSV / JSON report files.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "chaoslab/flow.hpp"
#include "chaoslab/metrics.hpp"
#include "chaoslab/model.hpp"

namespace chaoslab {

struct TrajectoryBundle;

inline constexpr const char* kCsvSchema = "chaoslab.csv/1";
inline constexpr const char* kJsonSchema = "chaoslab.report/1";

/// git-describe id of the source tree this library was built from.
std::string build_id();

/// Shortest round-trip decimal form; "nan" / "inf" / "-inf" otherwise.
std::string format_number(double value);

struct StudyConfig {
    // [model]
    std::string model = "ou";
    std::map<std::string, double> model_params;
    // [study]
    std::vector<std::size_t> n_grid{50, 100, 200, 400, 800, 1600};
    std::size_t replications = 32;
    double q = 2.0;
    double kappa = 8.0;
    int m = 0;  // rate dimension; 0 = the model's state dimension
    std::size_t M_reference = 32000;
    double T = 1.0;
    double dt = 0.01;
    std::size_t eval_points = 11;  // uniform evaluation times, 0 and T included
    std::uint64_t seed = 1;
    double slope_min = -0.65;
    double slope_max = -0.35;
    std::size_t picard_max_iters = 20;
    double picard_tol = 0.0;  // 0 = default_picard_tolerance(M_reference)
    std::string reference = "picard";  // or "particle:<N>"
    int workers = 0;  // not part of the config hash
    // [metric]
    DictionaryKind dictionary = DictionaryKind::Compactified;
    std::size_t dictionary_size = 64;
    std::uint64_t dictionary_seed = 0;
    double dictionary_scale = 2.0;
    BasePoint base;
    // [output]
    std::string output_dir = ".";
    std::string output_prefix = "chaos";

    /// Throws UsageError when the invariants fail (grid increasing, q >= 2,
    /// gamma admissible, M_reference >= 10 max n, ...).
    void validate() const;
    /// Canonical text of every setting that changes results.
    std::string canonical() const;
    std::string hash() const;
    int rate_dimension(const ModelSpec& spec) const noexcept { return m > 0 ? m : spec.dim_state; }
};

/// Reads an INI-style file with [model], [study], [metric] and [output]
/// sections. Throws UsageError on a missing file or unknown keys.
StudyConfig load_study_config(const std::string& path);
/// Flat [model] parameters of any config file (name, parameter table).
std::pair<std::string, std::map<std::string, double>> load_model_section(const std::string& path);

struct SlopeFit {
    bool defined = false;
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double ci_low = 0.0;  // 95% interval from the t distribution
    double ci_high = 0.0;
    std::size_t points = 0;
};

/// Weighted least squares of ln(value) on ln(n). Empty weights = unweighted.
/// Throws std::invalid_argument with fewer than 3 points or a value <= 0.
SlopeFit fit_rate_slope(const std::vector<double>& ns, const std::vector<double>& values,
                        const std::vector<double>& weights = {});

struct ChaosRow {
    std::size_t n = 0;
    bool complete = true;  // false when any replication hit a non-finite state
    std::size_t truncated_replications = 0;
    double value = 0.0;  // d_{q,T}
    double se = 0.0;
    double time_at_max = 0.0;
    std::string maximizer;
    std::vector<BLEstimate> per_time;
    double gamma = 0.0;        // gamma(kappa, q, m, n)
    double bound_curve = 0.0;  // gamma + n^{-(1 - 1/q)}
};

struct ChaosReport {
    StudyConfig config;
    std::string config_hash;
    std::string build;
    std::vector<double> times;
    std::string reference_kind;
    std::size_t reference_size = 0;
    PicardTrace reference_trace;
    std::vector<ChaosRow> rows;
    SlopeFit fit;
    int rate_m = 0;  // resolved rate dimension
    // d_qT at the largest complete n with the base point moved by +1 in
    // every coordinate; compactified dictionary only, never asserted
    struct BaseShift {
        bool computed = false;
        std::size_t n = 0;
        BasePoint base;
        double value = 0.0;
        double se = 0.0;
    } base_shift;
    double predicted_exponent = 0.0;
    bool slope_in_window = false;
    bool monotone = false;  // decreasing up to 1 pooled SE
    double runtime_seconds = 0.0;  // never written into the CSV / JSON

    bool pass() const noexcept { return fit.defined && slope_in_window && monotone; }
};

ChaosReport run_chaos_study(const StudyConfig& config);

std::string chaos_csv(const ChaosReport& report);
std::string chaos_json(const ChaosReport& report);
/// Writes <dir>/<prefix>.csv, .json and .timing.json; returns the csv path.
std::string write_chaos_outputs(const ChaosReport& report);

/// Header lines shared by every CSV the tools write.
std::string csv_header(const std::string& config_hash, std::uint64_t seed);

/// Columnar flow file: t,atom,p,x0..x{m-1}.
std::string flow_csv(const MeasureFlow& flow, const std::string& config_hash, std::uint64_t seed);
std::string flow_json(const MeasureFlow& flow, const std::string& config_hash, std::uint64_t seed);
/// Particle file: t,particle,p,x0..,jumps,compensator.
std::string bundle_csv(const TrajectoryBundle& bundle, const std::string& config_hash, std::uint64_t seed);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace chaoslab
