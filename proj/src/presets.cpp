#include "chaoslab/presets.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "chaoslab/errors.hpp"

namespace chaoslab {

namespace {

void require_positive(double value, const char* name) {
    if (!(value > 0.0)) {
        throw std::invalid_argument(std::string("parameter '") + name + "' must be positive");
    }
}

}  // namespace

// ---------------------------------------------------------------- FHN ---

void FhnParams::check() const {
    const std::pair<const char*, double> positives[] = {
        {"J", J},     {"V_rev", V_rev}, {"sigma", sigma}, {"sigma_ext", sigma_ext},
        {"a", a},     {"b", b},         {"c", c},         {"a_r", a_r},
        {"a_d", a_d}, {"theta", theta}, {"V", V},         {"transmitter_max", transmitter_max},
        {"psi0", psi0}, {"mark", mark}};
    for (const auto& [name, value] : positives) require_positive(value, name);
    if (!(input_bound >= std::abs(input_current)) && !input_fn) {
        throw std::invalid_argument("FhnParams: input_bound must dominate |input_current|");
    }
    if (V0_sd < 0.0 || w0_sd < 0.0 || y0_sd < 0.0) {
        throw std::invalid_argument("FhnParams: initial standard deviations must be >= 0");
    }
}

double fhn_chi(double y) noexcept {
    const double s = 2.0 * y - 1.0;
    const double gap = 1.0 - s * s;
    if (!(gap > 0.0)) {
        return 0.0;
    }
    return 0.1 * std::exp(-1.0 / (2.0 * gap));
}

double fhn_activation(const FhnParams& params, double v) noexcept {
    return params.a_r * params.transmitter_max / (1.0 + std::exp(-params.theta * (v - params.V)));
}

double fhn_sqrt_argument(const FhnParams& params, double v, double y) noexcept {
    return fhn_activation(params, v) * (1.0 - y) + params.a_d * y;
}

double fhn_growth_constant(const FhnParams& params) noexcept {
    // 2 x^T f + tr[g g^T] bounded term by term with 2|uv| <= u^2 + v^2;
    // the -x1^4/3, -c b x2^2 and -a_d x3^2 contributions are dropped.
    const double arT = params.a_r * params.transmitter_max;
    const double c = params.c;
    const double coeff_v = 5.0 + c;
    const double coeff_w = 1.0 + 2.0 * c;
    const double coeff_y = 3.0 * arT;
    const double coeff_z = 2.0;
    const double constant = params.input_bound * params.input_bound + c * params.a * params.a +
                            2.0 * arT + params.sigma_ext * params.sigma_ext +
                            0.01 * (arT + params.a_d);
    double k = std::max({coeff_v, coeff_w, coeff_y, coeff_z, constant});
    if (params.jump_size != 0.0) {
        // |h|^2 + 2 x1 h1 <= 2 h1^2 + x1^2
        k = std::max({k, 2.0 * params.jump_size * params.jump_size, 1.0});
    }
    return k;
}

ModelSpec fhn_model(const FhnParams& params) {
    params.check();
    ModelSpec spec;
    spec.name = "fhn";
    spec.dim_state = 3;
    spec.dim_noise = 3;
    spec.parameters = {{"J", params.J},
                       {"V_rev", params.V_rev},
                       {"sigma", params.sigma},
                       {"sigma_ext", params.sigma_ext},
                       {"a", params.a},
                       {"b", params.b},
                       {"c", params.c},
                       {"a_r", params.a_r},
                       {"a_d", params.a_d},
                       {"theta", params.theta},
                       {"V", params.V},
                       {"transmitter_max", params.transmitter_max},
                       {"input_current", params.input_current},
                       {"jump_size", params.jump_size},
                       {"psi0", params.psi0},
                       {"mark", params.mark},
                       {"V0_mean", params.V0_mean},
                       {"V0_sd", params.V0_sd},
                       {"w0_mean", params.w0_mean},
                       {"w0_sd", params.w0_sd},
                       {"y0_mean", params.y0_mean},
                       {"y0_sd", params.y0_sd}};

    const FhnParams p = params;
    spec.drift = [p](double t, ConstVec x, double z, MutVec out) {
        const double input = p.input_fn ? p.input_fn(t) : p.input_current;
        out[0] = x[0] - x[0] * x[0] * x[0] / 3.0 - x[1] + input + z;
        out[1] = p.c * (x[0] + p.a - p.b * x[1]);
        out[2] = fhn_activation(p, x[0]) * (1.0 - x[2]) - p.a_d * x[2];
    };
    spec.diffusion = [p](double, ConstVec x, double z, MutVec out) {
        std::fill(out.begin(), out.end(), 0.0);
        out[0] = p.sigma_ext;
        out[2] = z;
        out[8] = fhn_chi(x[2]) * std::sqrt(std::max(0.0, fhn_sqrt_argument(p, x[0], x[2])));
    };
    spec.jump = [h = p.jump_size](double, ConstVec, MutVec out) {
        out[0] = h;
        out[1] = 0.0;
        out[2] = 0.0;
    };
    spec.jump_free = p.jump_size == 0.0;

    // alpha(x, y) = -J (x1 - V_rev) y3 and beta(x, y) = -sigma (x1 - V_rev) y3.
    spec.kernel_alpha = InteractionKernel(SeparableKernel{
        [J = p.J, Vr = p.V_rev](ConstVec x) { return -J * (x[0] - Vr); },
        [](ConstVec y) { return y[2]; }, {}});
    spec.kernel_beta = InteractionKernel(SeparableKernel{
        [s = p.sigma, Vr = p.V_rev](ConstVec x) { return -s * (x[0] - Vr); },
        [](ConstVec y) { return y[2]; }, {}});

    spec.intensity_shape = [psi0 = p.psi0](double, ConstVec) { return psi0; };
    spec.intensity_bound = p.psi0;
    spec.mark_law = {[mark = p.mark](StreamRng&) { return mark; }, p.mark, p.mark};
    spec.initial_law.sample = [p](StreamRng& rng, MutVec out) {
        out[0] = rng.normal(p.V0_mean, p.V0_sd);
        out[1] = rng.normal(p.w0_mean, p.w0_sd);
        out[2] = std::clamp(rng.normal(p.y0_mean, p.y0_sd), 0.0, 1.0);
    };
    spec.initial_law.mean = {p.V0_mean, p.w0_mean, p.y0_mean};
    spec.initial_law.second_moment = p.V0_mean * p.V0_mean + p.V0_sd * p.V0_sd +
                                     p.w0_mean * p.w0_mean + p.w0_sd * p.w0_sd +
                                     p.y0_mean * p.y0_mean + p.y0_sd * p.y0_sd;

    spec.constants.growth_K_bar = fhn_growth_constant(p);
    spec.constants.growth_K = spec.constants.growth_K_bar;
    // Nominal on the physical box y in [0, 1]; the product kernels are not
    // globally Lipschitz.
    spec.constants.kernel_J = p.J + p.sigma;
    spec.constants.jump_L_h = 0.0;
    spec.constants.jump_L_h_lower = 0.0;
    spec.constants.drift_one_sided_L = 1.0 + p.c;
    return spec;
}

// ----------------------------------------------------------------- OU ---

void OuParams::check() const {
    require_positive(a, "a");
    require_positive(sigma, "sigma");
    require_positive(psi0, "psi0");
    require_positive(mark, "mark");
    if (x0_sd < 0.0) throw std::invalid_argument("parameter 'x0_sd' must be >= 0");
    if (psi_bound != 0.0 && psi_bound < psi0) {
        throw std::invalid_argument("OuParams: psi0 exceeds the declared bound C_psi");
    }
}

double OuParams::limit_mean(double t) const noexcept {
    const double rate = -a + b;
    const double source = mark * psi0 * jump_size;
    if (std::abs(rate) < 1e-14) {
        return x0_mean + source * t;
    }
    return (x0_mean + source / rate) * std::exp(rate * t) - source / rate;
}

double OuParams::limit_variance(double t) const noexcept {
    const double noise = sigma * sigma + mark * psi0 * jump_size * jump_size;
    const double decay = std::exp(-2.0 * a * t);
    return x0_sd * x0_sd * decay + noise / (2.0 * a) * (1.0 - decay);
}

double OuParams::growth_constant() const noexcept {
    // 2x(-a x + b z) + sigma^2 <= |b| (x^2 + z^2) + sigma^2
    // c^2 + 2 x c <= 2 c^2 + x^2
    double k = std::max(sigma * sigma, std::abs(b));
    if (jump_size != 0.0) {
        k = std::max({k, 2.0 * jump_size * jump_size, 1.0});
    }
    return k;
}

ModelSpec ou_benchmark_model(const OuParams& params) {
    params.check();
    ModelSpec spec;
    spec.name = "ou";
    spec.dim_state = 1;
    spec.dim_noise = 1;
    spec.parameters = {{"a", params.a},           {"b", params.b},
                       {"sigma", params.sigma},   {"jump_size", params.jump_size},
                       {"psi0", params.psi0},     {"mark", params.mark},
                       {"x0_mean", params.x0_mean}, {"x0_sd", params.x0_sd},
                       {"psi_bound", params.psi_bound}};
    spec.drift = [a = params.a, b = params.b](double, ConstVec x, double z, MutVec out) {
        out[0] = -a * x[0] + b * z;
    };
    spec.diffusion = [s = params.sigma](double, ConstVec, double, MutVec out) { out[0] = s; };
    spec.jump = [c = params.jump_size](double, ConstVec, MutVec out) { out[0] = c; };
    spec.jump_free = params.jump_size == 0.0;
    spec.kernel_alpha = InteractionKernel(SeparableKernel{
        [](ConstVec) { return 1.0; }, [](ConstVec y) { return y[0]; }, {}});
    spec.kernel_beta = InteractionKernel::zero();
    spec.intensity_shape = [psi0 = params.psi0](double, ConstVec) { return psi0; };
    spec.intensity_bound = params.psi_bound > 0.0 ? params.psi_bound : params.psi0;
    spec.mark_law = {[mark = params.mark](StreamRng&) { return mark; }, params.mark, params.mark};
    spec.initial_law.sample = [m0 = params.x0_mean, s0 = params.x0_sd](StreamRng& rng, MutVec out) {
        out[0] = rng.normal(m0, s0);
    };
    spec.initial_law.mean = {params.x0_mean};
    spec.initial_law.second_moment = params.x0_mean * params.x0_mean + params.x0_sd * params.x0_sd;

    spec.constants.growth_K_bar = params.growth_constant();
    spec.constants.growth_K = spec.constants.growth_K_bar;
    spec.constants.kernel_J = 1.0;
    spec.constants.jump_L_h = 0.0;
    spec.constants.jump_L_h_lower = 0.0;
    // <dx, -a dx + b dz> <= |b| |dx||dz| <= |b|/2 (|dx|^2 + |dz|^2)
    spec.constants.drift_one_sided_L = std::abs(params.b) / 2.0;
    return spec;
}

ModelSpec ou_benchmark_model(double a, double b, double sigma, double jump_size, double psi0) {
    OuParams params;
    params.a = a;
    params.b = b;
    params.sigma = sigma;
    params.jump_size = jump_size;
    params.psi0 = psi0;
    return ou_benchmark_model(params);
}

// ----------------------------------------------------- zero / cubic ---

ModelSpec zero_model(int dim) {
    if (dim <= 0) throw std::invalid_argument("zero_model: dim must be positive");
    ModelSpec spec;
    spec.name = "zero";
    spec.parameters = {{"dim", static_cast<double>(dim)}};
    spec.dim_state = dim;
    spec.dim_noise = 1;
    spec.drift = [](double, ConstVec, double, MutVec out) { std::fill(out.begin(), out.end(), 0.0); };
    spec.diffusion = [](double, ConstVec, double, MutVec out) {
        std::fill(out.begin(), out.end(), 0.0);
    };
    spec.jump = [](double, ConstVec, MutVec out) { std::fill(out.begin(), out.end(), 0.0); };
    spec.jump_free = true;
    spec.intensity_shape = [](double, ConstVec) { return 1.0; };
    spec.intensity_bound = 1.0;
    spec.mark_law = {[](StreamRng&) { return 1.0; }, 1.0, 1.0};
    spec.initial_law.sample = [](StreamRng& rng, MutVec out) {
        for (auto& e : out) e = rng.normal();
    };
    spec.initial_law.mean.assign(static_cast<std::size_t>(dim), 0.0);
    spec.initial_law.second_moment = dim;
    spec.constants.growth_K_bar = 0.0;
    spec.constants.kernel_J = 0.0;
    return spec;
}

ModelSpec cubic_model() {
    ModelSpec spec;
    spec.name = "cubic";
    spec.dim_state = 1;
    spec.dim_noise = 1;
    spec.drift = [](double, ConstVec x, double, MutVec out) { out[0] = x[0] * x[0] * x[0]; };
    spec.diffusion = [](double, ConstVec, double, MutVec out) { out[0] = 1.0; };
    spec.jump = [](double, ConstVec, MutVec out) { out[0] = 0.0; };
    spec.jump_free = true;
    spec.intensity_shape = [](double, ConstVec) { return 1.0; };
    spec.intensity_bound = 1.0;
    spec.mark_law = {[](StreamRng&) { return 1.0; }, 1.0, 1.0};
    spec.initial_law.sample = [](StreamRng& rng, MutVec out) { out[0] = rng.normal(); };
    spec.initial_law.mean = {0.0};
    spec.initial_law.second_moment = 1.0;
    spec.constants.growth_K_bar = 10.0;  // deliberately false certificate
    return spec;
}

// ----------------------------------------------------------- registry ---

namespace {

template <typename Params>
using FieldTable = std::map<std::string, double Params::*>;

template <typename Params>
void apply_overrides(Params& params, const FieldTable<Params>& fields,
                     const std::map<std::string, double>& values, const std::string& model) {
    for (const auto& [key, value] : values) {
        const auto it = fields.find(key);
        if (it == fields.end()) {
            throw UsageError("unknown parameter '" + key + "' for model '" + model + "'");
        }
        params.*(it->second) = value;
    }
}

ModelSpec make_fhn(const std::map<std::string, double>& values) {
    static const FieldTable<FhnParams> fields = {
        {"J", &FhnParams::J},
        {"V_rev", &FhnParams::V_rev},
        {"sigma", &FhnParams::sigma},
        {"sigma_ext", &FhnParams::sigma_ext},
        {"a", &FhnParams::a},
        {"b", &FhnParams::b},
        {"c", &FhnParams::c},
        {"a_r", &FhnParams::a_r},
        {"a_d", &FhnParams::a_d},
        {"theta", &FhnParams::theta},
        {"V", &FhnParams::V},
        {"transmitter_max", &FhnParams::transmitter_max},
        {"input_current", &FhnParams::input_current},
        {"input_bound", &FhnParams::input_bound},
        {"jump_size", &FhnParams::jump_size},
        {"psi0", &FhnParams::psi0},
        {"mark", &FhnParams::mark},
        {"V0_mean", &FhnParams::V0_mean},
        {"V0_sd", &FhnParams::V0_sd},
        {"w0_mean", &FhnParams::w0_mean},
        {"w0_sd", &FhnParams::w0_sd},
        {"y0_mean", &FhnParams::y0_mean},
        {"y0_sd", &FhnParams::y0_sd}};
    FhnParams params;
    apply_overrides(params, fields, values, "fhn");
    if (!values.contains("input_bound")) {
        params.input_bound = std::abs(params.input_current);
    }
    return fhn_model(params);
}

ModelSpec make_ou(const std::map<std::string, double>& values) {
    static const FieldTable<OuParams> fields = {
        {"a", &OuParams::a},           {"b", &OuParams::b},
        {"sigma", &OuParams::sigma},   {"jump_size", &OuParams::jump_size},
        {"psi0", &OuParams::psi0},     {"mark", &OuParams::mark},
        {"x0_mean", &OuParams::x0_mean}, {"x0_sd", &OuParams::x0_sd},
        {"psi_bound", &OuParams::psi_bound}};
    OuParams params;
    apply_overrides(params, fields, values, "ou");
    return ou_benchmark_model(params);
}

struct Registry {
    std::mutex mutex;
    std::map<std::string, ModelFactory> factories;

    Registry() {
        factories["fhn"] = make_fhn;
        factories["ou"] = make_ou;
        factories["zero"] = [](const std::map<std::string, double>& values) {
            int dim = 1;
            for (const auto& [key, value] : values) {
                if (key != "dim") throw UsageError("unknown parameter '" + key + "' for model 'zero'");
                dim = static_cast<int>(value);
            }
            return zero_model(dim);
        };
        factories["cubic"] = [](const std::map<std::string, double>& values) {
            if (!values.empty()) throw UsageError("model 'cubic' takes no parameters");
            return cubic_model();
        };
    }
};

Registry& registry() {
    static Registry instance;
    return instance;
}

}  // namespace

void register_model(const std::string& name, ModelFactory factory) {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    r.factories[name] = std::move(factory);
}

std::vector<std::string> registered_models() {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    std::vector<std::string> names;
    for (const auto& [name, factory] : r.factories) names.push_back(name);
    return names;
}

ModelSpec make_model(const std::string& name, const std::map<std::string, double>& params) {
    ModelFactory factory;
    {
        auto& r = registry();
        std::lock_guard lock(r.mutex);
        const auto it = r.factories.find(name);
        if (it == r.factories.end()) {
            throw UsageError("unknown model '" + name + "'");
        }
        factory = it->second;
    }
    return factory(params);
}

}  // namespace chaoslab
