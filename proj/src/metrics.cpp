#include "chaoslab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "chaoslab/flow.hpp"
#include "chaoslab/parallel.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/rng.hpp"

namespace chaoslab {

double base_radius(double p, ConstVec x, const BasePoint& base) {
    double r2 = (p - base.p) * (p - base.p);
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - base.x_at(k);
        r2 += d * d;
    }
    return std::sqrt(r2);
}

double compactified_l(const ExtendedPoint& a, const BasePoint& base) {
    if (a.is_star()) return 0.0;
    const auto& pt = a.point();
    return 1.0 / (1.0 + base_radius(pt.p, pt.x, base));
}

double compactified_distance(const ExtendedPoint& a, const ExtendedPoint& b, const BasePoint& base) {
    if (a.is_star() && b.is_star()) return 0.0;
    if (a.is_star()) return compactified_l(b, base);
    if (b.is_star()) return compactified_l(a, base);
    const auto& pa = a.point();
    const auto& pb = b.point();
    if (pa.x.size() != pb.x.size()) throw std::invalid_argument("compactified_distance: dimension mismatch");
    double e2 = (pa.p - pb.p) * (pa.p - pb.p);
    for (std::size_t k = 0; k < pa.x.size(); ++k) e2 += (pa.x[k] - pb.x[k]) * (pa.x[k] - pb.x[k]);
    return std::min(std::sqrt(e2), std::abs(compactified_l(a, base) - compactified_l(b, base)));
}

DictionaryKind parse_dictionary_kind(const std::string& name) {
    if (name == "compactified") return DictionaryKind::Compactified;
    if (name == "euclidean") return DictionaryKind::Euclidean;
    throw std::invalid_argument("unknown dictionary kind '" + name + "'");
}

std::string to_string(DictionaryKind kind) {
    return kind == DictionaryKind::Compactified ? "compactified" : "euclidean";
}

namespace {

std::string fmt_param(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

// phi = G(l), G(l) = sign c (cos(w (1 - l)) - cos w); G(0) = 0, G'(1) = 0.
TestFunction radial_member(std::size_t index, int dim, double omega, double sign, const BasePoint& base) {
    const double pi = std::numbers::pi;
    const double cw = std::cos(omega);
    const double sup_raw = omega <= pi ? 1.0 - cw : std::max(1.0 - cw, 1.0 + cw);
    const double lip_raw = omega * (omega >= pi / 2 ? 1.0 : std::sin(omega));
    const double c = sign / (sup_raw + lip_raw);
    const auto m = static_cast<std::size_t>(dim);

    auto G1 = [=](double l) { return c * omega * std::sin(omega * (1.0 - l)); };
    auto G2 = [=](double l) { return -c * omega * omega * std::cos(omega * (1.0 - l)); };

    TestFunction f;
    f.id = "rad" + std::to_string(index) + "(w=" + fmt_param(omega) + ")";
    f.value = [=](double p, ConstVec x) {
        const double l = 1.0 / (1.0 + base_radius(p, x, base));
        return c * (std::cos(omega * (1.0 - l)) - cw);
    };
    f.grad_x = [=](double p, ConstVec x, MutVec g) {
        const double r = base_radius(p, x, base);
        const double l = 1.0 / (1.0 + r);
        // phi_r / r, with its r -> 0 limit G''(1)
        const double ratio = r < 1e-7 ? G2(1.0) : -l * l * G1(l) / r;
        for (std::size_t k = 0; k < m; ++k) g[k] = ratio * (x[k] - base.x_at(k));
    };
    f.hess_x = [=](double p, ConstVec x, MutVec h) {
        const double r = base_radius(p, x, base);
        const double l = 1.0 / (1.0 + r);
        double radial = 0.0, ratio = 0.0;
        if (r < 1e-7) {
            radial = ratio = G2(1.0);
        } else {
            radial = G2(l) * l * l * l * l + 2.0 * l * l * l * G1(l);
            ratio = -l * l * G1(l) / r;
        }
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                const double uu = r < 1e-7 ? 0.0 : (x[i] - base.x_at(i)) * (x[j] - base.x_at(j)) / (r * r);
                h[i * m + j] = radial * uu + ratio * ((i == j ? 1.0 : 0.0) - uu);
            }
        }
    };
    f.sup_norm = std::abs(c) * sup_raw;
    f.lip_norm = std::abs(c) * lip_raw;
    f.star_value = 0.0;
    return f;
}

// c exp(-|x - mu|^2 / 2s^2)
TestFunction bump_member(std::size_t index, std::vector<double> mu, double s) {
    const double c = 1.0 / (1.0 + std::exp(-0.5) / s);
    const std::size_t m = mu.size();
    auto eval = [=](ConstVec x, double& z2) {
        z2 = 0.0;
        for (std::size_t k = 0; k < m; ++k) z2 += (x[k] - mu[k]) * (x[k] - mu[k]);
        z2 /= s * s;
        return c * std::exp(-0.5 * z2);
    };
    TestFunction f;
    f.id = "bump" + std::to_string(index) + "(s=" + fmt_param(s) + ")";
    f.value = [=](double, ConstVec x) {
        double z2;
        return eval(x, z2);
    };
    f.grad_x = [=](double, ConstVec x, MutVec g) {
        double z2;
        const double v = eval(x, z2);
        for (std::size_t k = 0; k < m; ++k) g[k] = -v * (x[k] - mu[k]) / (s * s);
    };
    f.hess_x = [=](double, ConstVec x, MutVec h) {
        double z2;
        const double v = eval(x, z2);
        const double s2 = s * s;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                h[i * m + j] = v * ((x[i] - mu[i]) * (x[j] - mu[j]) / (s2 * s2) - (i == j ? 1.0 / s2 : 0.0));
            }
        }
    };
    f.sup_norm = c;
    f.lip_norm = c * std::exp(-0.5) / s;
    f.star_value = 0.0;
    return f;
}

// c (w . z) exp(-|z|^2 / 2), z = (x - mu) / s, |w| = 1
TestFunction odd_bump_member(std::size_t index, std::vector<double> mu, std::vector<double> w, double s) {
    const double c = 1.0 / (std::exp(-0.5) + 1.0 / s);
    const std::size_t m = mu.size();
    // Returns exp(-|z|^2 / 2) and sets wz = w . z.
    auto project = [=](ConstVec x, double& wz) {
        double z2 = 0.0;
        wz = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double z = (x[k] - mu[k]) / s;
            z2 += z * z;
            wz += w[k] * z;
        }
        return std::exp(-0.5 * z2);
    };
    TestFunction f;
    f.id = "odd" + std::to_string(index) + "(s=" + fmt_param(s) + ")";
    f.value = [=](double, ConstVec x) {
        double wz;
        const double g = project(x, wz);
        return c * wz * g;
    };
    f.grad_x = [=](double, ConstVec x, MutVec grad) {
        double wz;
        const double g = project(x, wz);
        for (std::size_t k = 0; k < m; ++k) grad[k] = c / s * g * (w[k] - wz * (x[k] - mu[k]) / s);
    };
    f.hess_x = [=](double, ConstVec x, MutVec h) {
        double wz;
        const double g = project(x, wz);
        const double k0 = c / (s * s) * g;
        for (std::size_t i = 0; i < m; ++i) {
            const double zi = (x[i] - mu[i]) / s;
            for (std::size_t j = 0; j < m; ++j) {
                const double zj = (x[j] - mu[j]) / s;
                h[i * m + j] = k0 * (-w[i] * zj - w[j] * zi - (i == j ? wz : 0.0) + wz * zi * zj);
            }
        }
    };
    f.sup_norm = c * std::exp(-0.5);
    f.lip_norm = c / s;
    f.star_value = 0.0;
    return f;
}

}  // namespace

std::vector<TestFunction> dictionary_r1(int dim, std::size_t size, const DictionaryOptions& options) {
    if (dim <= 0) throw std::invalid_argument("dictionary_r1: dim must be positive");
    if (size < 1) throw std::invalid_argument("dictionary_r1: size must be >= 1");
    if (!(options.scale > 0.0)) throw std::invalid_argument("dictionary_r1: scale must be > 0");
    const auto m = static_cast<std::size_t>(dim);
    std::vector<TestFunction> out;
    out.reserve(size);
    for (std::size_t k = 0; k < size; ++k) {
        // Members are drawn from their own stream, so a smaller dictionary
        // is a prefix of a larger one.
        StreamRng rng(DriverSeed{options.seed, {replication_in(StreamDomain::Dictionary, 0), k,
                                                DriverKind::Dictionary}});
        if (options.kind == DictionaryKind::Compactified) {
            const double omega = rng.uniform(0.5, 4.0 * std::numbers::pi);
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            out.push_back(radial_member(k, dim, omega, sign, options.base));
            continue;
        }
        const double s = options.scale * rng.uniform(0.25, 1.0);
        std::vector<double> mu(m), w(m);
        for (std::size_t i = 0; i < m; ++i) mu[i] = options.base.x_at(i) + rng.normal(0.0, options.scale);
        if (k % 2 == 0) {
            out.push_back(bump_member(k, std::move(mu), s));
            continue;
        }
        double norm = 0.0;
        for (auto& e : w) {
            e = rng.normal();
            norm += e * e;
        }
        norm = std::sqrt(norm);
        for (auto& e : w) e /= norm;
        out.push_back(odd_bump_member(k, std::move(mu), std::move(w), s));
    }
    return out;
}

double pair_extended(const EmpiricalMeasure& nu, const TestFunction& phi) {
    double sum = 0.0;
    for (std::size_t i = 0; i < nu.size(); ++i) sum += phi.value(nu.marks[i], nu.state(i));
    double out = sum * nu.weight();
    const double defect = 1.0 - nu.mass;
    if (defect != 0.0) {
        if (!std::isfinite(phi.star_value)) {
            throw std::invalid_argument("pair_extended: " + phi.id + " has no value at the added point");
        }
        out += defect * phi.star_value;
    }
    return out;
}

namespace {

// moments[f * R + r] = |<A_r - B_r, phi_f>|^q
BLEstimate reduce_moments(const std::vector<double>& moments, std::size_t F, std::size_t R, double q,
                          const std::vector<TestFunction>& dictionary) {
    BLEstimate est;
    est.per_function.resize(F);
    std::vector<double> sums(F, 0.0);
    for (std::size_t f = 0; f < F; ++f) {
        for (std::size_t r = 0; r < R; ++r) sums[f] += moments[f * R + r];
        est.per_function[f] = std::pow(sums[f] / static_cast<double>(R), 1.0 / q);
    }
    const auto best = std::max_element(est.per_function.begin(), est.per_function.end());
    est.maximizer_index = static_cast<std::size_t>(best - est.per_function.begin());
    est.value = *best;
    est.maximizer = dictionary[est.maximizer_index].id;

    // Jackknife over replications, re-maximizing each leave-one-out sample.
    std::vector<double> loo(R);
    double loo_mean = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
        double v = 0.0;
        for (std::size_t f = 0; f < F; ++f) {
            v = std::max(v, std::pow(std::max(0.0, sums[f] - moments[f * R + r]) / static_cast<double>(R - 1),
                                     1.0 / q));
        }
        loo[r] = v;
        loo_mean += v;
    }
    loo_mean /= static_cast<double>(R);
    double ss = 0.0;
    for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
    est.se = std::sqrt(static_cast<double>(R - 1) / static_cast<double>(R) * ss);
    return est;
}

void check_bl_inputs(std::size_t R, const std::vector<TestFunction>& dictionary, double q) {
    if (dictionary.empty()) throw std::invalid_argument("bl_distance: empty dictionary");
    if (R < 2) throw std::invalid_argument("bl_distance: needs at least 2 replications");
    if (!(q >= 2.0)) throw std::invalid_argument("bl_distance: q must be >= 2");
}

}  // namespace

BLEstimate bl_distance(const std::vector<EmpiricalMeasure>& samples, const EmpiricalMeasure& reference,
                       const std::vector<TestFunction>& dictionary, double q, int workers) {
    const std::size_t R = samples.size();
    const std::size_t F = dictionary.size();
    check_bl_inputs(R, dictionary, q);
    std::vector<double> moments(F * R);
    parallel_for(F, workers, [&](std::size_t f) {
        const double ref = pair_extended(reference, dictionary[f]);
        for (std::size_t r = 0; r < R; ++r) {
            moments[f * R + r] = std::pow(std::abs(pair_extended(samples[r], dictionary[f]) - ref), q);
        }
    });
    return reduce_moments(moments, F, R, q, dictionary);
}

BLEstimate bl_distance(const std::vector<EmpiricalMeasure>& samples,
                       const std::vector<EmpiricalMeasure>& references,
                       const std::vector<TestFunction>& dictionary, double q, int workers) {
    const std::size_t R = samples.size();
    const std::size_t F = dictionary.size();
    check_bl_inputs(R, dictionary, q);
    if (references.size() != R) throw std::invalid_argument("bl_distance: replication counts differ");
    std::vector<double> moments(F * R);
    parallel_for(F, workers, [&](std::size_t f) {
        for (std::size_t r = 0; r < R; ++r) {
            moments[f * R + r] = std::pow(
                std::abs(pair_extended(samples[r], dictionary[f]) - pair_extended(references[r], dictionary[f])), q);
        }
    });
    return reduce_moments(moments, F, R, q, dictionary);
}

DqtEstimate d_qT(const std::vector<double>& times, const std::vector<std::vector<EmpiricalMeasure>>& samples,
                 const std::vector<EmpiricalMeasure>& references,
                 const std::vector<TestFunction>& dictionary, double q, int workers) {
    if (times.empty()) throw std::invalid_argument("d_qT: empty time grid");
    if (samples.size() != times.size() || references.size() != times.size()) {
        throw std::invalid_argument("d_qT: grid mismatch");
    }
    DqtEstimate out;
    out.times = times;
    for (std::size_t s = 0; s < times.size(); ++s) {
        out.per_time.push_back(bl_distance(samples[s], references[s], dictionary, q, workers));
        const auto& e = out.per_time.back();
        if (s == 0 || e.value > out.value) {
            out.value = e.value;
            out.se = e.se;
            out.time = times[s];
            out.maximizer = e.maximizer;
        }
    }
    return out;
}

DqtEstimate d_qT(const std::vector<TrajectoryBundle>& replications, const MeasureFlow& flow,
                 const std::vector<TestFunction>& dictionary, double q,
                 const std::vector<double>& times, int workers) {
    std::vector<std::vector<EmpiricalMeasure>> samples(times.size());
    std::vector<EmpiricalMeasure> references;
    for (std::size_t s = 0; s < times.size(); ++s) {
        references.push_back(flow.slice(times[s]));
        for (const auto& bundle : replications) samples[s].push_back(empirical_measure(bundle, times[s]));
    }
    return d_qT(times, samples, references, dictionary, q, workers);
}

RateParams RateParams::make(double kappa, double q, int m) {
    if (!(q >= 2.0)) throw std::invalid_argument("gamma: q must be >= 2");
    if (m < 1) throw std::invalid_argument("gamma: m must be a positive integer");
    RateParams params{kappa, q, m, false};
    auto same = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
    switch (params.rate_case()) {
        case RateCase::AboveHalf:
        case RateCase::AtHalf: params.excluded = same(kappa, 2.0 * q); break;
        case RateCase::BelowHalf: params.excluded = same(kappa, m / (m - q)); break;
    }
    return params;
}

RateCase RateParams::rate_case() const noexcept {
    const double two_q = 2.0 * q;
    if (two_q > m) return RateCase::AboveHalf;
    if (two_q == m) return RateCase::AtHalf;
    return RateCase::BelowHalf;
}

double gamma_rate(const RateParams& params, double n) {
    const RateParams p = RateParams::make(params.kappa, params.q, params.m);
    if (p.excluded) {
        switch (p.rate_case()) {
            case RateCase::AboveHalf:
                throw std::domain_error("gamma: kappa = 2q is excluded in the case q > m/2");
            case RateCase::AtHalf:
                throw std::domain_error("gamma: kappa = 2q is excluded in the case q = m/2");
            case RateCase::BelowHalf:
                throw std::domain_error("gamma: kappa = m/(m-q) is excluded in the case q < m/2");
        }
    }
    if (!(p.kappa > p.q)) throw std::invalid_argument("gamma: kappa must exceed q");
    if (!(n >= 1.0)) throw std::invalid_argument("gamma: n must be >= 1");
    const double tail = std::pow(n, -(p.kappa - p.q) / p.kappa);
    switch (p.rate_case()) {
        case RateCase::AboveHalf: return 1.0 / std::sqrt(n) + tail;
        case RateCase::AtHalf: return std::log1p(n) / std::sqrt(n) + tail;
        case RateCase::BelowHalf: return std::pow(n, -p.q / p.m) + tail;
    }
    return tail;  // unreachable
}

double predicted_exponent(const RateParams& params) {
    const double first = params.rate_case() == RateCase::BelowHalf ? -params.q / params.m : -0.5;
    const double tail = -(params.kappa - params.q) / params.kappa;
    const double sampling = -(1.0 - 1.0 / params.q);
    return std::max({first, tail, sampling});
}

}  // namespace chaoslab
