#include "chaoslab/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace chaoslab {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53U;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57U;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9U;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85U;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

inline void box_muller(double u1, double u2, double& z0, double& z1) noexcept {
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    z0 = radius * std::cos(angle);
    z1 = radius * std::sin(angle);
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Philox4x32::Key derive_key(const DriverSeed& seed) noexcept {
    std::uint64_t h = splitmix64(seed.master_seed);
    h = splitmix64(h ^ seed.stream.replication);
    h = splitmix64(h ^ static_cast<std::uint64_t>(seed.stream.kind));
    return {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
}

double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    // 52 bits: bits + 0.5 stays exact, so the result never rounds to 1
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi >> 6) << 26) | (lo >> 6);
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

Philox4x32::Counter stream_block(const DriverSeed& seed, std::uint64_t step_index,
                                 std::uint32_t block) noexcept {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(step_index),
                                  static_cast<std::uint32_t>(step_index >> 32), block,
                                  static_cast<std::uint32_t>(seed.stream.particle)};
    return Philox4x32::generate(ctr, derive_key(seed));
}

void brownian_increment_into(const DriverSeed& seed, std::uint64_t step_index, double dt,
                             std::span<double> out) {
    if (out.empty()) {
        throw std::invalid_argument("brownian_increment: dims must be positive");
    }
    if (!(dt > 0.0)) {
        throw std::invalid_argument("brownian_increment: dt must be positive, got " +
                                    std::to_string(dt));
    }
    const double scale = std::sqrt(dt);
    const std::size_t dims = out.size();
    for (std::size_t k = 0; k < dims; k += 2) {
        const auto block = stream_block(seed, step_index, static_cast<std::uint32_t>(k / 2));
        double z0, z1;
        box_muller(to_open_unit(block[0], block[1]), to_open_unit(block[2], block[3]), z0, z1);
        out[k] = scale * z0;
        if (k + 1 < dims) {
            out[k + 1] = scale * z1;
        }
    }
}

std::vector<double> brownian_increment(const DriverSeed& seed, std::uint64_t step_index, double dt,
                                       int dims) {
    if (dims <= 0) {
        throw std::invalid_argument("brownian_increment: dims must be positive");
    }
    std::vector<double> out(static_cast<std::size_t>(dims));
    brownian_increment_into(seed, step_index, dt, out);
    return out;
}

double jump_uniform(const DriverSeed& seed, std::uint64_t step_index) noexcept {
    const auto block = stream_block(seed, step_index, 0);
    return to_open_unit(block[0], block[1]);
}

int step_jump_decision(double intensity, double bound, double dt, const DriverSeed& seed,
                       std::uint64_t step_index) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("step_jump_decision: dt must be positive");
    }
    if (!(intensity >= 0.0) || intensity > bound) {
        throw std::domain_error("step_jump_decision: intensity " + std::to_string(intensity) +
                                " outside [0, " + std::to_string(bound) +
                                "]; the intensity certificate is violated");
    }
    if (intensity == 0.0) {
        return 0;
    }
    const double fire_probability = -std::expm1(-intensity * dt);
    return jump_uniform(seed, step_index) < fire_probability ? 1 : 0;
}

StreamRng::StreamRng(const DriverSeed& seed) noexcept : seed_(seed), key_(derive_key(seed)) {}

void StreamRng::refill() noexcept {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_),
                                  static_cast<std::uint32_t>(block_ >> 32), 0xFFFF'FFFFU,
                                  static_cast<std::uint32_t>(seed_.stream.particle)};
    const auto out = Philox4x32::generate(ctr, key_);
    ++block_;
    buffer_ = {to_open_unit(out[0], out[1]), to_open_unit(out[2], out[3])};
    available_ = 2;
}

double StreamRng::uniform() noexcept {
    if (available_ == 0) {
        refill();
    }
    return buffer_[static_cast<std::size_t>(2 - available_--)];
}

double StreamRng::normal() noexcept {
    if (has_spare_normal_) {
        has_spare_normal_ = false;
        return spare_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    double z0, z1;
    box_muller(u1, u2, z0, z1);
    spare_normal_ = z1;
    has_spare_normal_ = true;
    return z0;
}

}  // namespace chaoslab
