#pragma once

// Counter-based random streams.
//
// Every random number in the library is a pure function of
// (master_seed, stream id, step index, block index). Nothing carries
// mutable generator state across particles, so the thread schedule can
// never change a result.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace chaoslab {

/// Philox4x32-10 block cipher (Salmon et al., Random123).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept;
};

enum class DriverKind : std::uint32_t {
    Brownian = 1,
    Jump = 2,
    InitialState = 3,
    Mark = 4,
    Probe = 5,
    Dictionary = 6,
};

/// Stream namespaces. Disjoint domains guarantee that, e.g., the reference
/// flow and the particle runs of a study never share a stream.
enum class StreamDomain : std::uint64_t {
    Particles = 0,
    Flow = 1,
    Propagator = 2,
    Validation = 3,
    Dictionary = 4,
    Reference = 5,
};

/// Packs a domain tag into the top byte of a replication index.
constexpr std::uint64_t replication_in(StreamDomain domain, std::uint64_t index) noexcept {
    return (static_cast<std::uint64_t>(domain) << 56) | (index & 0x00FF'FFFF'FFFF'FFFFULL);
}

struct StreamId {
    std::uint64_t replication = 0;
    std::uint64_t particle = 0;
    DriverKind kind = DriverKind::Brownian;

    friend bool operator==(const StreamId&, const StreamId&) = default;
};

struct DriverSeed {
    std::uint64_t master_seed = 0;
    StreamId stream{};

    DriverSeed with_kind(DriverKind kind) const noexcept {
        DriverSeed s = *this;
        s.stream.kind = kind;
        return s;
    }
    DriverSeed with_particle(std::uint64_t particle) const noexcept {
        DriverSeed s = *this;
        s.stream.particle = particle;
        return s;
    }

    friend bool operator==(const DriverSeed&, const DriverSeed&) = default;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Philox key derived from (master_seed, replication, kind). The particle
/// index goes into the counter, so distinct particles never collide.
Philox4x32::Key derive_key(const DriverSeed& seed) noexcept;

/// Uniform in the open interval (0, 1) with 52 random bits.
double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept;

/// Raw block for (seed, step_index, block).
Philox4x32::Counter stream_block(const DriverSeed& seed, std::uint64_t step_index,
                                 std::uint32_t block) noexcept;

/// I.i.d. N(0, dt) entries, deterministic in (seed, step_index).
/// Throws std::invalid_argument for dims <= 0 or dt <= 0.
std::vector<double> brownian_increment(const DriverSeed& seed, std::uint64_t step_index, double dt,
                                       int dims);

/// Same as brownian_increment but writes into `out` (out.size() == dims).
void brownian_increment_into(const DriverSeed& seed, std::uint64_t step_index, double dt,
                             std::span<double> out);

/// Uniform draw used by the jump thinning at a given step.
double jump_uniform(const DriverSeed& seed, std::uint64_t step_index) noexcept;

/// Returns 1 with probability 1 - exp(-intensity * dt), else 0.
/// Intensity is frozen at the step's left endpoint. Throws std::domain_error
/// when intensity exceeds `bound` (violated C_psi * p certificate) or is
/// negative, and std::invalid_argument when dt <= 0.
int step_jump_decision(double intensity, double bound, double dt, const DriverSeed& seed,
                       std::uint64_t step_index);

/// Sequential generator over one stream; used for initial laws, marks,
/// probe points and dictionary construction. Draw k comes from counter
/// block k, so the sequence depends on nothing but the seed.
class StreamRng {
public:
    explicit StreamRng(const DriverSeed& seed) noexcept;

    double uniform() noexcept;  // (0, 1)
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    double normal() noexcept;
    double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

private:
    void refill() noexcept;

    DriverSeed seed_;
    Philox4x32::Key key_;
    std::uint64_t block_ = 0;
    std::array<double, 2> buffer_{};
    int available_ = 0;
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

}  // namespace chaoslab
