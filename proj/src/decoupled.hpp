#pragma once

// Batch integrator for independent limit paths driven by a fixed flow.

#include <cstdint>
#include <vector>

#include "chaoslab/flow.hpp"

namespace chaoslab::detail {

struct AtomBatch {
    std::vector<double> marks;
    std::vector<double> states;      // count * m, advanced in place
    std::vector<DriverSeed> seeds;   // per atom; kind chosen per draw
    std::vector<std::uint32_t> jumps;  // filled by advance_batch

    std::size_t size() const noexcept { return marks.size(); }
};

struct BatchOutput {
    std::vector<double> recorded;           // record_steps.size() * count * m
    std::vector<std::uint32_t> recorded_jumps;  // record_steps.size() * count
    std::vector<FieldSummary> step_fields;  // steps start..end when summarizing
};

/// Advances every atom from grid step `start` to `end` against `flow`,
/// recording states at the (sorted) steps in `record_steps`. Throws
/// NumericalAbort on the first non-finite state (lowest atom index).
BatchOutput advance_batch(const ModelSpec& spec, const MeasureFlow& flow, AtomBatch& batch,
                          std::uint64_t start, std::uint64_t end,
                          const std::vector<std::uint64_t>& record_steps, bool summarize,
                          int workers);

}  // namespace chaoslab::detail
