#pragma once

// Atomic measures on E = R_+ x R^m and their pairings with the model's
// interaction kernels.

#include <cstddef>
#include <vector>

#include "chaoslab/model.hpp"

namespace chaoslab {

/// Uniformly weighted atoms (p_i, x_i). `mass` is the total mass: 1 for
/// probability measures, < 1 for the sub-probability measures handled by
/// the compactified pairing.
struct EmpiricalMeasure {
    double time = 0.0;
    int dim = 1;
    std::vector<double> marks;
    std::vector<double> states;  // size() * dim, row-major
    double mass = 1.0;

    std::size_t size() const noexcept { return marks.size(); }
    double weight() const noexcept { return marks.empty() ? 0.0 : mass / static_cast<double>(size()); }
    ConstVec state(std::size_t i) const noexcept {
        return {states.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
    /// <nu, I> with I(p, x) = x.
    std::vector<double> mean_state() const;
    /// Throws std::invalid_argument on inconsistent sizes or mass outside [0, 1].
    void check() const;
};

/// Everything needed to pair a measure with alpha(x, .), beta(x, .) and I.
struct FieldSummary {
    std::vector<double> mean_state;
    double alpha_right = 0.0;  // <nu, right_alpha> when alpha is separable
    double beta_right = 0.0;
};

/// Read-only view answering <nu, alpha(x, .)>, <nu, beta(x, .)> and <nu, I>
/// for one atom set. Separable kernels are answered from the summary in
/// O(1); dense kernels sum over the atoms in index order.
class MeasureField {
public:
    /// `states` must outlive the field when a kernel is dense.
    MeasureField(const ModelSpec& spec, ConstVec states, std::size_t count, double weight);
    MeasureField(const ModelSpec& spec, const EmpiricalMeasure& measure);
    /// Summary-only field; both kernels must be separable.
    MeasureField(const ModelSpec& spec, FieldSummary summary);

    double alpha(ConstVec x) const;
    double beta(ConstVec x) const;
    ConstVec mean_state() const noexcept { return summary_.mean_state; }
    const FieldSummary& summary() const noexcept { return summary_; }

private:
    double dense_pair(const InteractionKernel& kernel, ConstVec x) const;

    const ModelSpec* spec_;
    FieldSummary summary_;
    ConstVec states_;
    std::size_t count_ = 0;
    double weight_ = 0.0;
};

}  // namespace chaoslab
