#include "chaoslab/measure.hpp"

#include <stdexcept>

namespace chaoslab {

std::vector<double> EmpiricalMeasure::mean_state() const {
    const auto m = static_cast<std::size_t>(dim);
    std::vector<double> mean(m, 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
        for (std::size_t k = 0; k < m; ++k) mean[k] += states[i * m + k];
    }
    const double w = weight();
    for (auto& e : mean) e *= w;
    return mean;
}

void EmpiricalMeasure::check() const {
    if (dim <= 0) throw std::invalid_argument("EmpiricalMeasure: dim must be positive");
    if (states.size() != marks.size() * static_cast<std::size_t>(dim)) {
        throw std::invalid_argument("EmpiricalMeasure: states/marks size mismatch");
    }
    if (!(mass >= 0.0 && mass <= 1.0)) {
        throw std::invalid_argument("EmpiricalMeasure: mass must lie in [0, 1]");
    }
}

MeasureField::MeasureField(const ModelSpec& spec, ConstVec states, std::size_t count, double weight)
    : spec_(&spec), states_(states), count_(count), weight_(weight) {
    const auto m = static_cast<std::size_t>(spec.dim_state);
    if (states.size() != count * m) {
        throw std::invalid_argument("MeasureField: state buffer size mismatch");
    }
    summary_.mean_state.assign(m, 0.0);
    const bool alpha_sep = spec.kernel_alpha.is_separable();
    const bool beta_sep = spec.kernel_beta.is_separable();
    for (std::size_t j = 0; j < count; ++j) {
        const ConstVec y = states.subspan(j * m, m);
        for (std::size_t k = 0; k < m; ++k) summary_.mean_state[k] += y[k];
        if (alpha_sep) summary_.alpha_right += spec.kernel_alpha.right(y);
        if (beta_sep) summary_.beta_right += spec.kernel_beta.right(y);
    }
    for (auto& e : summary_.mean_state) e *= weight;
    summary_.alpha_right *= weight;
    summary_.beta_right *= weight;
}

MeasureField::MeasureField(const ModelSpec& spec, const EmpiricalMeasure& measure)
    : MeasureField(spec, measure.states, measure.size(), measure.weight()) {}

MeasureField::MeasureField(const ModelSpec& spec, FieldSummary summary)
    : spec_(&spec), summary_(std::move(summary)) {
    if (!spec.kernel_alpha.is_separable() || !spec.kernel_beta.is_separable()) {
        throw std::invalid_argument("MeasureField: summary-only field needs separable kernels");
    }
}

double MeasureField::dense_pair(const InteractionKernel& kernel, ConstVec x) const {
    if (count_ == 0 && states_.empty()) {
        throw std::logic_error("MeasureField: dense kernel queried on a summary-only field");
    }
    const auto m = static_cast<std::size_t>(spec_->dim_state);
    double sum = 0.0;
    for (std::size_t j = 0; j < count_; ++j) sum += kernel(x, states_.subspan(j * m, m));
    return sum * weight_;
}

double MeasureField::alpha(ConstVec x) const {
    const auto& kernel = spec_->kernel_alpha;
    return kernel.is_separable() ? kernel.from_summary(x, summary_.alpha_right)
                                 : dense_pair(kernel, x);
}

double MeasureField::beta(ConstVec x) const {
    const auto& kernel = spec_->kernel_beta;
    return kernel.is_separable() ? kernel.from_summary(x, summary_.beta_right)
                                 : dense_pair(kernel, x);
}

}  // namespace chaoslab
