#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>

#include "chaoslab/model.hpp"

namespace chaoslab {

/// phi(p, x) with its x-derivatives and norm certificates.
struct TestFunction {
    std::string id;
    std::function<double(double p, ConstVec x)> value;
    std::function<void(double p, ConstVec x, MutVec grad)> grad_x;
    std::function<void(double p, ConstVec x, MutVec hess)> hess_x;  // m x m row-major
    double sup_norm = std::numeric_limits<double>::infinity();
    double lip_norm = std::numeric_limits<double>::infinity();
    double star_value = 0.0;  // phi at the point at infinity

    /// Member of R_1: sup_norm + lip_norm <= 1.
    bool in_r1() const noexcept { return sup_norm + lip_norm <= 1.0 + 1e-12; }
    double operator()(double p, ConstVec x) const { return value(p, x); }
};

namespace test_functions {

TestFunction constant(double c);
TestFunction zero();
/// phi = scale * x_k
TestFunction coordinate(std::size_t k, int dim, double scale = 1.0);
/// phi = x_k^2
TestFunction square(std::size_t k, int dim);
/// phi = scale * tanh(x_k); in R_1 for scale <= 1/2.
TestFunction tanh_coordinate(std::size_t k, int dim, double scale = 1.0);
/// a * f + b * g (certificates combined by the triangle inequality).
TestFunction linear_combination(double a, const TestFunction& f, double b, const TestFunction& g);

}  // namespace test_functions

}  // namespace chaoslab
