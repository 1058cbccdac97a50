#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace chaoslab {

/// A computation produced a non-finite value. Maps to CLI exit code 2.
class NumericalAbort : public std::runtime_error {
public:
    NumericalAbort(const std::string& what, double time, std::vector<double> point)
        : std::runtime_error(what), time_(time), point_(std::move(point)) {}

    double time() const noexcept { return time_; }
    const std::vector<double>& point() const noexcept { return point_; }

private:
    double time_;
    std::vector<double> point_;
};

/// Bad configuration or command line. Maps to CLI exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace chaoslab
