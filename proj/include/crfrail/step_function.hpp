#pragma once

#include <vector>

namespace crfrail {

// Right-continuous step function: value `initial` before the first breakpoint,
// values[i] on [breakpoints[i], breakpoints[i+1]).
struct StepFunction {
    std::vector<double> breakpoints;
    std::vector<double> values;
    double initial = 0.0;

    double operator()(double t) const;
    std::size_t size() const noexcept { return breakpoints.size(); }
    bool empty() const noexcept { return breakpoints.empty(); }

    // Strictly increasing breakpoints and matching lengths.
    bool well_formed() const;
};

}  // namespace crfrail
