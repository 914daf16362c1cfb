#include "crfrail/step_function.hpp"

#include <algorithm>

namespace crfrail {

double StepFunction::operator()(double t) const {
    auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
    if (it == breakpoints.begin()) return initial;
    return values[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
}

bool StepFunction::well_formed() const {
    if (breakpoints.size() != values.size()) return false;
    return std::adjacent_find(breakpoints.begin(), breakpoints.end(),
                              [](double a, double b) { return !(a < b); }) == breakpoints.end();
}

}  // namespace crfrail
