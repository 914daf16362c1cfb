#pragma once

#include <Eigen/Dense>

#include <functional>

namespace crfrail::detail {

struct BoxResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int evaluations = 0;
    int iterations = 0;
};

// Maximises f over the box [lower, upper] by projected BFGS with central
// finite-difference gradients. Never returns a point worse than x0.
BoxResult maximize_in_box(const std::function<double(const Eigen::VectorXd&)>& f,
                          Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                          const Eigen::VectorXd& upper, int max_iterations = 200,
                          double gradient_tolerance = 1e-7);

// One-dimensional maximisation on [lower, upper] (Brent). Compares against
// `start` and keeps whichever is better.
BoxResult maximize_scalar(const std::function<double(double)>& f, double start, double lower,
                          double upper);

}  // namespace crfrail::detail
