#include "optimize.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace crfrail::detail {

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kMaxStep = 4.0;

double safe(double v) { return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity(); }

}  // namespace

BoxResult maximize_in_box(const std::function<double(const Eigen::VectorXd&)>& f,
                          Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                          const Eigen::VectorXd& upper, int max_iterations,
                          double gradient_tolerance) {
    const Eigen::Index dim = x0.size();
    BoxResult r;
    r.x = x0.cwiseMax(lower).cwiseMin(upper);
    auto eval = [&](const Eigen::VectorXd& x) {
        ++r.evaluations;
        return safe(f(x));
    };
    r.value = eval(r.x);
    if (r.x != x0) {
        // Projection changed the start; never do worse than the caller's point.
        const double v0 = eval(x0);
        if (v0 > r.value) {
            r.x = x0;
            r.value = v0;
        }
    }

    auto gradient = [&](const Eigen::VectorXd& x, double fx) {
        Eigen::VectorXd g(dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            Eigen::VectorXd up = x, down = x;
            up(i) = std::min(x(i) + kFdStep, upper(i));
            down(i) = std::max(x(i) - kFdStep, lower(i));
            const double fu = up(i) == x(i) ? fx : eval(up);
            const double fd = down(i) == x(i) ? fx : eval(down);
            const double h = up(i) - down(i);
            g(i) = h > 0.0 ? (fu - fd) / h : 0.0;
            if (!std::isfinite(g(i))) g(i) = 0.0;
        }
        return g;
    };

    Eigen::MatrixXd inverse_hessian = Eigen::MatrixXd::Identity(dim, dim);
    Eigen::VectorXd g = gradient(r.x, r.value);
    for (r.iterations = 0; r.iterations < max_iterations; ++r.iterations) {
        // Variables pinned at a bound with the gradient pointing outward are frozen.
        Eigen::VectorXd free_g = g;
        for (Eigen::Index i = 0; i < dim; ++i) {
            if ((r.x(i) <= lower(i) && g(i) < 0.0) || (r.x(i) >= upper(i) && g(i) > 0.0))
                free_g(i) = 0.0;
        }
        if (free_g.lpNorm<Eigen::Infinity>() < gradient_tolerance) break;

        Eigen::VectorXd direction = inverse_hessian * free_g;
        for (Eigen::Index i = 0; i < dim; ++i)
            if (free_g(i) == 0.0) direction(i) = 0.0;
        if (direction.dot(free_g) <= 0.0) {
            inverse_hessian.setIdentity();
            direction = free_g;
        }
        const double norm = direction.norm();
        if (norm > kMaxStep) direction *= kMaxStep / norm;

        double step = 1.0;
        Eigen::VectorXd candidate;
        double candidate_value = -std::numeric_limits<double>::infinity();
        bool improved = false;
        for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
            candidate = (r.x + step * direction).cwiseMax(lower).cwiseMin(upper);
            candidate_value = eval(candidate);
            if (candidate_value > r.value + 1e-4 * free_g.dot(candidate - r.x)) {
                improved = true;
                break;
            }
        }
        if (!improved) {
            if (!inverse_hessian.isIdentity()) {
                inverse_hessian.setIdentity();
                continue;
            }
            break;
        }

        const Eigen::VectorXd s = candidate - r.x;
        const double previous = r.value;
        r.x = candidate;
        r.value = candidate_value;
        const Eigen::VectorXd g_new = gradient(r.x, r.value);
        // BFGS on the minimisation problem -f.
        const Eigen::VectorXd y = g - g_new;
        const double sy = s.dot(y);
        if (sy > 1e-12) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(dim, dim);
            inverse_hessian = (identity - rho * s * y.transpose()) * inverse_hessian *
                                  (identity - rho * y * s.transpose()) +
                              rho * s * s.transpose();
        }
        g = g_new;
        if (r.value - previous < 1e-12 * std::max(1.0, std::abs(r.value))) break;
    }
    return r;
}

BoxResult maximize_scalar(const std::function<double(double)>& f, double start, double lower,
                          double upper) {
    BoxResult r;
    auto negated = [&](double x) {
        ++r.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
    };
    std::uintmax_t max_iter = 200;
    const auto [x, fx] = boost::math::tools::brent_find_minima(negated, lower, upper, 40, max_iter);
    r.iterations = static_cast<int>(max_iter);
    r.x = Eigen::VectorXd::Constant(1, x);
    r.value = -fx;
    // Brent only brackets interior optima; check the bounds and the start.
    for (double candidate : {start, lower, upper}) {
        const double v = -negated(candidate);
        if (v > r.value) {
            r.value = v;
            r.x(0) = candidate;
        }
    }
    return r;
}

}  // namespace crfrail::detail
