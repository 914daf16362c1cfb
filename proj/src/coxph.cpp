#include "crfrail/coxph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "crfrail/error.hpp"

namespace crfrail {

namespace {

// Indices sorted by descending time; risk sets are prefixes of this order.
std::vector<Eigen::Index> descending_time_order(const Eigen::VectorXd& time) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(time.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return time(a) > time(b); });
    return order;
}

Eigen::VectorXd resolve_offsets(const Eigen::VectorXd& offsets, Eigen::Index n) {
    if (offsets.size() == 0) return Eigen::VectorXd::Ones(n);
    if (offsets.size() != n) throw DomainError("offset length does not match record count");
    if ((offsets.array() <= 0.0).any() || !offsets.allFinite())
        throw DomainError("offsets must be positive and finite");
    return offsets;
}

}  // namespace

SurvivalDesign make_design(const CompetingRisksDataset& data,
                           std::span<const std::string> covariates) {
    SurvivalDesign design;
    design.time = data.times();
    design.status = data.statuses();
    if (covariates.empty()) {
        design.x.resize(static_cast<Eigen::Index>(data.size()), 0);
    } else {
        design.x = data.covariate_matrix(covariates);
        design.names.assign(covariates.begin(), covariates.end());
    }
    return design;
}

void append_column(SurvivalDesign& design, const std::string& name,
                   const Eigen::Ref<const Eigen::VectorXd>& column) {
    if (column.size() != design.rows()) throw DomainError("column length does not match design");
    design.x.conservativeResize(Eigen::NoChange, design.x.cols() + 1);
    design.x.col(design.x.cols() - 1) = column;
    design.names.push_back(name);
}

PartialLikelihood partial_loglik(const Eigen::Ref<const Eigen::VectorXd>& beta,
                                 const SurvivalDesign& design, int cause,
                                 const Eigen::Ref<const Eigen::VectorXd>& offsets) {
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    if (beta.size() != p) throw DomainError("coefficient length does not match design");
    if (offsets.size() != n) throw DomainError("offset length does not match record count");
    if (!design.x.allFinite()) throw DomainError("non-finite covariate values");
    if (cause < 1) throw DomainError("cause must be >= 1");

    const Eigen::VectorXd log_offset = offsets.array().log().matrix();
    const Eigen::VectorXd eta = design.x * beta + log_offset;
    const double shift = n > 0 ? eta.maxCoeff() : 0.0;
    const Eigen::VectorXd risk = (eta.array() - shift).exp().matrix();

    PartialLikelihood out;
    out.gradient = Eigen::VectorXd::Zero(p);
    out.hessian = Eigen::MatrixXd::Zero(p, p);

    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

    const auto order = descending_time_order(design.time);
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = design.time(order[i]);
        std::size_t j = i;
        double deaths = 0.0;
        Eigen::VectorXd x_events = Eigen::VectorXd::Zero(p);
        for (; j < order.size() && design.time(order[j]) == t; ++j) {
            const Eigen::Index r = order[j];
            s0 += risk(r);
            s1.noalias() += risk(r) * design.x.row(r).transpose();
            if (p > 0) s2.noalias() += risk(r) * design.x.row(r).transpose() * design.x.row(r);
            if (design.status(r) == cause) {
                deaths += 1.0;
                out.value += eta(r);
                x_events.noalias() += design.x.row(r).transpose();
            }
        }
        if (deaths > 0.0) {
            out.value -= deaths * (shift + std::log(s0));
            const Eigen::VectorXd mean = s1 / s0;
            out.gradient.noalias() += x_events - deaths * mean;
            out.hessian.noalias() -= deaths * (s2 / s0 - mean * mean.transpose());
        }
        i = j;
    }
    return out;
}

StepFunction breslow_baseline(const Eigen::Ref<const Eigen::VectorXd>& beta,
                              const SurvivalDesign& design, int cause,
                              const Eigen::Ref<const Eigen::VectorXd>& offsets) {
    const Eigen::VectorXd risk =
        ((design.x * beta).array().exp() * offsets.array()).matrix();
    const auto order = descending_time_order(design.time);

    std::vector<double> times, increments;
    double s0 = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = design.time(order[i]);
        std::size_t j = i;
        double deaths = 0.0;
        for (; j < order.size() && design.time(order[j]) == t; ++j) {
            s0 += risk(order[j]);
            if (design.status(order[j]) == cause) deaths += 1.0;
        }
        if (deaths > 0.0) {
            times.push_back(t);
            increments.push_back(deaths / s0);
        }
        i = j;
    }

    StepFunction baseline;
    baseline.breakpoints.assign(times.rbegin(), times.rend());
    baseline.values.reserve(increments.size());
    double cumulative = 0.0;
    for (auto it = increments.rbegin(); it != increments.rend(); ++it) {
        cumulative += *it;
        baseline.values.push_back(cumulative);
    }
    return baseline;
}

StepFunction breslow_baseline(const CoxFit& fit, const SurvivalDesign& design,
                              const Eigen::VectorXd& offsets) {
    return breslow_baseline(fit.beta, design, fit.cause, resolve_offsets(offsets, design.rows()));
}

double wald_pvalue(double estimate, double standard_error) {
    if (!(standard_error > 0.0) || !std::isfinite(standard_error))
        throw DomainError("standard error must be positive and finite");
    return std::erfc(std::abs(estimate / standard_error) / std::sqrt(2.0));
}

double wald_pvalue(const CoxFit& fit, Eigen::Index index) {
    if (index < 0 || index >= fit.beta.size()) throw DomainError("coefficient index out of range");
    return wald_pvalue(fit.beta(index), fit.standard_errors(index));
}

CoxFit fit_cox(const SurvivalDesign& design, int cause, const FitOptions& options) {
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    if (design.status.size() != n || design.x.rows() != n)
        throw DomainError("design dimensions disagree");
    if (!(design.status.array() == cause).any())
        throw DomainError("no events of cause " + std::to_string(cause));
    if (options.gradient_tolerance <= 0.0 || options.max_iterations < 1)
        throw DomainError("fit tolerances must be positive");
    const Eigen::VectorXd offsets = resolve_offsets(options.offsets, n);

    CoxFit fit;
    fit.cause = cause;
    fit.names = design.names;
    fit.beta = Eigen::VectorXd::Zero(p);
    if (options.initial_beta.size() == p && options.initial_beta.allFinite() &&
        options.initial_beta.lpNorm<Eigen::Infinity>() <= options.divergence_bound)
        fit.beta = options.initial_beta;

    PartialLikelihood current = partial_loglik(fit.beta, design, cause, offsets);
    fit.trace.push_back(current.value);

    auto singular_error = [&](const Eigen::MatrixXd& information) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(information);
        qr.setThreshold(1e-10);
        std::ostringstream msg;
        msg << "singular information matrix; collinear or constant columns:";
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index k = qr.rank(); k < p; ++k) {
            const Eigen::Index c = perm(k);
            msg << ' ' << (static_cast<std::size_t>(c) < design.names.size()
                               ? design.names[static_cast<std::size_t>(c)]
                               : "x" + std::to_string(c));
        }
        return NumericalError(msg.str());
    };

    while (p > 0) {
        if (current.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
            fit.converged = true;
            break;
        }
        if (fit.iterations >= options.max_iterations)
            throw ConvergenceError("Cox fit did not converge in " +
                                       std::to_string(options.max_iterations) + " iterations",
                                   fit.trace);

        const Eigen::MatrixXd information = -current.hessian;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(information);
        qr.setThreshold(1e-10);
        if (qr.rank() < p) throw singular_error(information);
        Eigen::VectorXd step = qr.solve(current.gradient);
        // Newton decrement: predicted gain of the full step. Once it is at
        // round-off level the step below is the last one.
        const bool last = current.gradient.dot(step) < 1e-12 * std::max(1.0, std::abs(current.value));

        Eigen::VectorXd candidate = fit.beta + step;
        PartialLikelihood next = partial_loglik(candidate, design, cause, offsets);
        int halvings = 0;
        while (!(next.value >= current.value) && halvings < options.max_step_halvings) {
            step *= 0.5;
            candidate = fit.beta + step;
            next = partial_loglik(candidate, design, cause, offsets);
            ++halvings;
        }
        ++fit.iterations;
        if (!(next.value >= current.value)) {
            // No ascent along the Newton direction: we sit at the numerical optimum.
            if (current.gradient.lpNorm<Eigen::Infinity>() < 1e-6 * std::max(1.0, std::abs(current.value))) {
                fit.converged = true;
                break;
            }
            throw ConvergenceError("Cox fit: step halving failed to increase the likelihood",
                                   fit.trace);
        }
        fit.beta = candidate;
        current = std::move(next);
        fit.trace.push_back(current.value);
        if (fit.beta.lpNorm<Eigen::Infinity>() > options.divergence_bound) {
            fit.monotone_likelihood = true;
            break;
        }
        if (last) {
            fit.converged = true;
            break;
        }
    }
    if (p == 0) fit.converged = true;

    fit.log_partial_likelihood = current.value;
    fit.covariance = Eigen::MatrixXd::Zero(p, p);
    fit.standard_errors = Eigen::VectorXd::Zero(p);
    fit.wald_p_values = Eigen::VectorXd::Zero(p);
    if (p > 0) {
        const Eigen::MatrixXd information = -current.hessian;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(information);
        qr.setThreshold(1e-10);
        if (qr.rank() < p) {
            if (!fit.monotone_likelihood) throw singular_error(information);
            fit.covariance.setConstant(std::numeric_limits<double>::infinity());
        } else {
            fit.covariance = qr.inverse();
            fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();
        }
        for (Eigen::Index k = 0; k < p; ++k) {
            const double var = fit.covariance(k, k);
            fit.standard_errors(k) = var > 0.0 ? std::sqrt(var) : std::numeric_limits<double>::infinity();
            fit.wald_p_values(k) = std::isfinite(fit.standard_errors(k))
                                       ? wald_pvalue(fit.beta(k), fit.standard_errors(k))
                                       : 1.0;
        }
    }
    fit.baseline = breslow_baseline(fit.beta, design, cause, offsets);
    return fit;
}

CoxFit fit_cox(const CompetingRisksDataset& data, int cause,
               std::span<const std::string> covariates, const FitOptions& options) {
    return fit_cox(make_design(data, covariates), cause, options);
}

nlohmann::json to_json(const CoxFit& fit) {
    nlohmann::json coefficients = nlohmann::json::array();
    for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
        coefficients.push_back({
            {"name", static_cast<std::size_t>(k) < fit.names.size() ? fit.names[static_cast<std::size_t>(k)] : ""},
            {"estimate", fit.beta(k)},
            {"hazard_ratio", std::exp(fit.beta(k))},
            {"standard_error", fit.standard_errors(k)},
            {"p_value", fit.wald_p_values(k)},
        });
    }
    return {
        {"cause", fit.cause},
        {"coefficients", coefficients},
        {"log_partial_likelihood", fit.log_partial_likelihood},
        {"baseline", {{"time", fit.baseline.breakpoints}, {"cumulative_hazard", fit.baseline.values}}},
        {"convergence",
         {{"converged", fit.converged},
          {"iterations", fit.iterations},
          {"monotone_likelihood", fit.monotone_likelihood},
          {"trace", fit.trace}}},
    };
}

}  // namespace crfrail
