#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "crfrail/dataset.hpp"
#include "crfrail/step_function.hpp"
#include "json.hpp"

namespace crfrail {

// Response plus design matrix for a cause-specific Cox fit.
struct SurvivalDesign {
    Eigen::VectorXd time;
    Eigen::VectorXi status;
    Eigen::MatrixXd x;  // n x p
    std::vector<std::string> names;

    Eigen::Index rows() const noexcept { return time.size(); }
    Eigen::Index cols() const noexcept { return x.cols(); }
};

SurvivalDesign make_design(const CompetingRisksDataset& data,
                           std::span<const std::string> covariates);
// Appends a named column (e.g. a dichotomised gene) to the design.
void append_column(SurvivalDesign& design, const std::string& name,
                   const Eigen::Ref<const Eigen::VectorXd>& column);

struct FitOptions {
    int max_iterations = 100;
    double gradient_tolerance = 1e-8;
    int max_step_halvings = 20;
    double divergence_bound = 15.0;
    // Per-subject multiplicative risk offsets; empty means all ones.
    Eigen::VectorXd offsets;
    // Starting coefficients; empty means beta = 0.
    Eigen::VectorXd initial_beta;
};

struct PartialLikelihood {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
};

// Breslow log partial likelihood of `cause` (other causes treated as censored)
// with risk scores offset_i * exp(beta' x_i).
PartialLikelihood partial_loglik(const Eigen::Ref<const Eigen::VectorXd>& beta,
                                 const SurvivalDesign& design, int cause,
                                 const Eigen::Ref<const Eigen::VectorXd>& offsets);

struct CoxFit {
    int cause = 1;
    std::vector<std::string> names;
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;  // inverse observed information
    Eigen::VectorXd standard_errors;
    Eigen::VectorXd wald_p_values;
    double log_partial_likelihood = 0.0;
    StepFunction baseline;  // Breslow cumulative baseline hazard
    int iterations = 0;
    bool converged = false;
    // Set when |beta| crossed the divergence bound; estimates are not finite MLEs.
    bool monotone_likelihood = false;
    std::vector<double> trace;  // log partial likelihood per accepted step
};

// Newton-Raphson (from beta = 0 unless options.initial_beta is set) with step halving.
CoxFit fit_cox(const SurvivalDesign& design, int cause, const FitOptions& options = {});
CoxFit fit_cox(const CompetingRisksDataset& data, int cause,
               std::span<const std::string> covariates, const FitOptions& options = {});

// Lambda_0(t) = sum over event times <= t of d(t_i) / sum_{risk set} offset exp(beta' x).
StepFunction breslow_baseline(const Eigen::Ref<const Eigen::VectorXd>& beta,
                              const SurvivalDesign& design, int cause,
                              const Eigen::Ref<const Eigen::VectorXd>& offsets);
StepFunction breslow_baseline(const CoxFit& fit, const SurvivalDesign& design,
                              const Eigen::VectorXd& offsets = {});

// Two-sided normal-approximation p-value for coefficient `index`.
double wald_pvalue(const CoxFit& fit, Eigen::Index index);
double wald_pvalue(double estimate, double standard_error);

nlohmann::json to_json(const CoxFit& fit);

}  // namespace crfrail
