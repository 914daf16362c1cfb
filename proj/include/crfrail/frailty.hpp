#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crfrail/coxph.hpp"
#include "crfrail/dataset.hpp"
#include "json.hpp"

namespace crfrail {

// Shapes of the additive gamma construction
//   W_kj = (Z_k0 + Z_kj) / (nu0 + nu_j),  Z_k0 ~ Gamma(nu0, 1),  Z_kj ~ Gamma(nu_j, 1).
struct FrailtyParams {
    double nu0 = 1.0;
    Eigen::VectorXd nu;  // one shape per cause

    int causes() const noexcept { return static_cast<int>(nu.size()); }
};

template <typename Scalar>
struct FrailtyMomentsT {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> variances;                  // xi_j
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> correlations;  // rho, unit diagonal
};
using FrailtyMoments = FrailtyMomentsT<double>;

// xi_j = 1/(nu0 + nu_j), rho_{j1 j2} = nu0 sqrt(xi_j1 xi_j2). nu0 = 0 is the
// independence limit.
template <typename Scalar>
FrailtyMomentsT<Scalar> frailty_moments(Scalar nu0,
                                        const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& nu) {
    using std::sqrt;
    FrailtyMomentsT<Scalar> m;
    m.variances = (nu.array() + nu0).inverse().matrix();
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> root = m.variances.array().sqrt().matrix();
    m.correlations = nu0 * (root * root.transpose());
    m.correlations.diagonal().setOnes();
    return m;
}

inline FrailtyMoments frailty_moments(const FrailtyParams& params) {
    return frailty_moments<double>(params.nu0, params.nu);
}

// ---------------------------------------------------------------------------
// E-step and cluster marginal likelihood

struct EStepOptions {
    // Bound on multinomial expansion terms evaluated for one cluster.
    std::size_t max_terms = 1'000'000;
};

struct PosteriorMeans {
    double shared = 0.0;       // E[Z_k0 | data]
    Eigen::VectorXd specific;  // E[Z_kj | data]
    // log of the frailty-dependent cluster factor
    //   E[ prod_j W_kj^{d_kj} exp(-W_kj H_kj) ]
    double log_marginal = 0.0;
    std::size_t terms = 0;
};

// Exact posterior means by expanding prod_j (Z0 + Zj)^{d_j}; the resulting
// gamma mixture is summed in log space. Throws NumericalError when more than
// `max_terms` terms would be needed (use estep_posterior_quadrature instead).
PosteriorMeans estep_posterior(const ClusterSummary& summary, const FrailtyParams& params,
                               const EStepOptions& options = {});

// Same quantities by nested adaptive quadrature over Z0 and each Zj.
PosteriorMeans estep_posterior_quadrature(const ClusterSummary& summary,
                                          const FrailtyParams& params);

enum class LikelihoodMethod { ClosedForm, Quadrature };

// Sum over clusters of PosteriorMeans::log_marginal.
double frailty_loglik(const FrailtyParams& params, std::span<const ClusterSummary> summaries,
                      LikelihoodMethod method = LikelihoodMethod::ClosedForm);

// Independent unit-mean gamma frailties per cause (shape nu_j); the nu0 -> 0
// limit of frailty_loglik.
double independent_frailty_loglik(const Eigen::VectorXd& nu,
                                  std::span<const ClusterSummary> summaries);

// Full observed-data log-likelihood: event terms sum(log dLambda_j0(t) + beta_j'x)
// plus the frailty marginal. `models` has one entry per cause. Falls back to
// quadrature when the closed form overflows; throws if both fail.
double observed_loglik(const FrailtyParams& params, const CompetingRisksDataset& data,
                       std::span<const CauseModel> models,
                       LikelihoodMethod method = LikelihoodMethod::ClosedForm);

// sum over events of cause j of log(jump of Lambda_j0 at t_i) + eta_i.
double event_log_terms(const CompetingRisksDataset& data, std::span<const CauseModel> models);

// ---------------------------------------------------------------------------
// Fits

struct ParameterInterval {
    std::string name;
    double estimate = 0.0;
    double standard_error = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct IntervalEstimates {
    std::string method;
    int replicates = 0;
    int failures = 0;
    double level = 0.95;
    std::vector<ParameterInterval> parameters;
    std::optional<std::string> warning;
};

struct CorrelatedFrailtyOptions {
    std::vector<std::string> covariates;  // empty = every covariate
    int max_iterations = 500;
    double tolerance = 1e-6;
    double nu_lower = 1e-6;
    double nu_upper = 1e8;
    std::optional<FrailtyParams> initial;
    FitOptions cox;
    EStepOptions estep;
};

struct CorrelatedFrailtyFit {
    std::vector<CoxFit> causes;  // last M-step fits (SEs conditional on frailties)
    FrailtyParams params;
    FrailtyMoments moments;
    Eigen::VectorXd posterior_shared;    // K
    Eigen::MatrixXd posterior_specific;  // K x J
    std::vector<double> loglik_trace;
    double loglik = 0.0;
    int iterations = 0;
    bool converged = false;
    std::optional<IntervalEstimates> intervals;
};

CorrelatedFrailtyFit fit_correlated_frailty(const CompetingRisksDataset& data,
                                            const CorrelatedFrailtyOptions& options = {});

// Named flat view used by bootstrap and replicate summaries:
// beta<j>.<name>, xi<j>, rho<j1><j2>.
std::vector<std::pair<std::string, double>> parameter_vector(const CorrelatedFrailtyFit& fit);

enum class FrailtyDistribution { Gamma, LogNormal };
const char* to_string(FrailtyDistribution d);
FrailtyDistribution parse_distribution(const std::string& text);

struct SharedFrailtyOptions {
    std::vector<std::string> covariates;  // empty = every covariate
    int cause = 1;
    int max_iterations = 500;
    double tolerance = 1e-6;
    double variance_lower = 1e-8;
    double variance_upper = 1e6;
    FitOptions cox;
};

struct SharedFrailtyFit {
    FrailtyDistribution distribution = FrailtyDistribution::Gamma;
    int cause = 1;
    CoxFit cox;                       // beta and baseline at the estimate
    double variance = 0.0;            // Var(W) (gamma) or Var(log W) (log-normal)
    Eigen::VectorXd posterior_means;  // per group
    double loglik = 0.0;              // marginal (gamma) or Laplace integrated partial (log-normal)
    double null_loglik = 0.0;         // same criterion without frailty
    double lr_statistic = 0.0;
    double p_value = 1.0;             // boundary-corrected LR test of zero variance
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
};

// `groups` holds labels 1..K per record; empty uses the dataset's clusters.
SharedFrailtyFit fit_shared_frailty(const CompetingRisksDataset& data,
                                    FrailtyDistribution distribution,
                                    const Eigen::VectorXi& groups = {},
                                    const SharedFrailtyOptions& options = {});

// One gamma shared-frailty fit per cause on the dataset's clusters.
std::vector<SharedFrailtyFit> fit_independent_frailty(const CompetingRisksDataset& data,
                                                      const SharedFrailtyOptions& options = {});

// ---------------------------------------------------------------------------
// Uncertainty

struct BootstrapOptions {
    int replicates = 200;
    std::uint64_t seed = 1;
    double level = 0.95;
    unsigned threads = 0;
};

// Nonparametric cluster bootstrap with percentile intervals.
IntervalEstimates standard_errors(const CorrelatedFrailtyFit& fit,
                                  const CompetingRisksDataset& data,
                                  const CorrelatedFrailtyOptions& fit_options,
                                  const BootstrapOptions& options = {});

struct EmpiricalMetrics {
    double truth = 0.0;
    double mean = 0.0;
    double median = 0.0;
    double bias = 0.0;
    double empse = 0.0;  // sample SD of the estimates (R - 1 denominator)
    double rmse = 0.0;
    std::size_t count = 0;
};

EmpiricalMetrics empirical_metrics(std::span<const double> estimates, double truth);

nlohmann::json to_json(const CorrelatedFrailtyFit& fit);
nlohmann::json to_json(const SharedFrailtyFit& fit);
nlohmann::json to_json(const IntervalEstimates& intervals);

}  // namespace crfrail
