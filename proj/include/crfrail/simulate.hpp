#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "crfrail/dataset.hpp"
#include "crfrail/frailty.hpp"
#include "crfrail/rng.hpp"
#include "json.hpp"

namespace crfrail {

// Clustered competing-risks data under the additive gamma frailty model with
// Weibull baselines Lambda_j0(t) = (t / scale_j)^shape_j.
struct SimConfig {
    int K = 3;
    int J = 3;
    int n_per_cluster = 20;
    double nu0 = 1.5;
    Eigen::VectorXd nu;
    Eigen::VectorXd weibull_scale;
    Eigen::VectorXd weibull_shape;
    double censoring_rate = 0.5;  // exponential; 0 disables censoring
    std::vector<Eigen::VectorXd> beta;  // J vectors over (age, tstage, nstage)
    bool frailty = true;                // false fixes every W_kj at 1
    std::uint64_t seed = 1;

    static const std::vector<std::string>& covariate_names();
    void validate() const;
};

// "paper-sec3": 3 levels x 20 subjects, the published parameter set.
// "consistency": the same model at 60 levels x 20 subjects.
SimConfig preset(const std::string& name);

// K x J matrix of W_kj = (Z_k0 + Z_kj) / (nu0 + nu_j).
Eigen::MatrixXd draw_frailties(const SimConfig& config, Rng& rng);

// `frailties`, when given, receives the K x J matrix used for the draw.
CompetingRisksDataset simulate_dataset(const SimConfig& config, Rng& rng,
                                       Eigen::MatrixXd* frailties = nullptr);

// Scenario files: one `key = value` per line, `#` comments; vector values are
// comma separated. Keys: K, J, n_per_cluster, nu0, nu, weibull_scale,
// weibull_shape, censoring_rate, beta1..betaJ, frailty, seed.
SimConfig parse_scenario(const std::string& text);
SimConfig read_scenario(const std::filesystem::path& path);
std::string write_scenario(const SimConfig& config);

// Data with planted biomarker cutpoints. Each gene is standard normal; subjects
// at or above the gene's `percentile` quantile have cause-1 hazard multiplied by
// `hazard_ratio`. Subjects below it optionally carry a per-subject gamma frailty
// of variance `frailty_variance_below` on cause 1.
struct PlantedGene {
    std::string name;
    double percentile = 0.6;
    double hazard_ratio = 2.0;
    double frailty_variance_below = 0.0;
};

struct PlantedConfig {
    int n = 500;
    int J = 2;
    std::vector<PlantedGene> genes;
    double cause1_rate = 0.1;
    double competing_rate = 0.02;  // per other cause
    double censoring_rate = 0.0;
    double age_effect = 0.01;  // cause-1 log hazard per year of age
};

CompetingRisksDataset simulate_planted(const PlantedConfig& config, Rng& rng);

// ---------------------------------------------------------------------------
// Replicate harness

struct Estimate {
    std::string name;
    double value = 0.0;
    double lower = std::numeric_limits<double>::quiet_NaN();
    double upper = std::numeric_limits<double>::quiet_NaN();
};

struct NamedEstimator {
    std::string name;
    std::function<std::vector<Estimate>(const CompetingRisksDataset&)> fit;
};

// beta<j>.<covariate>, xi<j>, rho<j1><j2> under the generating model.
std::vector<std::pair<std::string, double>> true_parameters(const SimConfig& config);

NamedEstimator correlated_estimator(const CorrelatedFrailtyOptions& options = {});
NamedEstimator independent_estimator(const SharedFrailtyOptions& options = {});

struct ParameterSummary {
    std::string estimator;
    std::string parameter;
    EmpiricalMetrics metrics;
    double coverage = std::numeric_limits<double>::quiet_NaN();
};

struct ReplicateSummary {
    int replicates = 0;
    std::uint64_t seed = 0;
    std::vector<ParameterSummary> rows;
    std::map<std::string, int> failures;  // per estimator
    std::map<std::string, std::vector<std::string>> failure_messages;
    // estimator -> parameter -> per-replicate estimates of successful fits
    std::map<std::string, std::map<std::string, std::vector<double>>> estimates;
};

// Replicate r simulates from substream r of config.seed; every estimator sees the
// same dataset. Failed fits are counted per estimator and excluded.
ReplicateSummary replicate_study(const SimConfig& config, int replicates,
                                 std::span<const NamedEstimator> estimators, unsigned threads = 0);

std::string summary_csv(const ReplicateSummary& summary);
nlohmann::json to_json(const ReplicateSummary& summary);

}  // namespace crfrail
