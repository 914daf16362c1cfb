#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crfrail/step_function.hpp"

namespace crfrail {

// One subject. status 0 = censored, j in 1..J = failure from cause j.
struct SurvivalRecord {
    std::string id;
    double time = 0.0;
    int status = 0;
    std::vector<double> covariates;
    std::optional<int> cluster;
};

struct CompetingRisksDataset {
    std::vector<SurvivalRecord> records;
    int num_causes = 1;
    std::vector<std::string> covariate_names;
    std::map<std::string, std::vector<double>> genes;

    std::size_t size() const noexcept { return records.size(); }
    bool has_clusters() const;
    // Number of clusters K; requires every record to carry a label.
    int num_clusters() const;

    Eigen::VectorXd times() const;
    Eigen::VectorXi statuses() const;
    Eigen::VectorXi clusters() const;
    // n x p matrix of the named covariates (all of them when `names` is empty).
    Eigen::MatrixXd covariate_matrix(std::span<const std::string> names = {}) const;
    std::size_t covariate_index(const std::string& name) const;
    const std::vector<double>& gene(const std::string& name) const;
    std::size_t event_count(int cause) const;

    // Throws ValidationError when an invariant is violated.
    void validate() const;
};

// Column mapping for CSV ingestion.
struct CsvSchema {
    std::string time_col;
    std::string status_col;
    std::vector<std::string> covariates;
    std::vector<std::string> genes;
    std::optional<std::string> cluster_col;
    std::optional<std::string> id_col;
    std::optional<int> num_causes;  // declared J; inferred from data when absent
};

CompetingRisksDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);
// Parses CSV text; `load_csv` reads the file and delegates here.
CompetingRisksDataset parse_csv(const std::string& text, const CsvSchema& schema);
// Writes columns id,time,status,<covariates>,<genes>[,cluster] using shortest
// round-trip decimal formatting. The schema returned reads the file back.
CsvSchema save_csv(const CompetingRisksDataset& data, const std::filesystem::path& path);

// 0 where value < cutoff, 1 where value >= cutoff.
std::vector<int> dichotomize(std::span<const double> values, double cutoff);

// Linear interpolation between order statistics (sample quantile type 7).
double quantile(std::span<const double> values, double probability);

enum class GridKind { Percentile, EqualSpacing };

struct GridSpec {
    GridKind kind = GridKind::Percentile;
    int points = 99;  // interior points; percentile grid uses 1..points of points+1
};

// Candidate cutoffs. Percentile: type-7 quantiles at k/(points+1), k = 1..points.
// EqualSpacing: min + k (max - min)/(points+1). Errors on constant input.
std::vector<double> cutoff_grid(std::span<const double> values, const GridSpec& grid = {});

// All-cause Kaplan-Meier survival, breakpoints at distinct event times.
StepFunction kaplan_meier(const CompetingRisksDataset& data);

// Aalen-Johansen cumulative incidence of `cause`, evaluated on the same
// breakpoints as `kaplan_meier`.
StepFunction cumulative_incidence(const CompetingRisksDataset& data, int cause);

// Fitted cause-specific PH model reduced to what cluster loads need.
struct CauseModel {
    Eigen::VectorXd linear_predictor;  // beta_j' x_i per record
    StepFunction cumulative_hazard;    // baseline Lambda_j0
};

struct ClusterSummary {
    int cluster = 0;
    int subjects = 0;
    Eigen::VectorXi events;  // d_kj, length J
    Eigen::VectorXd load;    // H_kj = sum_i Lambda_j0(t_ki) exp(beta_j' x_ki), length J
};

// One summary per cluster 1..K. `models` holds one entry per cause.
std::vector<ClusterSummary> cluster_summaries(const CompetingRisksDataset& data,
                                              std::span<const CauseModel> models);

}  // namespace crfrail
