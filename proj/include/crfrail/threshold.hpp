#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crfrail/coxph.hpp"
#include "crfrail/dataset.hpp"
#include "crfrail/error.hpp"
#include "crfrail/frailty.hpp"
#include "crfrail/pcombine.hpp"
#include "json.hpp"

namespace crfrail {

// MinP: Wald p of the indicator in a cause-specific Cox model.
// MaxFrailtyVariance / MinFrailtyVariance: frailty variance of the cause of
// interest in a correlated-frailty fit whose two clusters are the arms.
// CombinedP: the indicator's per-cause p-values merged by a combiner.
enum class ThresholdCriterion { MinP, MaxFrailtyVariance, MinFrailtyVariance, CombinedP };

const char* to_string(ThresholdCriterion c);
ThresholdCriterion parse_criterion(const std::string& text);

struct ThresholdModelConfig {
    std::vector<std::string> covariates;  // prognostic covariates; empty = all
    int cause = 1;                        // cause of interest
    GridSpec grid;
    // Per-gene candidate cutoffs that replace the generated grid.
    std::map<std::string, std::vector<double>> explicit_grids;
    double min_fraction = 0.10;  // of n, per arm
    int min_events = 1;          // of `cause`, per arm
    FitOptions cox;
    CorrelatedFrailtyOptions frailty;
    CombinerKind combiner = CombinerKind::Fisher;
    MonteCarloConfig monte_carlo{10'000, 1, 1};
    unsigned threads = 0;
};

struct ExcludedCutoff {
    double cutoff = 0.0;
    std::string reason;
};

struct ThresholdScanResult {
    std::string gene;
    ThresholdCriterion criterion = ThresholdCriterion::MinP;
    // Admissible cutoffs, ascending, with aligned criterion values.
    std::vector<double> cutoffs;
    std::vector<double> percentiles;  // % of subjects below each cutoff
    std::vector<double> p_values;
    std::optional<std::vector<double>> frailty_variances;
    std::vector<ExcludedCutoff> excluded;
    std::size_t best_by_p = 0;
    std::optional<std::size_t> best_by_variance;
    std::size_t best = 0;  // index chosen by `criterion`
    std::size_t tests = 0;  // number of cutoffs evaluated (no multiplicity correction)

    double best_cutoff() const { return cutoffs.at(best); }
};

ThresholdScanResult scan_single_gene(const CompetingRisksDataset& data, const std::string& gene,
                                     ThresholdCriterion criterion,
                                     const ThresholdModelConfig& config = {});

enum class QuartileStart { Q1, Q2, Q3 };
const char* to_string(QuartileStart q);
QuartileStart parse_start(const std::string& text);

struct StepwiseResult {
    std::vector<std::string> ordering;
    QuartileStart start = QuartileStart::Q2;
    std::vector<double> cutoffs;  // aligned with `ordering`
    CoxFit final_model;           // all indicators at the selected cutoffs
    std::vector<double> p_values;  // indicator p-values in the final model, aligned with `ordering`
};

// One backward sweep: genes 1..G-1 start at the quartile, gene G is scanned
// with every indicator in one Cox model and fixed at its minimum-p cutoff,
// then G-1, ..., 1.
StepwiseResult stepwise_multi_gene(const CompetingRisksDataset& data,
                                   std::span<const std::string> genes, QuartileStart start,
                                   const ThresholdModelConfig& config = {});

struct OrderingsReport {
    std::vector<StepwiseResult> rows;  // permutation-major in lexicographic gene order, then start
    // gene -> distinct selected cutoffs across rows
    std::map<std::string, std::vector<double>> distinct_cutoffs;
    bool complete = true;
};

// Runs every permutation of `genes` for each start. When the run count would
// exceed `budget`, the rows that fit are computed and DomainError is thrown
// with the partial report attached (see OrderingsBudgetError).
OrderingsReport all_orderings(const CompetingRisksDataset& data, std::span<const std::string> genes,
                              std::span<const QuartileStart> starts,
                              const ThresholdModelConfig& config = {}, std::size_t budget = 1000);

class OrderingsBudgetError : public DomainError {
public:
    OrderingsBudgetError(const std::string& what, OrderingsReport partial)
        : DomainError(what), partial_(std::move(partial)) {}
    const OrderingsReport& partial() const noexcept { return partial_; }

private:
    OrderingsReport partial_;
};

struct PartitionVariance {
    std::string gene;
    double cutoff = 0.0;
    std::optional<double> lower_fvar;
    std::optional<double> upper_fvar;
    std::string note;  // reasons for undefined cells
};

// Splits at each gene's cutoff and fits a per-subject shared frailty model to
// the cause of interest within each arm.
std::vector<PartitionVariance> validate_partitions(const CompetingRisksDataset& data,
                                                  const std::vector<std::pair<std::string, double>>& cutoffs,
                                                  FrailtyDistribution distribution,
                                                  const ThresholdModelConfig& config = {});

// Spearman correlation (average ranks). Throws DomainError when either
// sequence is constant or lengths differ.
double spearman(std::span<const double> a, std::span<const double> b);
double pvalue_variance_correlation(const ThresholdScanResult& scan);

nlohmann::json to_json(const ThresholdScanResult& scan);
nlohmann::json to_json(const StepwiseResult& row);

}  // namespace crfrail
