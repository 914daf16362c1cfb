#include "crfrail/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "crfrail/parallel.hpp"

namespace crfrail {

const char* to_string(ThresholdCriterion c) {
    switch (c) {
        case ThresholdCriterion::MinP: return "min-p";
        case ThresholdCriterion::MaxFrailtyVariance: return "max-fvar";
        case ThresholdCriterion::MinFrailtyVariance: return "min-fvar";
        case ThresholdCriterion::CombinedP: return "combined-p";
    }
    return "?";
}

ThresholdCriterion parse_criterion(const std::string& text) {
    for (auto c : {ThresholdCriterion::MinP, ThresholdCriterion::MaxFrailtyVariance,
                   ThresholdCriterion::MinFrailtyVariance, ThresholdCriterion::CombinedP})
        if (text == to_string(c)) return c;
    throw DomainError("unknown threshold criterion '" + text + "'");
}

const char* to_string(QuartileStart q) {
    switch (q) {
        case QuartileStart::Q1: return "Q1";
        case QuartileStart::Q2: return "Q2";
        case QuartileStart::Q3: return "Q3";
    }
    return "?";
}

QuartileStart parse_start(const std::string& text) {
    if (text == "Q1") return QuartileStart::Q1;
    if (text == "Q2") return QuartileStart::Q2;
    if (text == "Q3") return QuartileStart::Q3;
    throw DomainError("unknown starting quartile '" + text + "' (expected Q1, Q2 or Q3)");
}

namespace {

std::span<const std::string> covariates_of(const CompetingRisksDataset& data,
                                           const ThresholdModelConfig& config) {
    return config.covariates.empty() ? std::span<const std::string>(data.covariate_names)
                                     : std::span<const std::string>(config.covariates);
}

std::vector<double> candidate_cutoffs(const CompetingRisksDataset& data, const std::string& gene,
                                      const ThresholdModelConfig& config) {
    std::vector<double> grid;
    if (auto it = config.explicit_grids.find(gene); it != config.explicit_grids.end()) {
        grid = it->second;
        if (grid.empty()) throw DomainError("empty cutoff grid for gene '" + gene + "'");
        for (double c : grid)
            if (!std::isfinite(c)) throw DomainError("non-finite cutoff for gene '" + gene + "'");
    } else {
        grid = cutoff_grid(data.gene(gene), config.grid);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

Eigen::VectorXd indicator(const std::vector<double>& values, double cutoff) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) z(static_cast<Eigen::Index>(i)) = values[i] >= cutoff ? 1.0 : 0.0;
    return z;
}

// Empty string when both arms are large enough and carry events of the cause.
std::string admissibility(const CompetingRisksDataset& data, const std::vector<double>& values,
                          double cutoff, const ThresholdModelConfig& config) {
    const std::size_t n = values.size();
    const auto min_size = static_cast<std::size_t>(std::ceil(config.min_fraction * static_cast<double>(n) - 1e-9));
    std::size_t upper = 0, lower_events = 0, upper_events = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool up = values[i] >= cutoff;
        upper += up;
        if (data.records[i].status == config.cause) ++(up ? upper_events : lower_events);
    }
    const std::size_t lower = n - upper;
    if (lower < min_size || upper < min_size)
        return "arm sizes " + std::to_string(lower) + "/" + std::to_string(upper) + " below minimum " +
               std::to_string(min_size);
    const auto need = static_cast<std::size_t>(std::max(0, config.min_events));
    if (lower_events < need || upper_events < need)
        return "arm events " + std::to_string(lower_events) + "/" + std::to_string(upper_events) +
               " of cause " + std::to_string(config.cause) + " below minimum " + std::to_string(need);
    return {};
}

double indicator_pvalue(const SurvivalDesign& design, int cause, const FitOptions& options,
                        Eigen::Index column) {
    const CoxFit fit = fit_cox(design, cause, options);
    if (fit.monotone_likelihood) throw NumericalError("monotone likelihood");
    return fit.wald_p_values(column);
}

struct CutoffOutcome {
    bool ok = false;
    double p = std::numeric_limits<double>::quiet_NaN();
    double variance = std::numeric_limits<double>::quiet_NaN();
    std::string reason;
};

double percentile_below(const std::vector<double>& values, double cutoff) {
    const auto below = std::count_if(values.begin(), values.end(), [&](double v) { return v < cutoff; });
    return 100.0 * static_cast<double>(below) / static_cast<double>(values.size());
}

// First index attaining the extreme; ascending cutoffs make this the smallest cutoff.
std::size_t first_extreme(const std::vector<double>& v, bool maximize) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (maximize ? v[i] > v[best] : v[i] < v[best]) best = i;
    return best;
}

}  // namespace

ThresholdScanResult scan_single_gene(const CompetingRisksDataset& data, const std::string& gene,
                                     ThresholdCriterion criterion, const ThresholdModelConfig& config) {
    const auto& values = data.gene(gene);
    if (config.cause < 1 || config.cause > data.num_causes)
        throw DomainError("cause of interest out of range");
    const std::vector<double> grid = candidate_cutoffs(data, gene, config);
    const SurvivalDesign base = make_design(data, covariates_of(data, config));
    const bool wants_variance = criterion == ThresholdCriterion::MaxFrailtyVariance ||
                                criterion == ThresholdCriterion::MinFrailtyVariance;

    std::vector<CutoffOutcome> outcomes(grid.size());
    std::vector<std::size_t> admissible;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        outcomes[c].reason = admissibility(data, values, grid[c], config);
        if (outcomes[c].reason.empty()) admissible.push_back(c);
    }

    parallel_for(
        admissible.size(),
        [&](std::size_t a) {
            const std::size_t c = admissible[a];
            CutoffOutcome& out = outcomes[c];
            try {
                SurvivalDesign design = base;
                const Eigen::VectorXd z = indicator(values, grid[c]);
                append_column(design, gene, z);
                const Eigen::Index col = design.cols() - 1;
                if (criterion == ThresholdCriterion::CombinedP) {
                    std::vector<double> per_cause;
                    for (int j = 1; j <= data.num_causes; ++j)
                        if (data.event_count(j) > 0)
                            per_cause.push_back(indicator_pvalue(design, j, config.cox, col));
                    out.p = monte_carlo_pvalue(per_cause, config.combiner, config.monte_carlo).p_value;
                } else {
                    out.p = indicator_pvalue(design, config.cause, config.cox, col);
                }
                if (wants_variance) {
                    CompetingRisksDataset arms = data;
                    for (std::size_t i = 0; i < arms.records.size(); ++i)
                        arms.records[i].cluster = static_cast<int>(z(static_cast<Eigen::Index>(i))) + 1;
                    CorrelatedFrailtyOptions opts = config.frailty;
                    opts.covariates.assign(base.names.begin(), base.names.end());
                    const auto fit = fit_correlated_frailty(arms, opts);
                    out.variance = fit.moments.variances(config.cause - 1);
                }
                out.ok = true;
            } catch (const Error& e) {
                out.reason = std::string("fit failed (") + e.kind() + "): " + e.what();
            }
        },
        config.threads);

    ThresholdScanResult r;
    r.gene = gene;
    r.criterion = criterion;
    std::vector<double> variances;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        if (!outcomes[c].ok) {
            r.excluded.push_back({grid[c], outcomes[c].reason});
            continue;
        }
        r.cutoffs.push_back(grid[c]);
        r.percentiles.push_back(percentile_below(values, grid[c]));
        r.p_values.push_back(outcomes[c].p);
        variances.push_back(outcomes[c].variance);
    }
    r.tests = admissible.size();
    if (r.cutoffs.empty())
        throw DomainError("no admissible cutoff for gene '" + gene + "' (" + std::to_string(grid.size()) +
                          " candidates excluded)");
    r.best_by_p = first_extreme(r.p_values, false);
    r.best = r.best_by_p;
    if (wants_variance) {
        r.best_by_variance = first_extreme(variances, criterion == ThresholdCriterion::MaxFrailtyVariance);
        r.best = *r.best_by_variance;
        r.frailty_variances = std::move(variances);
    }
    return r;
}

// ---------------------------------------------------------------------------

namespace {

double start_cutoff(const std::vector<double>& values, QuartileStart start) {
    const double prob = start == QuartileStart::Q1 ? 0.25 : start == QuartileStart::Q2 ? 0.5 : 0.75;
    return quantile(values, prob);
}

}  // namespace

StepwiseResult stepwise_multi_gene(const CompetingRisksDataset& data,
                                   std::span<const std::string> genes, QuartileStart start,
                                   const ThresholdModelConfig& config) {
    if (genes.empty()) throw DomainError("stepwise search needs at least one gene");
    const std::size_t G = genes.size();
    std::vector<const std::vector<double>*> values;
    for (const auto& g : genes) values.push_back(&data.gene(g));

    StepwiseResult r;
    r.ordering.assign(genes.begin(), genes.end());
    r.start = start;
    r.cutoffs.resize(G);
    for (std::size_t g = 0; g < G; ++g) r.cutoffs[g] = start_cutoff(*values[g], start);

    const SurvivalDesign base = make_design(data, covariates_of(data, config));
    auto build = [&](const std::vector<double>& cutoffs) {
        SurvivalDesign design = base;
        for (std::size_t g = 0; g < G; ++g) append_column(design, genes[g], indicator(*values[g], cutoffs[g]));
        return design;
    };

    for (std::size_t step = G; step-- > 0;) {
        const std::vector<double> grid = candidate_cutoffs(data, genes[step], config);
        std::vector<double> p(grid.size(), std::numeric_limits<double>::infinity());
        std::vector<char> ok(grid.size(), 0);
        parallel_for(
            grid.size(),
            [&](std::size_t c) {
                if (!admissibility(data, *values[step], grid[c], config).empty()) return;
                std::vector<double> trial = r.cutoffs;
                trial[step] = grid[c];
                try {
                    p[c] = indicator_pvalue(build(trial), config.cause, config.cox,
                                            base.cols() + static_cast<Eigen::Index>(step));
                    ok[c] = 1;
                } catch (const Error&) {
                }
            },
            config.threads);
        std::optional<std::size_t> best;
        for (std::size_t c = 0; c < grid.size(); ++c)
            if (ok[c] && (!best || p[c] < p[*best])) best = c;
        if (!best)
            throw DomainError("no admissible cutoff for gene '" + genes[step] + "' in the stepwise sweep");
        r.cutoffs[step] = grid[*best];
    }

    r.final_model = fit_cox(build(r.cutoffs), config.cause, config.cox);
    for (std::size_t g = 0; g < G; ++g)
        r.p_values.push_back(r.final_model.wald_p_values(base.cols() + static_cast<Eigen::Index>(g)));
    return r;
}

OrderingsReport all_orderings(const CompetingRisksDataset& data, std::span<const std::string> genes,
                              std::span<const QuartileStart> starts, const ThresholdModelConfig& config,
                              std::size_t budget) {
    if (genes.empty() || starts.empty()) throw DomainError("need at least one gene and one start");
    std::vector<std::string> order(genes.begin(), genes.end());
    std::sort(order.begin(), order.end());
    if (std::adjacent_find(order.begin(), order.end()) != order.end())
        throw DomainError("duplicate gene in ordering search");

    std::vector<std::pair<std::vector<std::string>, QuartileStart>> cells;
    do {
        for (auto s : starts) cells.emplace_back(order, s);
    } while (std::next_permutation(order.begin(), order.end()));
    const std::size_t total = cells.size();
    const bool over = total > budget;
    if (over) cells.resize(budget);

    // Cells run one after another; the cutoff scans inside each cell use the workers.
    OrderingsReport report;
    report.rows.reserve(cells.size());
    for (const auto& [ordering, start] : cells)
        report.rows.push_back(stepwise_multi_gene(data, ordering, start, config));
    for (const auto& row : report.rows)
        for (std::size_t g = 0; g < row.ordering.size(); ++g) {
            auto& seen = report.distinct_cutoffs[row.ordering[g]];
            if (std::find(seen.begin(), seen.end(), row.cutoffs[g]) == seen.end()) seen.push_back(row.cutoffs[g]);
        }
    for (auto& [gene, seen] : report.distinct_cutoffs) std::sort(seen.begin(), seen.end());
    if (over) {
        report.complete = false;
        throw OrderingsBudgetError("ordering search needs " + std::to_string(total) +
                                       " runs, budget is " + std::to_string(budget),
                                   std::move(report));
    }
    return report;
}

// ---------------------------------------------------------------------------

namespace {

CompetingRisksDataset subset(const CompetingRisksDataset& data, const std::vector<std::size_t>& rows) {
    CompetingRisksDataset out;
    out.num_causes = data.num_causes;
    out.covariate_names = data.covariate_names;
    for (const auto& [name, v] : data.genes) out.genes[name];
    for (std::size_t i : rows) {
        out.records.push_back(data.records[i]);
        for (const auto& [name, v] : data.genes) out.genes[name].push_back(v[i]);
    }
    return out;
}

}  // namespace

std::vector<PartitionVariance> validate_partitions(const CompetingRisksDataset& data,
                                                  const std::vector<std::pair<std::string, double>>& cutoffs,
                                                  FrailtyDistribution distribution,
                                                  const ThresholdModelConfig& config) {
    std::vector<PartitionVariance> out;
    SharedFrailtyOptions opts;
    opts.cause = config.cause;
    opts.covariates.assign(covariates_of(data, config).begin(), covariates_of(data, config).end());
    opts.cox = config.cox;
    for (const auto& [gene, cutoff] : cutoffs) {
        const auto& values = data.gene(gene);
        PartitionVariance pv;
        pv.gene = gene;
        pv.cutoff = cutoff;
        std::vector<std::size_t> lower, upper;
        for (std::size_t i = 0; i < values.size(); ++i) (values[i] >= cutoff ? upper : lower).push_back(i);
        auto arm = [&](const std::vector<std::size_t>& rows, const char* label) -> std::optional<double> {
            if (rows.size() < 2) {
                pv.note += std::string(pv.note.empty() ? "" : "; ") + label + ": fewer than two subjects";
                return std::nullopt;
            }
            const CompetingRisksDataset part = subset(data, rows);
            if (part.event_count(config.cause) == 0) {
                pv.note += std::string(pv.note.empty() ? "" : "; ") + label + ": no events";
                return std::nullopt;
            }
            Eigen::VectorXi groups(static_cast<Eigen::Index>(rows.size()));
            std::iota(groups.begin(), groups.end(), 1);
            try {
                return fit_shared_frailty(part, distribution, groups, opts).variance;
            } catch (const Error& e) {
                pv.note += std::string(pv.note.empty() ? "" : "; ") + label + ": " + e.what();
                return std::nullopt;
            }
        };
        pv.lower_fvar = arm(lower, "lower");
        pv.upper_fvar = arm(upper, "upper");
        out.push_back(std::move(pv));
    }
    return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DomainError("sequences differ in length");
    if (a.size() < 2) throw DomainError("correlation needs at least two points");
    const auto ra = average_ranks(a), rb = average_ranks(b);
    const Eigen::Map<const Eigen::VectorXd> x(ra.data(), static_cast<Eigen::Index>(ra.size()));
    const Eigen::Map<const Eigen::VectorXd> y(rb.data(), static_cast<Eigen::Index>(rb.size()));
    const Eigen::VectorXd dx = x.array() - x.mean(), dy = y.array() - y.mean();
    const double sx = dx.norm(), sy = dy.norm();
    if (sx == 0.0 || sy == 0.0) throw DomainError("rank correlation undefined for a constant sequence");
    return dx.dot(dy) / (sx * sy);
}

double pvalue_variance_correlation(const ThresholdScanResult& scan) {
    if (!scan.frailty_variances) throw DomainError("scan carries no frailty variances");
    return spearman(scan.p_values, *scan.frailty_variances);
}

nlohmann::json to_json(const ThresholdScanResult& scan) {
    nlohmann::json excluded = nlohmann::json::array();
    for (const auto& e : scan.excluded) excluded.push_back({{"cutoff", e.cutoff}, {"reason", e.reason}});
    nlohmann::json j = {{"gene", scan.gene},
                        {"criterion", to_string(scan.criterion)},
                        {"cutoffs", scan.cutoffs},
                        {"percentiles", scan.percentiles},
                        {"p_values", scan.p_values},
                        {"best_by_p", {{"index", scan.best_by_p}, {"cutoff", scan.cutoffs[scan.best_by_p]}}},
                        {"selected", {{"index", scan.best}, {"cutoff", scan.cutoffs[scan.best]}}},
                        {"tests", scan.tests},
                        {"multiplicity_correction", "none"},
                        {"excluded", excluded}};
    if (scan.frailty_variances) {
        j["frailty_variances"] = *scan.frailty_variances;
        j["best_by_variance"] = {{"index", *scan.best_by_variance},
                                 {"cutoff", scan.cutoffs[*scan.best_by_variance]}};
        try {
            j["pvalue_variance_spearman"] = pvalue_variance_correlation(scan);
        } catch (const DomainError& e) {
            j["pvalue_variance_spearman"] = nullptr;
            j["pvalue_variance_spearman_note"] = e.what();
        }
    }
    return j;
}

nlohmann::json to_json(const StepwiseResult& row) {
    return {{"ordering", row.ordering},
            {"start", to_string(row.start)},
            {"cutoffs", row.cutoffs},
            {"p_values", row.p_values},
            {"final_model", to_json(row.final_model)}};
}

}  // namespace crfrail
