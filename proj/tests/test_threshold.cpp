#include "doctest.h"

#include <boost/math/distributions/normal.hpp>

#include <random>

#include "crfrail/error.hpp"
#include "crfrail/rng.hpp"
#include "crfrail/simulate.hpp"
#include "crfrail/threshold.hpp"
#include "oracles.hpp"

using namespace crfrail;

namespace {

CompetingRisksDataset planted(std::uint64_t seed, std::vector<PlantedGene> genes, int n = 500) {
    PlantedConfig pc;
    pc.n = n;
    pc.genes = std::move(genes);
    Rng rng(seed);
    return simulate_planted(pc, rng);
}

ThresholdModelConfig coarse(int points = 19) {
    ThresholdModelConfig c;
    c.covariates = {"age"};
    c.grid.points = points;
    c.threads = 1;
    return c;
}

}  // namespace

TEST_CASE("scan: planted cutpoint recovered on one dataset") {
    const auto data = planted(1, {{"G", 0.6, 2.0, 0.0}});
    const auto scan = scan_single_gene(data, "G", ThresholdCriterion::MinP, coarse(99));
    boost::math::normal standard;
    const double position = 100.0 * boost::math::cdf(standard, scan.best_cutoff());
    CHECK(std::abs(position - 60.0) <= 5.0);
    CHECK(scan.best == scan.best_by_p);
    CHECK(scan.cutoffs.size() + scan.excluded.size() == 99);
    CHECK(scan.tests >= scan.cutoffs.size());
    CHECK(scan.cutoffs.size() == scan.p_values.size());
    CHECK(std::is_sorted(scan.cutoffs.begin(), scan.cutoffs.end()));
}

TEST_CASE("scan: admissibility is enforced and reported") {
    const auto data = planted(2, {{"G", 0.6, 2.0, 0.0}});
    auto config = coarse(99);
    config.min_fraction = 0.25;
    const auto scan = scan_single_gene(data, "G", ThresholdCriterion::MinP, config);
    const auto& g = data.gene("G");
    for (double c : scan.cutoffs) {
        const auto upper = std::count_if(g.begin(), g.end(), [&](double x) { return x >= c; });
        CHECK(upper >= 125);
        CHECK(static_cast<long>(g.size()) - upper >= 125);
    }
    CHECK(scan.excluded.size() >= 40);
    for (const auto& e : scan.excluded) CHECK_FALSE(e.reason.empty());

    config.min_fraction = 0.6;
    CHECK_THROWS_AS(scan_single_gene(data, "G", ThresholdCriterion::MinP, config), DomainError);
}

TEST_CASE("scan: ties go to the smallest cutoff") {
    // A gap in the gene values makes every explicit cutoff produce the same split.
    auto data = planted(3, {{"G", 0.6, 2.0, 0.0}});
    auto& g = data.genes["G"];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = i < 250 ? static_cast<double>(i) : 1000.0 + i;
    auto config = coarse();
    config.explicit_grids["G"] = {900.0, 600.0, 700.0};
    const auto scan = scan_single_gene(data, "G", ThresholdCriterion::MinP, config);
    REQUIRE(scan.cutoffs.size() == 3);
    CHECK(scan.p_values[0] == scan.p_values[2]);
    CHECK(scan.best_cutoff() == 600.0);
}

TEST_CASE("scan: monotone transform keeps the selected percentile rank") {
    const auto data = planted(4, {{"G", 0.4, 2.0, 0.0}});
    auto transformed = data;
    for (auto& v : transformed.genes["G"]) v = std::exp(2.0 * v) + 3.0;
    const auto a = scan_single_gene(data, "G", ThresholdCriterion::MinP, coarse());
    const auto b = scan_single_gene(transformed, "G", ThresholdCriterion::MinP, coarse());
    CHECK(a.best == b.best);
    CHECK(a.percentiles[a.best] == b.percentiles[b.best]);
    CHECK(a.p_values == b.p_values);
}

TEST_CASE("scan: deterministic across thread counts") {
    const auto data = planted(5, {{"G", 0.5, 1.8, 0.0}});
    auto one = coarse(), many = coarse();
    many.threads = 4;
    CHECK(to_json(scan_single_gene(data, "G", ThresholdCriterion::MinP, one)).dump() ==
          to_json(scan_single_gene(data, "G", ThresholdCriterion::MinP, many)).dump());
}

TEST_CASE("scan: combined-p criterion runs and reports per-cutoff values") {
    const auto data = planted(6, {{"G", 0.6, 2.0, 0.0}});
    auto config = coarse(9);
    config.monte_carlo.M = 2000;
    const auto scan = scan_single_gene(data, "G", ThresholdCriterion::CombinedP, config);
    CHECK(scan.criterion == ThresholdCriterion::CombinedP);
    for (double p : scan.p_values) CHECK((p > 0.0 && p <= 1.0));
}

TEST_CASE("scan: frailty-variance criterion records variances") {
    const auto data = planted(7, {{"G", 0.6, 1.0, 1.0}}, 300);
    const auto scan = scan_single_gene(data, "G", ThresholdCriterion::MaxFrailtyVariance, coarse(4));
    REQUIRE(scan.frailty_variances.has_value());
    CHECK(scan.frailty_variances->size() == scan.cutoffs.size());
    REQUIRE(scan.best_by_variance.has_value());
    const auto& v = *scan.frailty_variances;
    CHECK(v[scan.best] == *std::max_element(v.begin(), v.end()));
}

TEST_CASE("stepwise: G = 1 equals the min-p scan") {
    const auto data = planted(8, {{"G", 0.6, 2.0, 0.0}});
    const std::vector<std::string> genes{"G"};
    const auto step = stepwise_multi_gene(data, genes, QuartileStart::Q2, coarse());
    const auto scan = scan_single_gene(data, "G", ThresholdCriterion::MinP, coarse());
    REQUIRE(step.cutoffs.size() == 1);
    CHECK(step.cutoffs[0] == scan.best_cutoff());
}

TEST_CASE("stepwise: single-point grids force the outcome") {
    const auto data = planted(9, {{"A", 0.5, 1.5, 0.0}, {"B", 0.5, 1.5, 0.0}});
    auto config = coarse();
    config.explicit_grids["A"] = {0.1};
    config.explicit_grids["B"] = {-0.2};
    const std::vector<std::string> genes{"A", "B"};
    const auto step = stepwise_multi_gene(data, genes, QuartileStart::Q1, config);
    CHECK(step.cutoffs == std::vector<double>{0.1, -0.2});
    CHECK(step.p_values.size() == 2);
}

TEST_CASE("stepwise: two planted genes recovered") {
    const auto data = planted(10, {{"A", 0.3, 2.2, 0.0}, {"B", 0.7, 2.2, 0.0}}, 800);
    const std::vector<std::string> genes{"A", "B"};
    const auto step = stepwise_multi_gene(data, genes, QuartileStart::Q2, coarse(99));
    boost::math::normal standard;
    CHECK(std::abs(100.0 * boost::math::cdf(standard, step.cutoffs[0]) - 30.0) <= 5.0);
    CHECK(std::abs(100.0 * boost::math::cdf(standard, step.cutoffs[1]) - 70.0) <= 5.0);
    const auto again = stepwise_multi_gene(data, genes, QuartileStart::Q2, coarse(99));
    CHECK(to_json(again).dump() == to_json(step).dump());
}

TEST_CASE("all orderings: Table 5 shape, consistency report, budget") {
    const auto data = planted(11, {{"A", 0.6, 2.5, 0.0}, {"B", 0.5, 1.0, 0.0}, {"C", 0.5, 1.0, 0.0}, {"D", 0.5, 1.0, 0.0}}, 300);
    const std::vector<std::string> genes{"A", "B", "C", "D"};
    const std::vector<QuartileStart> starts{QuartileStart::Q1, QuartileStart::Q2, QuartileStart::Q3};
    const auto report = all_orderings(data, genes, starts, coarse(9));
    CHECK(report.rows.size() == 72);
    CHECK(report.complete);
    for (const auto& row : report.rows) CHECK(row.cutoffs.size() == 4);
    CHECK(report.distinct_cutoffs.at("A").size() == 1);

    try {
        all_orderings(data, genes, starts, coarse(9), 10);
        FAIL("expected budget error");
    } catch (const OrderingsBudgetError& e) {
        CHECK(e.partial().rows.size() == 10);
        CHECK_FALSE(e.partial().complete);
    }
}

TEST_CASE("partition validation") {
    const auto data = planted(12, {{"G", 0.5, 1.0, 1.5}}, 600);
    const std::vector<std::pair<std::string, double>> cut{{"G", 0.0}};
    const auto rows = validate_partitions(data, cut, FrailtyDistribution::Gamma, coarse());
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].lower_fvar.has_value());
    REQUIRE(rows[0].upper_fvar.has_value());
    CHECK(*rows[0].lower_fvar > *rows[0].upper_fvar);

    const auto lognormal = validate_partitions(data, cut, FrailtyDistribution::LogNormal, coarse());
    CHECK(lognormal[0].lower_fvar.has_value());

    // An arm without events of the cause is reported, not fitted.
    auto censored = data;
    const auto& g = censored.gene("G");
    for (std::size_t i = 0; i < censored.size(); ++i)
        if (g[i] >= 1.0 && censored.records[i].status == 1) censored.records[i].status = 0;
    const auto undefined = validate_partitions(censored, {{"G", 1.0}}, FrailtyDistribution::Gamma, coarse());
    CHECK_FALSE(undefined[0].upper_fvar.has_value());
    CHECK_FALSE(undefined[0].note.empty());
}

TEST_CASE("partition validation: identical arms give equal variances") {
    auto half = planted(13, {{"G", 0.5, 1.0, 0.8}}, 200);
    CompetingRisksDataset doubled = half;
    doubled.genes["G"].assign(half.size(), -1.0);
    for (const auto& r : half.records) {
        auto copy = r;
        copy.id += "b";
        doubled.records.push_back(copy);
    }
    doubled.genes["G"].resize(doubled.size(), 1.0);
    const auto rows = validate_partitions(doubled, {{"G", 0.0}}, FrailtyDistribution::Gamma, coarse());
    REQUIRE(rows[0].lower_fvar.has_value());
    CHECK(*rows[0].lower_fvar == doctest::Approx(*rows[0].upper_fvar).epsilon(1e-9));
}

TEST_CASE("spearman") {
    const std::vector<double> p{0.1, 0.5, 0.3, 0.9, 0.7};
    std::vector<double> v;
    for (double x : p) v.push_back(std::exp(-3.0 * x));
    CHECK(spearman(p, v) == doctest::Approx(-1.0));
    CHECK(spearman(std::vector<double>{1, 2, 2, 3}, std::vector<double>{1, 2, 2, 3}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DomainError);

    // Independent sequences: permutation null, |r| < 3 / sqrt(n - 1) on nearly all draws.
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    int outside = 0;
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> a(60), b(60);
        for (auto& x : a) x = z(rng);
        for (auto& x : b) x = z(rng);
        if (std::abs(spearman(a, b)) > 3.0 / std::sqrt(59.0)) ++outside;
    }
    CHECK(outside <= 3);
}
