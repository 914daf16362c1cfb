#include "doctest.h"

#include <random>

#include "crfrail/error.hpp"
#include "crfrail/pcombine.hpp"
#include "oracles.hpp"

using namespace crfrail;

namespace {
const CombinerKind kAll[] = {CombinerKind::Fisher, CombinerKind::Pearson, CombinerKind::MudholkarGeorge,
                             CombinerKind::Edgington, CombinerKind::Tippett};
}

TEST_CASE("statistics: direct formulas") {
    CHECK(combine_statistic(std::vector<double>{0.5, 0.5}, CombinerKind::Fisher) == doctest::Approx(2 * std::log(0.5)));
    CHECK(combine_statistic(std::vector<double>{0.1, 0.2, 0.3}, CombinerKind::Edgington) == doctest::Approx(0.6));
    CHECK(combine_statistic(std::vector<double>{0.4, 0.05, 0.9}, CombinerKind::Tippett) == 0.05);
    CHECK(combine_statistic(std::vector<double>{0.2}, CombinerKind::Pearson) == doctest::Approx(-std::log(0.8)));
    CHECK(combine_statistic(std::vector<double>{0.2}, CombinerKind::MudholkarGeorge) == doctest::Approx(std::log(0.25)));
}

TEST_CASE("statistics: singular and invalid inputs are rejected, not clamped") {
    CHECK_THROWS_AS(combine_statistic(std::vector<double>{1.0, 0.3}, CombinerKind::Fisher), DomainError);
    CHECK_THROWS_AS(combine_statistic(std::vector<double>{0.0}, CombinerKind::Fisher), DomainError);
    CHECK_THROWS_AS(combine_statistic(std::vector<double>{1.0}, CombinerKind::Pearson), DomainError);
    CHECK_THROWS_AS(combine_statistic(std::vector<double>{0.0}, CombinerKind::Pearson), DomainError);
    CHECK(combine_statistic(std::vector<double>{0.0, 1.0}, CombinerKind::Edgington) == 1.0);
    CHECK_THROWS_AS(combine_statistic(std::vector<double>{0.0}, CombinerKind::MudholkarGeorge), DomainError);
    CHECK_THROWS_AS(combine_statistic(std::vector<double>{}, CombinerKind::Edgington), DomainError);
    CHECK_THROWS_AS(combine_statistic(std::vector<double>{std::nan("")}, CombinerKind::Tippett), DomainError);
    CHECK_THROWS_AS(fisher_analytic(std::vector<double>{1.0}), DomainError);
}

TEST_CASE("directions and names") {
    CHECK(small_is_significant(CombinerKind::Fisher));
    CHECK_FALSE(small_is_significant(CombinerKind::Pearson));
    for (auto k : kAll) CHECK(parse_combiner(to_string(k)) == k);
    CHECK_THROWS(parse_combiner("stouffer"));
}

TEST_CASE("Fisher analytic against the chi-square series") {
    CHECK(fisher_analytic(std::vector<double>{0.5}) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(fisher_analytic(std::vector<double>{0.05, 0.05}) == doctest::Approx(0.017475).epsilon(1e-4));
    for (double u : {0.02, 0.1, 0.3, 0.7}) {
        for (int n = 1; n <= 12; ++n) {
            const std::vector<double> p(static_cast<std::size_t>(n), u);
            const double x = -2.0 * n * std::log(u);
            CHECK(oracle::relative_error(fisher_analytic(p), oracle::chi2_even_upper(x, n)) < 1e-12);
        }
    }
    // Decreasing in n for u small enough.
    double previous = 1.0;
    for (int n = 1; n <= 10; ++n) {
        const double v = fisher_analytic(std::vector<double>(static_cast<std::size_t>(n), 0.05));
        CHECK(v < previous);
        previous = v;
    }
}

TEST_CASE("Monte Carlo: identities within binomial error") {
    const std::uint64_t M = 100'000;
    auto within = [&](double mc, double exact) {
        return std::abs(mc - exact) <= 3.0 * std::sqrt(exact * (1 - exact) / static_cast<double>(M)) + 1.0 / M;
    };
    const auto tippett = monte_carlo_pvalue(std::vector<double>{0.3}, CombinerKind::Tippett, {M, 42, 0});
    CHECK(within(tippett.p_value, 0.3));
    const auto fisher = monte_carlo_pvalue(std::vector<double>{0.05, 0.05}, CombinerKind::Fisher, {M, 42, 0});
    CHECK(within(fisher.p_value, 0.017475));
    CHECK(fisher.p_value == doctest::Approx((1.0 + fisher.count) / (M + 1.0)));
    CHECK(fisher.proportion == doctest::Approx(static_cast<double>(fisher.count) / M));
    const std::vector<double> three{0.2, 0.6, 0.08};
    const auto t3 = monte_carlo_pvalue(three, CombinerKind::Tippett, {M, 5, 0});
    CHECK(within(t3.p_value, 1.0 - std::pow(1.0 - 0.08, 3)));
}

TEST_CASE("Monte Carlo: deterministic and independent of thread count") {
    const std::vector<double> p{0.01, 0.4, 0.7, 0.2};
    for (auto k : kAll) {
        const auto a = monte_carlo_pvalue(p, k, {20'000, 9, 1});
        const auto b = monte_carlo_pvalue(p, k, {20'000, 9, 4});
        const auto c = monte_carlo_pvalue(p, k, {20'000, 9, 0});
        CHECK(a.count == b.count);
        CHECK(a.count == c.count);
        CHECK(a.p_value == b.p_value);
    }
}

TEST_CASE("Monte Carlo: monotone in each p-value, per direction") {
    // Moving one p toward the kind's significant side never raises the combined p.
    // For Pearson (large-significant) that side is p -> 1.
    const std::vector<double> base{0.3, 0.5, 0.12};
    for (auto k : kAll) {
        const double reference = monte_carlo_pvalue(base, k, {20'000, 3, 0}).p_value;
        for (std::size_t i = 0; i < base.size(); ++i) {
            auto smaller = base;
            smaller[i] = small_is_significant(k) ? smaller[i] * 0.5 : (1.0 + smaller[i]) / 2.0;
            // Same seed, so the simulated null statistics are identical.
            CHECK(monte_carlo_pvalue(smaller, k, {20'000, 3, 0}).p_value <= reference);
        }
    }
}

TEST_CASE("JSON keys") {
    const auto j = to_json(monte_carlo_pvalue(std::vector<double>{0.2, 0.3}, CombinerKind::Fisher, {100, 1, 1}));
    for (const char* key : {"statistic", "p_mc", "p_mc_uncorrected", "exceedances", "M"}) CHECK(j.contains(key));
}
