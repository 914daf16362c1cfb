#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "json.hpp"

namespace crfrail {

// Y = sum T(p_i) (Tippett: min p_i).
//   Fisher           T = log p           small Y significant
//   Pearson          T = -log(1 - p)     large Y significant
//   MudholkarGeorge  T = log(p/(1 - p))  small
//   Edgington        T = p               small
//   Tippett          Y = min p           small
enum class CombinerKind { Fisher, Pearson, MudholkarGeorge, Edgington, Tippett };

const char* to_string(CombinerKind kind);
CombinerKind parse_combiner(const std::string& text);
bool small_is_significant(CombinerKind kind) noexcept;

// Throws DomainError for an empty set, non-finite values, or p outside [0, 1].
// Fisher, Pearson and Mudholkar-George also reject 0 and 1. Nothing is clamped.
double combine_statistic(std::span<const double> pvalues, CombinerKind kind);

struct MonteCarloConfig {
    std::uint64_t M = 100'000;
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

struct MonteCarloResult {
    double statistic = 0.0;
    double p_value = 0.0;     // (1 + count) / (M + 1)
    double proportion = 0.0;  // count / M
    std::uint64_t count = 0;  // draws on the significant side of the observed statistic
    std::uint64_t M = 0;
};

// Calibrates Y against M sets of independent uniforms. Draws come from fixed
// blocks with their own substreams, so results do not depend on thread count.
MonteCarloResult monte_carlo_pvalue(std::span<const double> pvalues, CombinerKind kind,
                                    const MonteCarloConfig& config = {});

// P(chi2_{2n} > -2 sum log p_i).
double fisher_analytic(std::span<const double> pvalues);

nlohmann::json to_json(const MonteCarloResult& result);

}  // namespace crfrail
