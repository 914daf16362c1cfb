#include "crfrail/pcombine.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "crfrail/error.hpp"
#include "crfrail/parallel.hpp"
#include "crfrail/rng.hpp"

namespace crfrail {

namespace {

constexpr std::uint64_t kBlock = 4096;

double transform(double p, CombinerKind kind) {
    switch (kind) {
        case CombinerKind::Fisher: return std::log(p);
        case CombinerKind::Pearson: return -std::log1p(-p);
        case CombinerKind::MudholkarGeorge: return std::log(p) - std::log1p(-p);
        case CombinerKind::Edgington: return p;
        case CombinerKind::Tippett: return p;
    }
    return p;
}

// Fisher, Pearson and Mudholkar-George require p strictly inside (0, 1).
bool open_interval_only(CombinerKind kind) {
    return kind == CombinerKind::Fisher || kind == CombinerKind::Pearson ||
           kind == CombinerKind::MudholkarGeorge;
}

double statistic_unchecked(std::span<const double> p, CombinerKind kind) {
    if (kind == CombinerKind::Tippett) return *std::min_element(p.begin(), p.end());
    double y = 0.0;
    for (double v : p) y += transform(v, kind);
    return y;
}

}  // namespace

const char* to_string(CombinerKind kind) {
    switch (kind) {
        case CombinerKind::Fisher: return "fisher";
        case CombinerKind::Pearson: return "pearson";
        case CombinerKind::MudholkarGeorge: return "mudholkar-george";
        case CombinerKind::Edgington: return "edgington";
        case CombinerKind::Tippett: return "tippett";
    }
    return "?";
}

CombinerKind parse_combiner(const std::string& text) {
    for (auto k : {CombinerKind::Fisher, CombinerKind::Pearson, CombinerKind::MudholkarGeorge,
                   CombinerKind::Edgington, CombinerKind::Tippett})
        if (text == to_string(k)) return k;
    if (text == "logit" || text == "mudholkar") return CombinerKind::MudholkarGeorge;
    throw DomainError("unknown combiner '" + text + "'");
}

bool small_is_significant(CombinerKind kind) noexcept { return kind != CombinerKind::Pearson; }

double combine_statistic(std::span<const double> pvalues, CombinerKind kind) {
    if (pvalues.empty()) throw DomainError("no p-values to combine");
    for (double p : pvalues) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0)
            throw DomainError("p-values must lie in [0, 1]");
        if ((p == 0.0 || p == 1.0) && open_interval_only(kind))
            throw DomainError(std::string("p-value ") + (p == 0.0 ? "0" : "1") +
                              " is singular for the " + to_string(kind) +
                              " statistic; clamp explicitly before combining");
    }
    return statistic_unchecked(pvalues, kind);
}

MonteCarloResult monte_carlo_pvalue(std::span<const double> pvalues, CombinerKind kind,
                                    const MonteCarloConfig& config) {
    if (config.M < 1) throw DomainError("Monte-Carlo size must be at least 1");
    MonteCarloResult out;
    out.statistic = combine_statistic(pvalues, kind);
    out.M = config.M;
    const std::size_t n = pvalues.size();
    const bool small = small_is_significant(kind);
    const double y0 = out.statistic;

    const std::uint64_t blocks = (config.M + kBlock - 1) / kBlock;
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(blocks), 0);
    parallel_for(
        counts.size(),
        [&](std::size_t b) {
            Rng rng = make_substream(config.seed, b);
            const std::uint64_t begin = b * kBlock;
            const std::uint64_t end = std::min(config.M, begin + kBlock);
            std::vector<double> u(n);
            std::uint64_t c = 0;
            for (std::uint64_t r = begin; r < end; ++r) {
                for (auto& v : u) v = open_uniform(rng);
                const double y = statistic_unchecked(u, kind);
                if (small ? y <= y0 : y >= y0) ++c;
            }
            counts[b] = c;
        },
        config.threads);
    for (auto c : counts) out.count += c;
    out.p_value = (1.0 + static_cast<double>(out.count)) / (static_cast<double>(config.M) + 1.0);
    out.proportion = static_cast<double>(out.count) / static_cast<double>(config.M);
    return out;
}

double fisher_analytic(std::span<const double> pvalues) {
    const double y = combine_statistic(pvalues, CombinerKind::Fisher);
    // chi2_{2n} upper tail at -2y equals Q(n, -y).
    return boost::math::gamma_q(static_cast<double>(pvalues.size()), -y);
}

nlohmann::json to_json(const MonteCarloResult& result) {
    return {{"statistic", result.statistic},
            {"p_mc", result.p_value},
            {"p_mc_uncorrected", result.proportion},
            {"exceedances", result.count},
            {"M", result.M}};
}

}  // namespace crfrail
