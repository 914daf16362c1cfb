#include "doctest.h"

#include <boost/math/distributions/normal.hpp>

#include <random>

#include "crfrail/coxph.hpp"
#include "crfrail/error.hpp"
#include "crfrail/simulate.hpp"
#include "oracles.hpp"

using namespace crfrail;

namespace {

// Sample variance and correlation with their delta-method standard errors
// estimated from the sample's own fourth moments.
struct MomentCheck {
    double variance, variance_se, correlation, correlation_se;
};

MomentCheck sample_moments(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double n = static_cast<double>(a.size());
    const Eigen::ArrayXd da = a.array() - a.mean(), db = b.array() - b.mean();
    const double va = da.square().mean(), vb = db.square().mean(), cab = (da * db).mean();
    MomentCheck m;
    m.variance = va * n / (n - 1);
    m.variance_se = std::sqrt(((da.square() - va).square()).mean() / n);
    m.correlation = cab / std::sqrt(va * vb);
    // Large-sample SE of a correlation under non-normality is not closed form;
    // use the bivariate-normal approximation inflated by the kurtosis ratio.
    const double kurt = (da.pow(4).mean() / (va * va) + db.pow(4).mean() / (vb * vb)) / 6.0;
    m.correlation_se = (1 - m.correlation * m.correlation) / std::sqrt(n) * std::max(1.0, std::sqrt(kurt));
    return m;
}

}  // namespace

TEST_CASE("presets and validation") {
    const auto p = preset("paper-sec3");
    CHECK(p.K == 3);
    CHECK(p.n_per_cluster == 20);
    CHECK(p.J == 3);
    CHECK(p.weibull_scale(1) == 5.2);
    CHECK(p.nu(2) == 3.0);
    CHECK(p.beta[0](2) == 0.5);
    CHECK(preset("consistency").K == 60);
    CHECK_THROWS(preset("nope"));
    SimConfig bad = p;
    bad.nu0 = -1.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("scenario files round trip") {
    auto c = preset("paper-sec3");
    c.seed = 123;
    c.censoring_rate = 0.25;
    const auto back = parse_scenario(write_scenario(c));
    CHECK(back.K == c.K);
    CHECK(back.seed == 123);
    CHECK(back.censoring_rate == 0.25);
    CHECK(back.nu == c.nu);
    CHECK(back.beta[2] == c.beta[2]);
    CHECK(parse_scenario("# comment\nK = 4\n").K == 4);
    CHECK_THROWS(parse_scenario("bogus_key = 1\n"));
}

TEST_CASE("frailty draws: moments within Monte-Carlo error, determinism") {
    SimConfig c = preset("paper-sec3");
    c.K = 100'000;
    Rng rng(77);
    const Eigen::MatrixXd w = draw_frailties(c, rng);
    for (int j = 0; j < 3; ++j) {
        const double xi = 1.0 / (c.nu0 + c.nu(j));
        CHECK(std::abs(w.col(j).mean() - 1.0) <= 4.0 * std::sqrt(xi / c.K));
        const auto m = sample_moments(w.col(j), w.col((j + 1) % 3));
        CHECK(std::abs(m.variance - xi) <= 3.0 * m.variance_se);
        const int k = (j + 1) % 3;
        const double rho = c.nu0 * std::sqrt(xi / (c.nu0 + c.nu(k)));
        CHECK(std::abs(m.correlation - rho) <= 3.0 * m.correlation_se);
    }
    Rng again(77);
    CHECK(draw_frailties(c, again) == w);
}

TEST_CASE("no frailty, no covariate effect, unit shape: exponential times") {
    SimConfig c = preset("paper-sec3");
    c.J = 1;
    c.K = 1;
    c.n_per_cluster = 10'000;
    c.nu = Eigen::VectorXd::Constant(1, 2.0);
    c.weibull_scale = Eigen::VectorXd::Constant(1, 3.0);
    c.weibull_shape = Eigen::VectorXd::Constant(1, 1.0);
    c.beta = {Eigen::Vector3d::Zero()};
    c.frailty = false;
    c.censoring_rate = 0.0;
    Rng rng(12);
    const auto data = simulate_dataset(c, rng);
    std::vector<double> t;
    for (const auto& r : data.records) t.push_back(r.time);
    const double d = oracle::ks_statistic(t, [](double x) { return 1.0 - std::exp(-x / 3.0); });
    CHECK(d < oracle::ks_critical_001(t.size()));
}

TEST_CASE("Weibull median latent time") {
    SimConfig c = preset("paper-sec3");
    c.J = 1;
    c.K = 1;
    c.n_per_cluster = 20'000;
    c.nu = Eigen::VectorXd::Constant(1, 2.0);
    c.weibull_scale = Eigen::VectorXd::Constant(1, 4.8);
    c.weibull_shape = Eigen::VectorXd::Constant(1, 1.01);
    c.beta = {Eigen::Vector3d::Zero()};
    c.frailty = false;
    c.censoring_rate = 0.0;
    Rng rng(13);
    const auto data = simulate_dataset(c, rng);
    std::vector<double> t;
    for (const auto& r : data.records) t.push_back(r.time);
    std::nth_element(t.begin(), t.begin() + t.size() / 2, t.end());
    const double median = 4.8 * std::pow(std::log(2.0), 1.0 / 1.01);
    CHECK(median == doctest::Approx(3.34).epsilon(0.002));
    // SE of a sample median: 1 / (2 f(m) sqrt(n)).
    const double k = 1.01, s = 4.8;
    const double density = (k / s) * std::pow(median / s, k - 1) * 0.5;
    CHECK(std::abs(t[t.size() / 2] - median) <= 3.0 / (2.0 * density * std::sqrt(20'000.0)));
}

TEST_CASE("heavy censoring censors everything") {
    SimConfig c = preset("paper-sec3");
    c.censoring_rate = 1e12;
    Rng rng(2);
    for (const auto& r : simulate_dataset(c, rng).records) CHECK(r.status == 0);
}

TEST_CASE("event shares respond to the Weibull scale") {
    double previous = 0.0;
    for (double scale : {8.0, 5.0, 2.0}) {
        SimConfig c = preset("consistency");
        c.weibull_scale(0) = scale;
        Rng rng(4);
        const auto data = simulate_dataset(c, rng);
        const double share = static_cast<double>(data.event_count(1)) / static_cast<double>(data.size());
        CHECK(share > previous);
        previous = share;
    }
}

TEST_CASE("latent minimum construction: cause-specific fit recovers beta") {
    SimConfig c = preset("paper-sec3");
    c.K = 1;
    c.n_per_cluster = 2000;
    c.frailty = false;
    c.weibull_shape = Eigen::Vector3d::Ones();
    Rng rng(99);
    const auto data = simulate_dataset(c, rng);
    for (int j = 1; j <= 3; ++j) {
        const auto fit = fit_cox(data, j, data.covariate_names);
        for (int p = 0; p < 3; ++p)
            CHECK(std::abs(fit.beta(p) - c.beta[static_cast<std::size_t>(j - 1)](p)) < 3.0 * fit.standard_errors(p));
    }
}

TEST_CASE("planted generator: cutpoint and cause mix") {
    PlantedConfig pc;
    pc.genes = {{"G", 0.6, 2.0, 0.0}};
    Rng rng(6);
    const auto data = simulate_planted(pc, rng);
    CHECK(data.size() == 500);
    CHECK(data.num_causes == 2);
    CHECK(data.gene("G").size() == 500);
    CHECK(data.event_count(1) > data.event_count(2));
}

TEST_CASE("replicate study: degenerate estimator, identity, determinism") {
    SimConfig c = preset("paper-sec3");
    c.seed = 7;
    const auto truth = true_parameters(c);
    NamedEstimator oracle_estimator{"truth", [&](const CompetingRisksDataset&) {
                                        std::vector<Estimate> out;
                                        for (const auto& [name, value] : truth) out.push_back({name, value, value, value});
                                        return out;
                                    }};
    const auto exact = replicate_study(c, 5, std::vector<NamedEstimator>{oracle_estimator}, 2);
    for (const auto& row : exact.rows) {
        CHECK(row.metrics.bias == 0.0);
        CHECK(row.metrics.empse == 0.0);
        CHECK(row.metrics.rmse == 0.0);
    }

    const auto a = replicate_study(c, 6, std::vector<NamedEstimator>{correlated_estimator(), independent_estimator()}, 1);
    const auto b = replicate_study(c, 6, std::vector<NamedEstimator>{correlated_estimator(), independent_estimator()}, 3);
    CHECK(summary_csv(a) == summary_csv(b));
    CHECK(to_json(a).dump() == to_json(b).dump());
    for (const auto& row : a.rows) {
        const auto& m = row.metrics;
        if (m.count < 2) continue;
        const double r = static_cast<double>(m.count);
        CHECK(std::abs(m.rmse * m.rmse - (m.bias * m.bias + m.empse * m.empse * (r - 1) / r)) < 1e-10);
    }
    // Failures are counted, never dropped silently.
    for (const auto& f : a.failures) CHECK(f.second <= 6);
    CHECK_THROWS(replicate_study(c, 1, std::vector<NamedEstimator>{oracle_estimator}));
}
