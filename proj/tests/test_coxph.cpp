#include "doctest.h"

#include <random>

#include "crfrail/coxph.hpp"
#include "crfrail/error.hpp"
#include "oracles.hpp"

using namespace crfrail;

namespace {

struct Instance {
    SurvivalDesign design;
    std::vector<double> time;
    std::vector<int> status;
    std::vector<std::vector<double>> x;
};

Instance random_instance(std::mt19937_64& rng, int n, int p, int causes, bool ties) {
    std::normal_distribution<double> z;
    std::exponential_distribution<double> e;
    std::uniform_int_distribution<int> s(0, causes);
    Instance in;
    in.design.time.resize(n);
    in.design.status.resize(n);
    in.design.x.resize(n, p);
    for (int c = 0; c < p; ++c) in.design.names.push_back("x" + std::to_string(c));
    for (int i = 0; i < n; ++i) {
        double t = e(rng);
        if (ties) t = std::ceil(t * 5.0) / 5.0;
        in.design.time(i) = t;
        in.design.status(i) = s(rng);
        std::vector<double> row;
        for (int c = 0; c < p; ++c) {
            in.design.x(i, c) = z(rng);
            row.push_back(in.design.x(i, c));
        }
        in.time.push_back(t);
        in.status.push_back(in.design.status(i));
        in.x.push_back(row);
    }
    return in;
}

SurvivalDesign tiny(const std::vector<double>& t, const std::vector<int>& s, const std::vector<double>& x = {}) {
    SurvivalDesign d;
    const auto n = static_cast<Eigen::Index>(t.size());
    d.time = Eigen::Map<const Eigen::VectorXd>(t.data(), n);
    d.status.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) d.status(i) = s[static_cast<std::size_t>(i)];
    if (x.empty()) {
        d.x.resize(n, 0);
    } else {
        d.x = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
        d.names = {"x"};
    }
    return d;
}

}  // namespace

TEST_CASE("partial likelihood: uniform risk set") {
    const auto d = tiny({1.0, 2.0}, {1, 0}, {0.3, -0.2});
    const auto pl = partial_loglik(Eigen::VectorXd::Zero(1), d, 1, Eigen::VectorXd::Ones(2));
    CHECK(pl.value == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("partial likelihood matches explicit sum, gradient and Hessian match finite differences") {
    std::mt19937_64 rng(101);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.5, 2.0);
    for (int rep = 0; rep < 25; ++rep) {
        const auto in = random_instance(rng, 40, 3, 2, rep % 2 == 0);
        Eigen::VectorXd beta(3), offsets(40);
        for (auto& b : beta) b = 0.5 * z(rng);
        for (auto& o : offsets) o = u(rng);
        const std::vector<double> bv(beta.data(), beta.data() + 3), ov(offsets.data(), offsets.data() + 40);
        const int cause = 1 + rep % 2;
        const auto pl = partial_loglik(beta, in.design, cause, offsets);
        CHECK(oracle::relative_error(pl.value, oracle::partial_loglik(in.time, in.status, in.x, bv, cause, ov)) < 1e-12);

        const double h = 1e-5;
        for (int c = 0; c < 3; ++c) {
            Eigen::VectorXd up = beta, down = beta;
            up(c) += h;
            down(c) -= h;
            const auto pu = partial_loglik(up, in.design, cause, offsets);
            const auto pd = partial_loglik(down, in.design, cause, offsets);
            const double fd = (pu.value - pd.value) / (2 * h);
            CHECK(std::abs(fd - pl.gradient(c)) <= 1e-5 * std::max(1.0, std::abs(pl.gradient(c))));
            const Eigen::VectorXd fd_row = (pu.gradient - pd.gradient) / (2 * h);
            for (int r = 0; r < 3; ++r)
                CHECK(std::abs(fd_row(r) - pl.hessian(c, r)) <= 1e-3 * std::max(1.0, std::abs(pl.hessian(c, r))));
        }
    }
}

TEST_CASE("constant covariate has zero gradient") {
    std::mt19937_64 rng(7);
    auto in = random_instance(rng, 30, 2, 1, false);
    in.design.x.col(1).setConstant(2.5);
    const auto pl = partial_loglik(Eigen::Vector2d(0.4, -0.3), in.design, 1, Eigen::VectorXd::Ones(30));
    CHECK(std::abs(pl.gradient(1)) < 1e-12);
}

TEST_CASE("non-finite covariate is rejected") {
    auto d = tiny({1.0, 2.0}, {1, 0}, {0.3, std::nan("")});
    CHECK_THROWS_AS(partial_loglik(Eigen::VectorXd::Zero(1), d, 1, Eigen::VectorXd::Ones(2)), Error);
}

TEST_CASE("null model baseline is Nelson-Aalen") {
    const auto d = tiny({1.0, 2.0, 3.0}, {1, 1, 0});
    const auto fit = fit_cox(d, 1);
    CHECK(fit.baseline(1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(fit.baseline(2.0) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(fit.baseline(0.5) == 0.0);

    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        auto in = random_instance(rng, 25, 0, 2, true);
        if (in.design.status.cwiseEqual(2).count() == 0) continue;
        const auto na = oracle::breslow(in.time, in.status, 2, std::vector<double>(25, 1.0));
        const auto f = fit_cox(in.design, 2);
        REQUIRE(f.baseline.size() == na.size());
        for (std::size_t i = 0; i < na.size(); ++i) {
            CHECK(f.baseline.breakpoints[i] == na[i].first);
            CHECK(f.baseline.values[i] == doctest::Approx(na[i].second).epsilon(1e-14));
        }
    }
}

TEST_CASE("Breslow baseline: risk-set oracle and offset scaling") {
    const auto d = tiny({2.0, 1.0, 2.0, 4.0}, {1, 1, 0, 1}, {0.0, 1.0, -1.0, 0.5});
    const Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 0.7);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(4);
    const auto b = breslow_baseline(beta, d, 1, ones);
    std::vector<double> w;
    for (double x : {0.0, 1.0, -1.0, 0.5}) w.push_back(std::exp(0.7 * x));
    const auto oracle_b = oracle::breslow({2.0, 1.0, 2.0, 4.0}, {1, 1, 0, 1}, 1, w);
    REQUIRE(b.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(b.values[i] == doctest::Approx(oracle_b[i].second).epsilon(1e-14));

    const auto doubled = breslow_baseline(beta, d, 1, Eigen::VectorXd::Constant(4, 2.0));
    for (std::size_t i = 0; i < 3; ++i) CHECK(doubled.values[i] == doctest::Approx(b.values[i] / 2.0).epsilon(1e-14));
}

TEST_CASE("Wald p-values") {
    CHECK(wald_pvalue(0.0, 1.0) == 1.0);
    CHECK(wald_pvalue(1.959963984540054, 1.0) == doctest::Approx(0.05).epsilon(1e-9));
    double previous = 1.0;
    for (double z = 0.5; z < 40.0; z *= 1.5) {
        const double p = wald_pvalue(z, 1.0);
        CHECK(p < previous);
        previous = p;
    }
    CHECK_THROWS_AS(wald_pvalue(1.0, 0.0), DomainError);
}

TEST_CASE("separated covariate raises the monotone-likelihood flag") {
    // Every event has x = 1 and no event has x = 0.
    const auto d = tiny({1, 2, 3, 4, 5, 6}, {1, 1, 1, 0, 0, 0}, {1, 1, 1, 0, 0, 0});
    const auto fit = fit_cox(d, 1);
    CHECK(fit.monotone_likelihood);
}

TEST_CASE("fit errors: no events, collinearity") {
    CHECK_THROWS_AS(fit_cox(tiny({1, 2}, {0, 2}), 1), DomainError);
    std::mt19937_64 rng(5);
    auto in = random_instance(rng, 50, 2, 1, false);
    in.design.x.col(1) = 2.0 * in.design.x.col(0);
    try {
        fit_cox(in.design, 1);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        const std::string what = e.what();
        CHECK(what.find("collinear") != std::string::npos);
        CHECK((what.find(" x0") != std::string::npos || what.find(" x1") != std::string::npos));
    }
}

TEST_CASE("simulated PH data: recovery, ascent, censoring equivalence, shift invariance") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> z;
    std::exponential_distribution<double> e;
    const int n = 2000;
    const Eigen::Vector2d truth(0.7, -0.4);
    SurvivalDesign d;
    d.time.resize(n);
    d.status.resize(n);
    d.x.resize(n, 2);
    d.names = {"a", "b"};
    for (int i = 0; i < n; ++i) {
        d.x(i, 0) = z(rng);
        d.x(i, 1) = z(rng) > 0 ? 1.0 : 0.0;
        const double t1 = e(rng) / std::exp(d.x.row(i).dot(truth));
        const double t2 = e(rng) / 0.5;
        const double c = e(rng) / 0.3;
        d.time(i) = std::min({t1, t2, c});
        d.status(i) = d.time(i) == t1 ? 1 : (d.time(i) == t2 ? 2 : 0);
    }
    const auto fit = fit_cox(d, 1);
    CHECK(fit.converged);
    for (int c = 0; c < 2; ++c) CHECK(std::abs(fit.beta(c) - truth(c)) < 3.0 * fit.standard_errors(c));
    for (std::size_t i = 1; i < fit.trace.size(); ++i) CHECK(fit.trace[i] >= fit.trace[i - 1]);
    CHECK(fit.covariance.isApprox(fit.covariance.transpose(), 1e-12));
    CHECK(fit.standard_errors.isApprox(fit.covariance.diagonal().cwiseSqrt(), 1e-14));

    SurvivalDesign recoded = d;
    for (int i = 0; i < n; ++i)
        if (recoded.status(i) != 1) recoded.status(i) = 0;
    const auto single = fit_cox(recoded, 1);
    CHECK((single.beta - fit.beta).cwiseAbs().maxCoeff() < 1e-12);

    const double shift = 3.0;
    SurvivalDesign shifted = d;
    shifted.x.col(0).array() += shift;
    const auto moved = fit_cox(shifted, 1);
    CHECK((moved.beta - fit.beta).cwiseAbs().maxCoeff() < 1e-8);
    const double scale = std::exp(-fit.beta(0) * shift);
    for (std::size_t i = 0; i < fit.baseline.size(); i += 50)
        CHECK(moved.baseline.values[i] == doctest::Approx(fit.baseline.values[i] * scale).epsilon(1e-8));
}

TEST_CASE("json report has the fitted fields") {
    const auto d = tiny({1, 2, 3, 4, 5}, {1, 0, 1, 1, 0}, {0.2, 1.0, -0.5, 0.1, 0.7});
    const auto j = to_json(fit_cox(d, 1));
    CHECK(j.contains("coefficients"));
    CHECK(j.contains("baseline"));
    CHECK(j["cause"] == 1);
}
