#include "crfrail/frailty.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "crfrail/error.hpp"
#include "crfrail/parallel.hpp"
#include "crfrail/rng.hpp"
#include "optimize.hpp"

namespace crfrail {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// log(x (x+1) ... (x+m-1)) for m = 0..count, accumulated without lgamma
// cancellation at large x.
std::vector<double> log_rising_table(double x, int count) {
    std::vector<double> table(static_cast<std::size_t>(count) + 1, 0.0);
    for (int m = 1; m <= count; ++m)
        table[static_cast<std::size_t>(m)] =
            table[static_cast<std::size_t>(m) - 1] + std::log(x + (m - 1));
    return table;
}

double log_choose(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// c[M] = log sum_{a+b=M} exp(la[a] + lb[b]).
std::vector<double> log_convolve(const std::vector<double>& la, const std::vector<double>& lb,
                                 std::size_t& terms) {
    const auto na = static_cast<Eigen::Index>(la.size()), nb = static_cast<Eigen::Index>(lb.size());
    const Eigen::Map<const Eigen::ArrayXd> a(la.data(), na);
    const Eigen::ArrayXd b_rev = Eigen::Map<const Eigen::ArrayXd>(lb.data(), nb).reverse();
    std::vector<double> out(static_cast<std::size_t>(na + nb - 1), kNegInf);
    Eigen::ArrayXd seg(std::min(na, nb));
    for (Eigen::Index m = 0; m < na + nb - 1; ++m) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, m - nb + 1);
        const Eigen::Index len = std::min(m, na - 1) - lo + 1;
        // lb[m - i] for i = lo.. is b_rev[nb - 1 - m + i]
        seg.head(len) = a.segment(lo, len) + b_rev.segment(nb - 1 - m + lo, len);
        const double peak = seg.head(len).maxCoeff();
        terms += static_cast<std::size_t>(len);
        if (!std::isfinite(peak)) continue;
        out[static_cast<std::size_t>(m)] = peak + std::log((seg.head(len) - peak).exp().sum());
    }
    return out;
}

void check_inputs(const ClusterSummary& s, const FrailtyParams& p) {
    const int J = p.causes();
    if (J < 1) throw DomainError("frailty parameters need at least one cause");
    if (s.events.size() != J || s.load.size() != J)
        throw DomainError("cluster summary and frailty parameters disagree on cause count");
    if (!(p.nu0 > 0.0) || !(p.nu.array() > 0.0).all() || !std::isfinite(p.nu0) || !p.nu.allFinite())
        throw DomainError("frailty shapes must be positive and finite");
    if ((s.events.array() < 0).any() || !(s.load.array() >= 0.0).all() || !s.load.allFinite())
        throw DomainError("event counts and hazard loads must be non-negative");
}

}  // namespace

namespace {

PosteriorMeans closed_form(const ClusterSummary& summary, const FrailtyParams& params,
                           const EStepOptions& options, bool with_means) {
    check_inputs(summary, params);
    const int J = params.causes();

    // Rough cost of the convolution chain; refuse before doing the work.
    std::size_t expected = 0, running = 1;
    for (int j = 0; j < J; ++j) {
        const auto dj = static_cast<std::size_t>(summary.events(j)) + 1;
        expected += running * dj;
        running += dj - 1;
    }
    expected *= static_cast<std::size_t>(J) + 1;
    if (expected > options.max_terms)
        throw NumericalError("multinomial expansion needs " + std::to_string(expected) +
                             " terms (bound " + std::to_string(options.max_terms) +
                             "); use the quadrature E-step");

    Eigen::VectorXd a(J), log_rate(J);
    for (int j = 0; j < J; ++j) {
        a(j) = 1.0 / (params.nu0 + params.nu(j));
        log_rate(j) = std::log1p(a(j) * summary.load(j));
    }
    const double log_rate0 = std::log1p(a.dot(summary.load));
    const double rate0 = std::exp(log_rate0);

    // f_j(m): weight of Z0^m Zj^(d_j - m) after integrating Zj.
    std::vector<std::vector<double>> f(static_cast<std::size_t>(J)), f_mean(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) {
        const int d = summary.events(j);
        const auto rising = log_rising_table(params.nu(j), d);
        const double rate = std::exp(log_rate(j));
        auto& fj = f[static_cast<std::size_t>(j)];
        auto& gj = f_mean[static_cast<std::size_t>(j)];
        fj.resize(static_cast<std::size_t>(d) + 1);
        gj.resize(static_cast<std::size_t>(d) + 1);
        for (int m = 0; m <= d; ++m) {
            const double shape = params.nu(j) + (d - m);
            fj[static_cast<std::size_t>(m)] = log_choose(d, m) +
                                              rising[static_cast<std::size_t>(d - m)] -
                                              shape * log_rate(j);
            gj[static_cast<std::size_t>(m)] = fj[static_cast<std::size_t>(m)] + std::log(shape / rate);
        }
    }

    PosteriorMeans out;
    auto chain = [&](int replaced) {
        std::vector<double> acc{0.0};
        for (int j = 0; j < J; ++j)
            acc = log_convolve(acc, j == replaced ? f_mean[static_cast<std::size_t>(j)]
                                                  : f[static_cast<std::size_t>(j)],
                               out.terms);
        return acc;
    };

    const std::vector<double> base = chain(-1);
    const int total = static_cast<int>(base.size()) - 1;
    const auto rising0 = log_rising_table(params.nu0, total);
    std::vector<double> g(base.size()), g_shared(base.size());
    for (int M = 0; M <= total; ++M) {
        const double shape0 = params.nu0 + M;
        g[static_cast<std::size_t>(M)] = rising0[static_cast<std::size_t>(M)] - shape0 * log_rate0 +
                                         base[static_cast<std::size_t>(M)];
        g_shared[static_cast<std::size_t>(M)] = g[static_cast<std::size_t>(M)] + std::log(shape0 / rate0);
    }
    const double log_norm = log_sum_exp(g);
    if (!std::isfinite(log_norm)) throw NumericalError("E-step normaliser is not finite");
    double log_a_terms = 0.0;
    for (int j = 0; j < J; ++j) log_a_terms += summary.events(j) * std::log(a(j));
    out.log_marginal = log_a_terms + log_norm;
    if (!with_means) return out;

    out.shared = std::exp(log_sum_exp(g_shared) - log_norm);
    out.specific.resize(J);
    for (int j = 0; j < J; ++j) {
        const std::vector<double> conv = chain(j);
        std::vector<double> h(conv.size());
        for (std::size_t M = 0; M < conv.size(); ++M)
            h[M] = rising0[M] - (params.nu0 + static_cast<double>(M)) * log_rate0 + conv[M];
        out.specific(j) = std::exp(log_sum_exp(h) - log_norm);
    }
    return out;
}

}  // namespace

PosteriorMeans estep_posterior(const ClusterSummary& summary, const FrailtyParams& params,
                               const EStepOptions& options) {
    return closed_form(summary, params, options, true);
}

namespace {

// log of int_0^inf u^c exp(rest(u)) du, c > -1. For c < 0 the substitution
// u = w^(1/(c+1)) removes the endpoint singularity. `log_peak` scales the
// integrand and should be near its maximum on the integration variable.
template <typename Rest>
double log_gamma_type_integral(const Rest& rest, double c, double log_peak,
                               boost::math::quadrature::exp_sinh<double>& integrator, double tol) {
    // Far tails can produce inf - inf; those points contribute nothing.
    auto term = [](double log_value) { return std::isnan(log_value) ? 0.0 : std::exp(log_value); };
    double value = 0.0;
    try {
        if (c < 0.0) {
            // [0, 1] in w = u^(c+1), then the regular tail on [1, inf).
            const double alpha = c + 1.0;
            boost::math::quadrature::tanh_sinh<double> finite;
            value = finite.integrate(
                [&](double w) {
                    const double u = std::pow(std::clamp(w, 0.0, 1.0), 1.0 / alpha);
                    return term(rest(u) - log_peak) / alpha;
                },
                0.0, 1.0, tol);
            value += integrator.integrate(
                [&](double u) {
                    if (!std::isfinite(u)) return 0.0;
                    return term(c * std::log(u) + rest(u) - log_peak);
                },
                1.0, std::numeric_limits<double>::infinity(), tol);
        } else {
            value = integrator.integrate(
                [&](double u) {
                    if (!(u > 0.0)) return c == 0.0 ? term(rest(0.0) - log_peak) : 0.0;
                    if (!std::isfinite(u)) return 0.0;
                    return term(c * std::log(u) + rest(u) - log_peak);
                },
                tol);
        }
    } catch (const std::exception& e) {
        throw NumericalError(std::string("quadrature failed: ") + e.what());
    }
    if (!(value > 0.0) || !std::isfinite(value)) throw NumericalError("quadrature failed");
    return log_peak + std::log(value);
}

struct QuadratureCluster {
    const ClusterSummary& s;
    const FrailtyParams& p;
    Eigen::VectorXd a;
    boost::math::quadrature::exp_sinh<double> integrator;

    QuadratureCluster(const ClusterSummary& summary, const FrailtyParams& params)
        : s(summary), p(params), a((params.nu.array() + params.nu0).inverse().matrix()) {}

    // Outer integrals for different moments revisit the same abscissas.
    std::vector<std::unordered_map<double, double>> cache;

    double log_inner(int j, double z, int k) {
        if (cache.empty()) cache.resize(2 * static_cast<std::size_t>(p.causes()));
        auto& slot = cache[2 * static_cast<std::size_t>(j) + static_cast<std::size_t>(k)];
        if (auto it = slot.find(z); it != slot.end()) return it->second;
        const double v = compute_inner(j, z, k);
        slot.emplace(z, v);
        return v;
    }

    // log of int_0^inf (a(z+u))^d exp(-aH(z+u)) u^(nu-1+k) e^-u / Gamma(nu) du.
    double compute_inner(int j, double z, int k) {
        const double d = s.events(j), nu = p.nu(j), aj = a(j), H = s.load(j);
        const double rate = 1.0 + aj * H;
        const double c = nu - 1.0 + k;
        auto rest = [&](double u) {
            const double x = aj * (z + u);
            return (d > 0.0 ? d * std::log(x) : 0.0) - aj * H * z - rate * u - std::lgamma(nu);
        };
        double peak = 0.0;
        if (c < 0.0) {
            // maximiser of rest alone
            peak = rest(std::max(0.0, d / rate - z));
        } else {
            // root of rate u^2 - (d + c - rate z) u - c z = 0
            const double b = d + c - rate * z;
            const double root = (b + std::sqrt(b * b + 4.0 * rate * c * z)) / (2.0 * rate);
            const double mode = root > 0.0 ? root : (d + nu) / rate;
            peak = c * std::log(mode) + rest(mode);
        }
        return log_gamma_type_integral(rest, c, peak, integrator, 1e-11);
    }

    // log of int_0^inf z^(nu0-1+k0) e^-z / Gamma(nu0) prod_j inner_j(z) dz, where
    // inner_j carries an extra Zj when j == specific.
    double log_outer(int k0, int specific) {
        const int J = p.causes();
        const double c = p.nu0 - 1.0 + k0;
        auto rest = [&](double z) {
            double v = -z - std::lgamma(p.nu0);
            for (int j = 0; j < J; ++j) v += log_inner(j, z, j == specific ? 1 : 0);
            return v;
        };
        auto scaled = [&](double z) { return c < 0.0 ? rest(z) : c * std::log(z) + rest(z); };
        // Coarse geometric scan for the scale of the integrand.
        const double top = std::log10(10.0 * (s.events.sum() + p.nu0 + 10.0));
        double peak = c < 0.0 ? rest(0.0) : kNegInf;
        for (int i = 0; i <= 40; ++i) {
            const double z = std::pow(10.0, -6.0 + i * (top + 6.0) / 40.0);
            peak = std::max(peak, scaled(z));
        }
        if (!std::isfinite(peak)) throw NumericalError("quadrature integrand has no finite value");
        return log_gamma_type_integral(rest, c, peak, integrator, 1e-10);
    }
};

}  // namespace

PosteriorMeans estep_posterior_quadrature(const ClusterSummary& summary,
                                          const FrailtyParams& params) {
    check_inputs(summary, params);
    QuadratureCluster q(summary, params);
    const int J = params.causes();
    PosteriorMeans out;
    const double log_norm = q.log_outer(0, -1);
    if (!std::isfinite(log_norm)) throw NumericalError("quadrature normaliser is not finite");
    out.log_marginal = log_norm;
    out.shared = std::exp(q.log_outer(1, -1) - log_norm);
    out.specific.resize(J);
    for (int j = 0; j < J; ++j) out.specific(j) = std::exp(q.log_outer(0, j) - log_norm);
    return out;
}

namespace {

// Closed form when the expansion fits the term bound, quadrature otherwise.
PosteriorMeans posterior_any(const ClusterSummary& s, const FrailtyParams& p, const EStepOptions& o) {
    const int J = p.causes();
    std::size_t expected = 0, running = 1;
    for (int j = 0; j < J; ++j) {
        const auto dj = static_cast<std::size_t>(std::max(0, s.events(j))) + 1;
        expected += running * dj;
        running += dj - 1;
    }
    if (expected * (static_cast<std::size_t>(J) + 1) <= o.max_terms) return closed_form(s, p, o, true);
    return estep_posterior_quadrature(s, p);
}

double log_marginal_any(const ClusterSummary& s, const FrailtyParams& p, const EStepOptions& o) {
    try {
        return closed_form(s, p, o, false).log_marginal;
    } catch (const NumericalError&) {
        check_inputs(s, p);
        QuadratureCluster q(s, p);
        return q.log_outer(0, -1);
    }
}

}  // namespace

double frailty_loglik(const FrailtyParams& params, std::span<const ClusterSummary> summaries,
                      LikelihoodMethod method) {
    double total = 0.0;
    for (const auto& s : summaries) {
        if (method == LikelihoodMethod::ClosedForm) {
            total += closed_form(s, params, {}, false).log_marginal;
        } else {
            check_inputs(s, params);
            QuadratureCluster q(s, params);
            total += q.log_outer(0, -1);
        }
    }
    return total;
}

namespace {

// log E[W^d exp(-W H)] for W ~ Gamma(nu, nu).
double gamma_cluster_term(double nu, int d, double H) {
    double rising = 0.0;
    for (int m = 0; m < d; ++m) rising += std::log(nu + m);
    return rising - d * std::log(nu + H) - nu * std::log1p(H / nu);
}

}  // namespace

double independent_frailty_loglik(const Eigen::VectorXd& nu,
                                  std::span<const ClusterSummary> summaries) {
    double total = 0.0;
    for (const auto& s : summaries) {
        if (s.events.size() != nu.size()) throw DomainError("cause count mismatch");
        for (Eigen::Index j = 0; j < nu.size(); ++j)
            total += gamma_cluster_term(nu(j), s.events(j), s.load(j));
    }
    return total;
}

double event_log_terms(const CompetingRisksDataset& data, std::span<const CauseModel> models) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& r = data.records[i];
        if (r.status == 0) continue;
        const auto& m = models[static_cast<std::size_t>(r.status - 1)];
        const auto& bp = m.cumulative_hazard.breakpoints;
        auto it = std::lower_bound(bp.begin(), bp.end(), r.time);
        if (it == bp.end() || *it != r.time)
            throw NumericalError("baseline hazard has no jump at an observed event time");
        const auto idx = static_cast<std::size_t>(it - bp.begin());
        const double before = idx ? m.cumulative_hazard.values[idx - 1] : m.cumulative_hazard.initial;
        total += std::log(m.cumulative_hazard.values[idx] - before) +
                 m.linear_predictor(static_cast<Eigen::Index>(i));
    }
    return total;
}

double observed_loglik(const FrailtyParams& params, const CompetingRisksDataset& data,
                       std::span<const CauseModel> models, LikelihoodMethod method) {
    const auto summaries = cluster_summaries(data, models);
    const double events = event_log_terms(data, models);
    double frailty = std::numeric_limits<double>::quiet_NaN();
    try {
        frailty = frailty_loglik(params, summaries, method);
    } catch (const NumericalError&) {
        if (method == LikelihoodMethod::Quadrature) throw;
    }
    if (!std::isfinite(frailty) && method == LikelihoodMethod::ClosedForm)
        frailty = frailty_loglik(params, summaries, LikelihoodMethod::Quadrature);
    if (!std::isfinite(frailty)) throw NumericalError("observed log-likelihood is not finite");
    return events + frailty;
}

// ---------------------------------------------------------------------------

namespace {

struct CauseState {
    std::vector<CoxFit> fits;
    std::vector<CauseModel> models;
};

CauseState m_step(const SurvivalDesign& design, int J, const std::vector<Eigen::VectorXd>& offsets,
                  const std::vector<CoxFit>* previous, const FitOptions& base) {
    CauseState st;
    for (int j = 0; j < J; ++j) {
        FitOptions opts = base;
        opts.offsets = offsets[static_cast<std::size_t>(j)];
        if (previous) opts.initial_beta = (*previous)[static_cast<std::size_t>(j)].beta;
        st.fits.push_back(fit_cox(design, j + 1, opts));
        if (st.fits.back().monotone_likelihood)
            throw NumericalError("cause " + std::to_string(j + 1) +
                                 ": monotone likelihood in the frailty M-step");
        st.models.push_back({design.x * st.fits.back().beta, st.fits.back().baseline});
    }
    return st;
}

double marginal_total(const FrailtyParams& p, std::span<const ClusterSummary> summaries,
                      const EStepOptions& o = {}) {
    double total = 0.0;
    for (const auto& s : summaries) total += log_marginal_any(s, p, o);
    return total;
}

FrailtyParams maximize_shapes(const FrailtyParams& start, std::span<const ClusterSummary> summaries,
                              const CorrelatedFrailtyOptions& options) {
    const int J = start.causes();
    Eigen::VectorXd x(J + 1);
    x(0) = std::log(start.nu0);
    x.tail(J) = start.nu.array().log().matrix();
    const Eigen::VectorXd lower = Eigen::VectorXd::Constant(J + 1, std::log(options.nu_lower));
    const Eigen::VectorXd upper = Eigen::VectorXd::Constant(J + 1, std::log(options.nu_upper));
    auto objective = [&](const Eigen::VectorXd& theta) {
        FrailtyParams p;
        p.nu0 = std::exp(theta(0));
        p.nu = theta.tail(J).array().exp().matrix();
        return marginal_total(p, summaries, options.estep);
    };
    const auto best = detail::maximize_in_box(objective, x, lower, upper);
    FrailtyParams out;
    out.nu0 = std::exp(best.x(0));
    out.nu = best.x.tail(J).array().exp().matrix();
    return out;
}

}  // namespace

CorrelatedFrailtyFit fit_correlated_frailty(const CompetingRisksDataset& data,
                                            const CorrelatedFrailtyOptions& options) {
    if (!data.has_clusters()) throw DomainError("correlated frailty needs cluster labels");
    const int K = data.num_clusters();
    if (K < 2) throw DomainError("a single cluster leaves the frailty variance unidentifiable");
    const int J = data.num_causes;
    for (int j = 1; j <= J; ++j)
        if (data.event_count(j) == 0)
            throw DomainError("no events of cause " + std::to_string(j));
    if (!(options.nu_lower > 0.0) || !(options.nu_upper > options.nu_lower))
        throw DomainError("invalid shape bounds");

    const SurvivalDesign design = make_design(
        data, options.covariates.empty() ? std::span<const std::string>(data.covariate_names)
                                         : std::span<const std::string>(options.covariates));
    const Eigen::VectorXi labels = data.clusters();
    const auto n = design.rows();

    FrailtyParams params;
    if (options.initial) {
        params = *options.initial;
        if (params.causes() != J) throw DomainError("initial shapes have the wrong cause count");
    } else {
        params.nu0 = 1.0;
        params.nu = Eigen::VectorXd::Ones(J);
    }

    std::vector<Eigen::VectorXd> offsets(static_cast<std::size_t>(J), Eigen::VectorXd::Ones(n));
    CauseState state = m_step(design, J, offsets, nullptr, options.cox);
    auto summaries = cluster_summaries(data, state.models);
    params = maximize_shapes(params, summaries, options);
    double loglik = event_log_terms(data, state.models) + marginal_total(params, summaries, options.estep);

    CorrelatedFrailtyFit fit;
    fit.loglik_trace.push_back(loglik);
    std::vector<PosteriorMeans> posteriors(static_cast<std::size_t>(K));

    auto e_step = [&] {
        for (int k = 0; k < K; ++k)
            posteriors[static_cast<std::size_t>(k)] =
                posterior_any(summaries[static_cast<std::size_t>(k)], params, options.estep);
    };

    for (fit.iterations = 1; fit.iterations <= options.max_iterations; ++fit.iterations) {
        e_step();
        for (int j = 0; j < J; ++j) {
            const double a = 1.0 / (params.nu0 + params.nu(j));
            auto& off = offsets[static_cast<std::size_t>(j)];
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto& post = posteriors[static_cast<std::size_t>(labels(i) - 1)];
                off(i) = a * (post.shared + post.specific(j));
            }
        }
        state = m_step(design, J, offsets, &state.fits, options.cox);
        summaries = cluster_summaries(data, state.models);
        params = maximize_shapes(params, summaries, options);
        const double next = event_log_terms(data, state.models) + marginal_total(params, summaries, options.estep);
        fit.loglik_trace.push_back(next);
        const double change = next - loglik;
        loglik = next;
        if (std::abs(change) < options.tolerance) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged)
        throw ConvergenceError("correlated frailty EM did not converge in " +
                                   std::to_string(options.max_iterations) + " iterations",
                               fit.loglik_trace);

    e_step();
    fit.causes = std::move(state.fits);
    fit.params = params;
    fit.moments = frailty_moments(params);
    fit.loglik = loglik;
    fit.posterior_shared.resize(K);
    fit.posterior_specific.resize(K, J);
    for (int k = 0; k < K; ++k) {
        fit.posterior_shared(k) = posteriors[static_cast<std::size_t>(k)].shared;
        fit.posterior_specific.row(k) = posteriors[static_cast<std::size_t>(k)].specific.transpose();
    }
    return fit;
}

std::vector<std::pair<std::string, double>> parameter_vector(const CorrelatedFrailtyFit& fit) {
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t j = 0; j < fit.causes.size(); ++j) {
        const auto& c = fit.causes[j];
        for (Eigen::Index k = 0; k < c.beta.size(); ++k)
            out.emplace_back("beta" + std::to_string(j + 1) + "." + c.names[static_cast<std::size_t>(k)],
                             c.beta(k));
    }
    const auto J = fit.moments.variances.size();
    for (Eigen::Index j = 0; j < J; ++j)
        out.emplace_back("xi" + std::to_string(j + 1), fit.moments.variances(j));
    for (Eigen::Index a = 0; a < J; ++a)
        for (Eigen::Index b = a + 1; b < J; ++b)
            out.emplace_back("rho" + std::to_string(a + 1) + std::to_string(b + 1),
                             fit.moments.correlations(a, b));
    return out;
}

// ---------------------------------------------------------------------------
// Shared frailty

const char* to_string(FrailtyDistribution d) {
    return d == FrailtyDistribution::Gamma ? "gamma" : "lognormal";
}

FrailtyDistribution parse_distribution(const std::string& text) {
    if (text == "gamma") return FrailtyDistribution::Gamma;
    if (text == "lognormal" || text == "gaussian") return FrailtyDistribution::LogNormal;
    throw DomainError("unknown frailty distribution '" + text + "'");
}

namespace {

double boundary_lr_pvalue(double lr) {
    if (!(lr > 0.0)) return 1.0;
    // 50:50 mixture of chi2_0 and chi2_1.
    return 0.5 * std::erfc(std::sqrt(lr / 2.0));
}

double cox_full_loglik(const SurvivalDesign& design, int cause, const CoxFit& fit,
                       const Eigen::VectorXd& offsets) {
    const Eigen::VectorXd eta = design.x * fit.beta;
    double total = 0.0;
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        total -= offsets(i) * fit.baseline(design.time(i)) * std::exp(eta(i));
        if (design.status(i) == cause) {
            const auto& bp = fit.baseline.breakpoints;
            const auto idx = static_cast<std::size_t>(
                std::lower_bound(bp.begin(), bp.end(), design.time(i)) - bp.begin());
            const double before = idx ? fit.baseline.values[idx - 1] : 0.0;
            total += std::log(fit.baseline.values[idx] - before) + eta(i) + std::log(offsets(i));
        }
    }
    return total;
}

struct GroupSummary {
    Eigen::VectorXi events;
    Eigen::VectorXd load;
};

GroupSummary group_summary(const SurvivalDesign& design, int cause, const CoxFit& fit,
                           const Eigen::VectorXi& groups, int K) {
    GroupSummary g{Eigen::VectorXi::Zero(K), Eigen::VectorXd::Zero(K)};
    const Eigen::VectorXd eta = design.x * fit.beta;
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const int k = groups(i) - 1;
        if (design.status(i) == cause) ++g.events(k);
        g.load(k) += fit.baseline(design.time(i)) * std::exp(eta(i));
    }
    return g;
}

double event_terms_single(const SurvivalDesign& design, int cause, const CoxFit& fit) {
    const Eigen::VectorXd eta = design.x * fit.beta;
    double total = 0.0;
    const auto& bp = fit.baseline.breakpoints;
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        if (design.status(i) != cause) continue;
        const auto idx = static_cast<std::size_t>(
            std::lower_bound(bp.begin(), bp.end(), design.time(i)) - bp.begin());
        const double before = idx ? fit.baseline.values[idx - 1] : 0.0;
        total += std::log(fit.baseline.values[idx] - before) + eta(i);
    }
    return total;
}

SharedFrailtyFit fit_shared_gamma(const SurvivalDesign& design, const Eigen::VectorXi& groups,
                                  int K, const SharedFrailtyOptions& options) {
    const int cause = options.cause;
    const auto n = design.rows();
    SharedFrailtyFit fit;
    fit.distribution = FrailtyDistribution::Gamma;
    fit.cause = cause;

    FitOptions cox_opts = options.cox;
    Eigen::VectorXd offsets = Eigen::VectorXd::Ones(n);
    cox_opts.offsets = offsets;
    CoxFit cox = fit_cox(design, cause, cox_opts);
    if (cox.monotone_likelihood) throw NumericalError("monotone likelihood in the Cox fit");
    fit.null_loglik = cox_full_loglik(design, cause, cox, offsets);

    const double log_nu_lo = std::log(1.0 / options.variance_upper);
    const double log_nu_hi = std::log(1.0 / options.variance_lower);
    double log_nu = 0.0;

    auto marginal = [&](double lnu, const GroupSummary& g) {
        const double nu = std::exp(lnu);
        double total = 0.0;
        for (int k = 0; k < K; ++k) total += gamma_cluster_term(nu, g.events(k), g.load(k));
        return total;
    };

    GroupSummary g = group_summary(design, cause, cox, groups, K);
    double events = event_terms_single(design, cause, cox);
    log_nu = detail::maximize_scalar([&](double x) { return marginal(x, g); }, log_nu, log_nu_lo,
                                     log_nu_hi)
                 .x(0);
    double loglik = events + marginal(log_nu, g);
    fit.trace.push_back(loglik);

    Eigen::VectorXd posterior(K);
    for (fit.iterations = 1; fit.iterations <= options.max_iterations; ++fit.iterations) {
        const double nu = std::exp(log_nu);
        for (int k = 0; k < K; ++k) posterior(k) = (nu + g.events(k)) / (nu + g.load(k));
        for (Eigen::Index i = 0; i < n; ++i) offsets(i) = posterior(groups(i) - 1);
        cox_opts.offsets = offsets;
        cox_opts.initial_beta = cox.beta;
        cox = fit_cox(design, cause, cox_opts);
        if (cox.monotone_likelihood) throw NumericalError("monotone likelihood in the frailty M-step");
        g = group_summary(design, cause, cox, groups, K);
        events = event_terms_single(design, cause, cox);
        log_nu = detail::maximize_scalar([&](double x) { return marginal(x, g); }, log_nu,
                                         log_nu_lo, log_nu_hi)
                     .x(0);
        const double next = events + marginal(log_nu, g);
        fit.trace.push_back(next);
        const double change = next - loglik;
        loglik = next;
        if (std::abs(change) < options.tolerance) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged)
        throw ConvergenceError("shared gamma frailty EM did not converge", fit.trace);

    const double nu = std::exp(log_nu);
    for (int k = 0; k < K; ++k) posterior(k) = (nu + g.events(k)) / (nu + g.load(k));
    fit.cox = std::move(cox);
    fit.variance = 1.0 / nu;
    fit.posterior_means = posterior;
    fit.loglik = loglik;
    fit.lr_statistic = std::max(0.0, 2.0 * (loglik - fit.null_loglik));
    fit.p_value = boundary_lr_pvalue(fit.lr_statistic);
    return fit;
}

// Penalised partial likelihood for log-normal frailty: eta = X beta + b_group,
// b ~ N(0, sigma2). Works on the eta scale and aggregates by group.
class PenalizedCox {
public:
    PenalizedCox(const SurvivalDesign& design, int cause, const Eigen::VectorXi& groups, int K)
        : design_(design), cause_(cause), groups_(groups), K_(K),
          order_(static_cast<std::size_t>(design.rows())) {
        std::iota(order_.begin(), order_.end(), Eigen::Index{0});
        std::stable_sort(order_.begin(), order_.end(), [&](Eigen::Index a, Eigen::Index b) {
            return design_.time(a) > design_.time(b);
        });
    }

    struct Evaluation {
        double partial = 0.0;  // log partial likelihood
        Eigen::VectorXd gradient;  // wrt (beta, b)
        Eigen::MatrixXd information;  // minus Hessian of the partial likelihood wrt (beta, b)
    };

    Evaluation evaluate(const Eigen::VectorXd& theta, bool with_information) const {
        const Eigen::Index n = design_.rows(), p = design_.cols();
        Eigen::VectorXd eta = design_.x * theta.head(p);
        for (Eigen::Index i = 0; i < n; ++i) eta(i) += theta(p + groups_(i) - 1);
        const double shift = eta.maxCoeff();
        const Eigen::VectorXd risk = (eta.array() - shift).exp().matrix();

        // Forward pass (descending time) for risk-set sums.
        std::vector<double> s0_at(static_cast<std::size_t>(n));
        std::vector<std::pair<double, double>> event_times;  // (d_t, S0_t) in descending order
        std::vector<std::size_t> risk_prefix;                 // risk set = order_[0..prefix)
        Evaluation out;
        double s0 = 0.0;
        std::size_t i = 0;
        while (i < order_.size()) {
            const double t = design_.time(order_[i]);
            std::size_t j = i;
            double deaths = 0.0;
            for (; j < order_.size() && design_.time(order_[j]) == t; ++j) {
                s0 += risk(order_[j]);
                if (design_.status(order_[j]) == cause_) {
                    deaths += 1.0;
                    out.partial += eta(order_[j]);
                }
            }
            if (deaths > 0.0) {
                out.partial -= deaths * (shift + std::log(s0));
                event_times.emplace_back(deaths, s0);
                risk_prefix.push_back(j);
            }
            i = j;
        }

        // cumulative d/S0 for subjects: Lambda~(t_i) = sum over event times <= t_i.
        const std::size_t m = event_times.size();
        Eigen::VectorXd g_eta = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
        {
            // Event times were recorded in descending order; subject at order_ position q
            // belongs to risk sets of all event times whose prefix exceeds q.
            std::vector<double> tail(m + 1, 0.0);  // tail[e] = sum_{e' >= e} d/S0
            for (std::size_t e = m; e-- > 0;) tail[e] = tail[e + 1] + event_times[e].first / event_times[e].second;
            std::size_t e = 0;
            for (std::size_t q = 0; q < order_.size(); ++q) {
                while (e < m && risk_prefix[e] <= q) ++e;
                const Eigen::Index r = order_[q];
                const double cum = tail[e];
                w(r) = risk(r) * cum;
                g_eta(r) = (design_.status(r) == cause_ ? 1.0 : 0.0) - w(r);
            }
        }

        const Eigen::Index dim = p + K_;
        out.gradient.resize(dim);
        out.gradient.head(p) = design_.x.transpose() * g_eta;
        out.gradient.tail(K_).setZero();
        for (Eigen::Index r = 0; r < n; ++r) out.gradient(p + groups_(r) - 1) += g_eta(r);
        if (!with_information) return out;

        // information = D' diag(w) D - sum_t (d_t / S0_t^2) (D' v_t)(D' v_t)'
        Eigen::MatrixXd V = Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(m));
        {
            // Accumulate D' v_t as prefix sums along the descending order.
            Eigen::VectorXd running = Eigen::VectorXd::Zero(dim);
            std::size_t q = 0;
            for (std::size_t e = 0; e < m; ++e) {
                for (; q < risk_prefix[e]; ++q) {
                    const Eigen::Index r = order_[q];
                    running.head(p).noalias() += risk(r) * design_.x.row(r).transpose();
                    running(p + groups_(r) - 1) += risk(r);
                }
                V.col(static_cast<Eigen::Index>(e)) =
                    running * (std::sqrt(event_times[e].first) / event_times[e].second);
            }
        }
        out.information = Eigen::MatrixXd::Zero(dim, dim);
        for (Eigen::Index r = 0; r < n; ++r) {
            const Eigen::Index gcol = p + groups_(r) - 1;
            out.information.topLeftCorner(p, p).noalias() +=
                w(r) * design_.x.row(r).transpose() * design_.x.row(r);
            out.information.block(0, gcol, p, 1).noalias() += w(r) * design_.x.row(r).transpose();
            out.information(gcol, gcol) += w(r);
        }
        out.information.bottomLeftCorner(K_, p) = out.information.topRightCorner(p, K_).transpose();
        out.information.noalias() -= V * V.transpose();
        return out;
    }

    struct Mode {
        Eigen::VectorXd theta;
        double penalized = 0.0;
        double log_det = 0.0;  // log det of the random-effect block of the penalised information
    };

    Mode maximize(double sigma2, Eigen::VectorXd theta, const FitOptions& options) const {
        const Eigen::Index p = design_.cols();
        const double inv = 1.0 / sigma2;
        auto penalized = [&](const Eigen::VectorXd& th, const Evaluation& ev) {
            return ev.partial - 0.5 * inv * th.tail(K_).squaredNorm();
        };
        Evaluation ev = evaluate(theta, true);
        double value = penalized(theta, ev);
        for (int it = 0; it < options.max_iterations; ++it) {
            Eigen::VectorXd grad = ev.gradient;
            grad.tail(K_) -= inv * theta.tail(K_);
            Eigen::MatrixXd info = ev.information;
            info.diagonal().tail(K_).array() += inv;
            if (grad.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) break;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
            Eigen::VectorXd step = ldlt.solve(grad);
            if (!step.allFinite()) throw NumericalError("penalised Newton step is not finite");
            bool improved = false;
            for (int h = 0; h <= options.max_step_halvings; ++h, step *= 0.5) {
                const Eigen::VectorXd candidate = theta + step;
                const Evaluation cev = evaluate(candidate, false);
                const double cvalue = penalized(candidate, cev);
                if (cvalue >= value) {
                    const bool tiny = cvalue - value < 1e-12 * std::max(1.0, std::abs(value));
                    theta = candidate;
                    value = cvalue;
                    ev = evaluate(theta, true);
                    improved = true;
                    if (tiny) it = options.max_iterations;
                    break;
                }
            }
            if (!improved) break;
            if (theta.head(p).lpNorm<Eigen::Infinity>() > options.divergence_bound)
                throw NumericalError("penalised Cox coefficients diverged");
        }
        Mode mode;
        mode.theta = theta;
        mode.penalized = value;
        Eigen::MatrixXd block = ev.information.bottomRightCorner(K_, K_);
        block.diagonal().array() += inv;
        Eigen::LLT<Eigen::MatrixXd> llt(block);
        if (llt.info() != Eigen::Success) {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(block);
            mode.log_det = ldlt.vectorD().array().abs().log().sum();
        } else {
            mode.log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        }
        return mode;
    }

private:
    const SurvivalDesign& design_;
    int cause_;
    const Eigen::VectorXi& groups_;
    Eigen::Index K_;
    std::vector<Eigen::Index> order_;
};

SharedFrailtyFit fit_shared_lognormal(const SurvivalDesign& design, const Eigen::VectorXi& groups,
                                      int K, const SharedFrailtyOptions& options) {
    SharedFrailtyFit fit;
    fit.distribution = FrailtyDistribution::LogNormal;
    fit.cause = options.cause;
    const Eigen::Index p = design.cols();

    FitOptions cox_opts = options.cox;
    const CoxFit cox0 = fit_cox(design, options.cause, cox_opts);
    if (cox0.monotone_likelihood) throw NumericalError("monotone likelihood in the Cox fit");
    fit.null_loglik = cox0.log_partial_likelihood;

    const PenalizedCox model(design, options.cause, groups, K);
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(p + K);
    warm.head(p) = cox0.beta;

    auto laplace = [&](double log_sigma2, PenalizedCox::Mode* keep) {
        const double sigma2 = std::exp(log_sigma2);
        PenalizedCox::Mode mode = model.maximize(sigma2, warm, cox_opts);
        const double value = mode.penalized - 0.5 * K * log_sigma2 - 0.5 * mode.log_det;
        fit.trace.push_back(value);
        if (keep) *keep = std::move(mode);
        return value;
    };

    const double lo = std::log(options.variance_lower);
    const double hi = std::log(std::min(options.variance_upper, 1e2));
    const auto best = detail::maximize_scalar([&](double x) { return laplace(x, nullptr); },
                                              std::log(0.1), lo, hi);
    PenalizedCox::Mode mode;
    fit.loglik = laplace(best.x(0), &mode);
    fit.iterations = static_cast<int>(fit.trace.size());
    fit.converged = true;
    fit.variance = std::exp(best.x(0));

    fit.cox = cox0;
    fit.cox.beta = mode.theta.head(p);
    Eigen::VectorXd offsets(design.rows());
    for (Eigen::Index i = 0; i < design.rows(); ++i) offsets(i) = std::exp(mode.theta(p + groups(i) - 1));
    fit.cox.baseline = breslow_baseline(fit.cox.beta, design, options.cause, offsets);
    fit.posterior_means = mode.theta.tail(K).array().exp().matrix();
    fit.lr_statistic = std::max(0.0, 2.0 * (fit.loglik - fit.null_loglik));
    fit.p_value = boundary_lr_pvalue(fit.lr_statistic);
    return fit;
}

}  // namespace

SharedFrailtyFit fit_shared_frailty(const CompetingRisksDataset& data,
                                    FrailtyDistribution distribution, const Eigen::VectorXi& groups,
                                    const SharedFrailtyOptions& options) {
    const Eigen::VectorXi labels = groups.size() ? groups : data.clusters();
    if (labels.size() != static_cast<Eigen::Index>(data.size()))
        throw DomainError("grouping length does not match record count");
    if (labels.size() == 0) throw DomainError("empty dataset");
    if (labels.minCoeff() < 1) throw DomainError("group labels must be 1..K");
    const int K = labels.maxCoeff();
    std::vector<int> seen(static_cast<std::size_t>(K), 0);
    for (Eigen::Index i = 0; i < labels.size(); ++i) seen[static_cast<std::size_t>(labels(i) - 1)] = 1;
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw DomainError("group labels must be contiguous 1..K");
    if (K < 2) throw DomainError("shared frailty needs at least two groups");
    if (data.event_count(options.cause) == 0)
        throw DomainError("no events of cause " + std::to_string(options.cause));

    const SurvivalDesign design = make_design(
        data, options.covariates.empty() ? std::span<const std::string>(data.covariate_names)
                                         : std::span<const std::string>(options.covariates));
    return distribution == FrailtyDistribution::Gamma
               ? fit_shared_gamma(design, labels, K, options)
               : fit_shared_lognormal(design, labels, K, options);
}

std::vector<SharedFrailtyFit> fit_independent_frailty(const CompetingRisksDataset& data,
                                                      const SharedFrailtyOptions& options) {
    if (!data.has_clusters()) throw DomainError("independent frailty needs cluster labels");
    bool any_events = false;
    for (int j = 1; j <= data.num_causes; ++j) any_events = any_events || data.event_count(j) > 0;
    if (!any_events) throw DomainError("no cluster has any event");
    std::vector<SharedFrailtyFit> fits;
    for (int j = 1; j <= data.num_causes; ++j) {
        SharedFrailtyOptions opts = options;
        opts.cause = j;
        fits.push_back(fit_shared_frailty(data, FrailtyDistribution::Gamma, {}, opts));
    }
    return fits;
}

// ---------------------------------------------------------------------------

EmpiricalMetrics empirical_metrics(std::span<const double> estimates, double truth) {
    EmpiricalMetrics m;
    m.truth = truth;
    m.count = estimates.size();
    if (estimates.empty()) {
        m.mean = m.median = m.bias = m.empse = m.rmse = std::numeric_limits<double>::quiet_NaN();
        return m;
    }
    const double R = static_cast<double>(estimates.size());
    // Work with deviations from the truth so exact estimates give exact zeros.
    double deviation = 0.0;
    for (double e : estimates) deviation += e - truth;
    m.bias = deviation / R;
    m.mean = truth + m.bias;
    m.median = quantile(estimates, 0.5);
    double ss = 0.0, sq = 0.0;
    for (double e : estimates) {
        ss += (e - truth - m.bias) * (e - truth - m.bias);
        sq += (e - truth) * (e - truth);
    }
    m.empse = estimates.size() > 1 ? std::sqrt(ss / (R - 1.0)) : 0.0;
    m.rmse = std::sqrt(sq / R);
    return m;
}

IntervalEstimates standard_errors(const CorrelatedFrailtyFit& fit,
                                  const CompetingRisksDataset& data,
                                  const CorrelatedFrailtyOptions& fit_options,
                                  const BootstrapOptions& options) {
    if (!fit.converged) throw DomainError("bootstrap needs a converged fit");
    if (options.replicates < 2) throw DomainError("bootstrap needs at least two replicates");
    const int K = data.num_clusters();
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(K));
    for (std::size_t i = 0; i < data.size(); ++i)
        members[static_cast<std::size_t>(*data.records[i].cluster - 1)].push_back(i);

    const auto point = parameter_vector(fit);
    std::vector<std::optional<std::vector<double>>> draws(static_cast<std::size_t>(options.replicates));
    parallel_for(
        draws.size(),
        [&](std::size_t b) {
            Rng rng = make_substream(options.seed, b);
            std::uniform_int_distribution<int> pick(0, K - 1);
            CompetingRisksDataset boot;
            boot.num_causes = data.num_causes;
            boot.covariate_names = data.covariate_names;
            for (const auto& [name, v] : data.genes) boot.genes[name];
            for (int k = 0; k < K; ++k) {
                const int source = pick(rng);
                for (std::size_t i : members[static_cast<std::size_t>(source)]) {
                    SurvivalRecord r = data.records[i];
                    r.cluster = k + 1;
                    boot.records.push_back(std::move(r));
                    for (const auto& [name, v] : data.genes) boot.genes[name].push_back(v[i]);
                }
            }
            try {
                CorrelatedFrailtyOptions opts = fit_options;
                opts.initial = fit.params;
                const auto refit = fit_correlated_frailty(boot, opts);
                std::vector<double> values;
                for (const auto& [name, v] : parameter_vector(refit)) values.push_back(v);
                if (values.size() == point.size()) draws[b] = std::move(values);
            } catch (const Error&) {
            }
        },
        options.threads);

    IntervalEstimates out;
    out.method = "cluster-bootstrap-percentile";
    out.replicates = options.replicates;
    out.level = options.level;
    std::vector<std::vector<double>> by_param(point.size());
    for (const auto& d : draws) {
        if (!d) {
            ++out.failures;
            continue;
        }
        for (std::size_t q = 0; q < point.size(); ++q) by_param[q].push_back((*d)[q]);
    }
    const double alpha = 1.0 - options.level;
    for (std::size_t q = 0; q < point.size(); ++q) {
        ParameterInterval pi;
        pi.name = point[q].first;
        pi.estimate = point[q].second;
        if (by_param[q].size() >= 2) {
            const auto m = empirical_metrics(by_param[q], pi.estimate);
            pi.standard_error = m.empse;
            pi.lower = quantile(by_param[q], alpha / 2.0);
            pi.upper = quantile(by_param[q], 1.0 - alpha / 2.0);
        } else {
            pi.standard_error = pi.lower = pi.upper = std::numeric_limits<double>::quiet_NaN();
        }
        out.parameters.push_back(pi);
    }
    if (K < 20)
        out.warning = "only " + std::to_string(K) + " clusters; bootstrap intervals are unreliable";
    return out;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const IntervalEstimates& intervals) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : intervals.parameters)
        params.push_back({{"name", p.name},
                          {"estimate", p.estimate},
                          {"standard_error", p.standard_error},
                          {"lower", p.lower},
                          {"upper", p.upper}});
    nlohmann::json j = {{"method", intervals.method},
                        {"replicates", intervals.replicates},
                        {"failures", intervals.failures},
                        {"level", intervals.level},
                        {"parameters", params}};
    if (intervals.warning) j["warning"] = *intervals.warning;
    return j;
}

nlohmann::json to_json(const CorrelatedFrailtyFit& fit) {
    nlohmann::json causes = nlohmann::json::array();
    for (const auto& c : fit.causes) causes.push_back(to_json(c));
    const auto J = fit.moments.variances.size();
    nlohmann::json correlations = nlohmann::json::array();
    for (Eigen::Index a = 0; a < J; ++a)
        for (Eigen::Index b = a + 1; b < J; ++b)
            correlations.push_back({{"causes", {a + 1, b + 1}}, {"rho", fit.moments.correlations(a, b)}});
    std::vector<double> nu(fit.params.nu.data(), fit.params.nu.data() + fit.params.nu.size());
    std::vector<double> xi(fit.moments.variances.data(), fit.moments.variances.data() + J);
    nlohmann::json posterior = nlohmann::json::array();
    for (Eigen::Index k = 0; k < fit.posterior_shared.size(); ++k) {
        std::vector<double> spec(static_cast<std::size_t>(J));
        for (Eigen::Index j = 0; j < J; ++j) spec[static_cast<std::size_t>(j)] = fit.posterior_specific(k, j);
        posterior.push_back({{"cluster", k + 1}, {"shared", fit.posterior_shared(k)}, {"specific", spec}});
    }
    nlohmann::json j = {
        {"model", "additive-correlated-gamma"},
        {"causes", causes},
        {"frailty", {{"nu0", fit.params.nu0}, {"nu", nu}, {"variances", xi}, {"correlations", correlations}}},
        {"posterior_means", posterior},
        {"em", {{"converged", fit.converged},
                {"iterations", fit.iterations},
                {"loglik", fit.loglik},
                {"trace", fit.loglik_trace}}},
    };
    if (fit.intervals) j["intervals"] = to_json(*fit.intervals);
    return j;
}

nlohmann::json to_json(const SharedFrailtyFit& fit) {
    std::vector<double> post(fit.posterior_means.data(),
                             fit.posterior_means.data() + fit.posterior_means.size());
    return {
        {"model", std::string("shared-") + to_string(fit.distribution)},
        {"cause", fit.cause},
        {"cox", to_json(fit.cox)},
        {"frailty_variance", fit.variance},
        {"loglik", fit.loglik},
        {"null_loglik", fit.null_loglik},
        {"lr_statistic", fit.lr_statistic},
        {"p_value", fit.p_value},
        {"posterior_means", post},
        {"iterations", fit.iterations},
        {"converged", fit.converged},
        {"trace", fit.trace},
    };
}

}  // namespace crfrail
