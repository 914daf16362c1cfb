#include "crfrail/simulate.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include "crfrail/error.hpp"
#include "crfrail/format.hpp"
#include "crfrail/parallel.hpp"

namespace crfrail {

const std::vector<std::string>& SimConfig::covariate_names() {
    static const std::vector<std::string> names{"age", "tstage", "nstage"};
    return names;
}

void SimConfig::validate() const {
    if (K < 1 || J < 1 || n_per_cluster < 1) throw DomainError("K, J and n_per_cluster must be >= 1");
    auto positive = [](const Eigen::VectorXd& v) { return v.allFinite() && (v.array() > 0.0).all(); };
    if (nu.size() != J || weibull_scale.size() != J || weibull_shape.size() != J)
        throw DomainError("nu, weibull_scale and weibull_shape need one entry per cause");
    if (frailty && (!(nu0 > 0.0) || !std::isfinite(nu0) || !positive(nu)))
        throw DomainError("frailty shapes must be positive");
    if (!positive(weibull_scale) || !positive(weibull_shape))
        throw DomainError("Weibull scales and shapes must be positive");
    if (!(censoring_rate >= 0.0)) throw DomainError("censoring rate must be non-negative");
    if (static_cast<int>(beta.size()) != J) throw DomainError("need one coefficient vector per cause");
    for (const auto& b : beta)
        if (b.size() != static_cast<Eigen::Index>(covariate_names().size()) || !b.allFinite())
            throw DomainError("coefficient vectors must match the covariates (age, tstage, nstage)");
}

SimConfig preset(const std::string& name) {
    SimConfig c;
    c.K = 3;
    c.J = 3;
    c.n_per_cluster = 20;
    c.nu0 = 1.5;
    c.nu = Eigen::Vector3d(2.0, 2.5, 3.0);
    c.weibull_scale = Eigen::Vector3d(4.8, 5.2, 5.5);
    c.weibull_shape = Eigen::Vector3d(1.01, 1.02, 1.04);
    c.censoring_rate = 0.5;
    c.beta = {Eigen::Vector3d(-0.06, 0.1, 0.5), Eigen::Vector3d(-0.05, 0.2, 0.2),
              Eigen::Vector3d(-0.03, 0.3, 0.3)};
    if (name == "paper-sec3") return c;
    if (name == "consistency") {
        c.K = 60;
        return c;
    }
    throw DomainError("unknown preset '" + name + "'");
}

Eigen::MatrixXd draw_frailties(const SimConfig& config, Rng& rng) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Ones(config.K, config.J);
    if (!config.frailty) return w;
    std::gamma_distribution<double> shared(config.nu0, 1.0);
    std::vector<std::gamma_distribution<double>> specific;
    for (int j = 0; j < config.J; ++j) specific.emplace_back(config.nu(j), 1.0);
    for (int k = 0; k < config.K; ++k) {
        const double z0 = shared(rng);
        for (int j = 0; j < config.J; ++j)
            w(k, j) = (z0 + specific[static_cast<std::size_t>(j)](rng)) / (config.nu0 + config.nu(j));
    }
    return w;
}

namespace {

double exponential(Rng& rng) { return -std::log(open_uniform(rng)); }

}  // namespace

CompetingRisksDataset simulate_dataset(const SimConfig& config, Rng& rng, Eigen::MatrixXd* frailties) {
    config.validate();
    const Eigen::MatrixXd w = draw_frailties(config, rng);
    if (frailties) *frailties = w;
    CompetingRisksDataset data;
    data.num_causes = config.J;
    data.covariate_names = SimConfig::covariate_names();
    std::uniform_real_distribution<double> age(10.0, 70.0);
    std::bernoulli_distribution stage(0.5);
    int id = 0;
    for (int k = 0; k < config.K; ++k) {
        for (int s = 0; s < config.n_per_cluster; ++s) {
            SurvivalRecord r;
            r.id = std::to_string(++id);
            r.cluster = k + 1;
            r.covariates = {age(rng), stage(rng) ? 1.0 : 0.0, stage(rng) ? 1.0 : 0.0};
            const Eigen::Map<const Eigen::Vector3d> x(r.covariates.data());
            double first = std::numeric_limits<double>::infinity();
            int cause = 0;
            for (int j = 0; j < config.J; ++j) {
                const double rate = w(k, j) * std::exp(config.beta[static_cast<std::size_t>(j)].dot(x));
                const double t = config.weibull_scale(j) *
                                 std::pow(exponential(rng) / rate, 1.0 / config.weibull_shape(j));
                if (t < first) {
                    first = t;
                    cause = j + 1;
                }
            }
            if (config.censoring_rate > 0.0) {
                const double c = exponential(rng) / config.censoring_rate;
                if (c < first) {
                    first = c;
                    cause = 0;
                }
            }
            r.time = first;
            r.status = cause;
            data.records.push_back(std::move(r));
        }
    }
    return data;
}

// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd parse_vector(const std::string& key, const std::string& value) {
    std::vector<double> out;
    for (const auto& field : split_csv_line(value)) {
        double v = 0.0;
        if (!parse_double(trim(field), v)) throw SchemaError("scenario key '" + key + "': bad number '" + field + "'");
        out.push_back(v);
    }
    return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

std::string join(const Eigen::VectorXd& v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v(i));
    return s;
}

}  // namespace

SimConfig parse_scenario(const std::string& text) {
    SimConfig c = preset("paper-sec3");
    std::map<int, Eigen::VectorXd> betas;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw SchemaError("scenario line " + std::to_string(line_no) + ": expected key = value");
        const std::string key(trim(body.substr(0, eq)));
        const std::string value(trim(body.substr(eq + 1)));
        auto integer = [&](int& out) {
            if (!parse_int(value, out)) throw SchemaError("scenario key '" + key + "': bad integer");
        };
        auto real = [&](double& out) {
            if (!parse_double(value, out)) throw SchemaError("scenario key '" + key + "': bad number");
        };
        if (key == "K") integer(c.K);
        else if (key == "J") integer(c.J);
        else if (key == "n_per_cluster") integer(c.n_per_cluster);
        else if (key == "nu0") real(c.nu0);
        else if (key == "nu") c.nu = parse_vector(key, value);
        else if (key == "weibull_scale") c.weibull_scale = parse_vector(key, value);
        else if (key == "weibull_shape") c.weibull_shape = parse_vector(key, value);
        else if (key == "censoring_rate") real(c.censoring_rate);
        else if (key == "frailty") {
            if (value != "true" && value != "false") throw SchemaError("scenario key 'frailty' must be true or false");
            c.frailty = value == "true";
        } else if (key == "seed") {
            try {
                std::size_t used = 0;
                c.seed = std::stoull(value, &used);
                if (used != value.size()) throw std::invalid_argument(value);
            } catch (const std::exception&) {
                throw SchemaError("scenario key 'seed': bad unsigned integer");
            }
        } else if (key.rfind("beta", 0) == 0) {
            int j = 0;
            if (!parse_int(key.substr(4), j) || j < 1) throw SchemaError("bad coefficient key '" + key + "'");
            betas[j] = parse_vector(key, value);
        } else {
            throw SchemaError("unknown scenario key '" + key + "'");
        }
    }
    if (!betas.empty()) {
        c.beta.assign(static_cast<std::size_t>(c.J), Eigen::VectorXd());
        for (const auto& [j, b] : betas) {
            if (j > c.J) throw SchemaError("coefficient key beta" + std::to_string(j) + " exceeds J");
            c.beta[static_cast<std::size_t>(j - 1)] = b;
        }
    }
    c.validate();
    return c;
}

SimConfig read_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str());
}

std::string write_scenario(const SimConfig& c) {
    std::ostringstream out;
    out << "K = " << c.K << "\nJ = " << c.J << "\nn_per_cluster = " << c.n_per_cluster
        << "\nnu0 = " << format_double(c.nu0) << "\nnu = " << join(c.nu)
        << "\nweibull_scale = " << join(c.weibull_scale) << "\nweibull_shape = " << join(c.weibull_shape)
        << "\ncensoring_rate = " << format_double(c.censoring_rate);
    for (std::size_t j = 0; j < c.beta.size(); ++j) out << "\nbeta" << j + 1 << " = " << join(c.beta[j]);
    out << "\nfrailty = " << (c.frailty ? "true" : "false") << "\nseed = " << c.seed << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------

CompetingRisksDataset simulate_planted(const PlantedConfig& config, Rng& rng) {
    if (config.n < 2 || config.J < 1) throw DomainError("planted data needs n >= 2 and J >= 1");
    if (!(config.cause1_rate > 0.0) || !(config.competing_rate >= 0.0) || !(config.censoring_rate >= 0.0))
        throw DomainError("planted rates must be non-negative (cause-1 rate positive)");
    const boost::math::normal standard;
    std::vector<double> thresholds;
    for (const auto& g : config.genes) {
        if (!(g.percentile > 0.0 && g.percentile < 1.0) || !(g.hazard_ratio > 0.0) ||
            !(g.frailty_variance_below >= 0.0))
            throw DomainError("invalid planted gene '" + g.name + "'");
        thresholds.push_back(boost::math::quantile(standard, g.percentile));
    }

    CompetingRisksDataset data;
    data.num_causes = config.J;
    data.covariate_names = {"age"};
    for (const auto& g : config.genes) data.genes[g.name];
    std::normal_distribution<double> expression(0.0, 1.0);
    std::uniform_real_distribution<double> age(10.0, 70.0);
    for (int i = 0; i < config.n; ++i) {
        SurvivalRecord r;
        r.id = std::to_string(i + 1);
        r.covariates = {age(rng)};
        double log_hr = config.age_effect * (r.covariates[0] - 40.0);
        double frailty = 1.0;
        for (std::size_t g = 0; g < config.genes.size(); ++g) {
            const double v = expression(rng);
            data.genes[config.genes[g].name].push_back(v);
            if (v >= thresholds[g]) {
                log_hr += std::log(config.genes[g].hazard_ratio);
            } else if (config.genes[g].frailty_variance_below > 0.0) {
                const double shape = 1.0 / config.genes[g].frailty_variance_below;
                frailty *= std::gamma_distribution<double>(shape, 1.0 / shape)(rng);
            }
        }
        double first = exponential(rng) / (config.cause1_rate * frailty * std::exp(log_hr));
        int cause = 1;
        for (int j = 2; j <= config.J && config.competing_rate > 0.0; ++j) {
            const double t = exponential(rng) / config.competing_rate;
            if (t < first) {
                first = t;
                cause = j;
            }
        }
        if (config.censoring_rate > 0.0) {
            const double c = exponential(rng) / config.censoring_rate;
            if (c < first) {
                first = c;
                cause = 0;
            }
        }
        r.time = first;
        r.status = cause;
        data.records.push_back(std::move(r));
    }
    return data;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, double>> true_parameters(const SimConfig& config) {
    std::vector<std::pair<std::string, double>> out;
    const auto& names = SimConfig::covariate_names();
    for (int j = 0; j < config.J; ++j)
        for (std::size_t p = 0; p < names.size(); ++p)
            out.emplace_back("beta" + std::to_string(j + 1) + "." + names[p],
                             config.beta[static_cast<std::size_t>(j)](static_cast<Eigen::Index>(p)));
    if (!config.frailty) return out;
    const auto m = frailty_moments<double>(config.nu0, config.nu);
    for (int j = 0; j < config.J; ++j) out.emplace_back("xi" + std::to_string(j + 1), m.variances(j));
    for (int a = 0; a < config.J; ++a)
        for (int b = a + 1; b < config.J; ++b)
            out.emplace_back("rho" + std::to_string(a + 1) + std::to_string(b + 1), m.correlations(a, b));
    return out;
}

namespace {

void add_cox_estimates(std::vector<Estimate>& out, const CoxFit& cox) {
    for (Eigen::Index k = 0; k < cox.beta.size(); ++k) {
        Estimate e;
        e.name = "beta" + std::to_string(cox.cause) + "." + cox.names[static_cast<std::size_t>(k)];
        e.value = cox.beta(k);
        const double se = cox.standard_errors(k);
        if (std::isfinite(se)) {
            e.lower = e.value - 1.959963984540054 * se;
            e.upper = e.value + 1.959963984540054 * se;
        }
        out.push_back(e);
    }
}

}  // namespace

NamedEstimator correlated_estimator(const CorrelatedFrailtyOptions& options) {
    return {"correlated", [options](const CompetingRisksDataset& data) {
                const auto fit = fit_correlated_frailty(data, options);
                std::vector<Estimate> out;
                for (const auto& cox : fit.causes) add_cox_estimates(out, cox);
                const auto J = fit.moments.variances.size();
                for (Eigen::Index j = 0; j < J; ++j)
                    out.push_back({"xi" + std::to_string(j + 1), fit.moments.variances(j)});
                for (Eigen::Index a = 0; a < J; ++a)
                    for (Eigen::Index b = a + 1; b < J; ++b)
                        out.push_back({"rho" + std::to_string(a + 1) + std::to_string(b + 1),
                                       fit.moments.correlations(a, b)});
                return out;
            }};
}

NamedEstimator independent_estimator(const SharedFrailtyOptions& options) {
    return {"independent", [options](const CompetingRisksDataset& data) {
                const auto fits = fit_independent_frailty(data, options);
                std::vector<Estimate> out;
                for (const auto& f : fits) add_cox_estimates(out, f.cox);
                for (const auto& f : fits) out.push_back({"xi" + std::to_string(f.cause), f.variance});
                return out;
            }};
}

ReplicateSummary replicate_study(const SimConfig& config, int replicates,
                                 std::span<const NamedEstimator> estimators, unsigned threads) {
    config.validate();
    if (replicates < 2) throw DomainError("a replicate study needs at least two replicates");
    if (estimators.empty()) throw DomainError("no estimators given");

    const std::size_t R = static_cast<std::size_t>(replicates);
    // results[e][r]: estimates or failure text
    std::vector<std::vector<std::optional<std::vector<Estimate>>>> results(
        estimators.size(), std::vector<std::optional<std::vector<Estimate>>>(R));
    std::vector<std::vector<std::string>> errors(estimators.size(), std::vector<std::string>(R));
    parallel_for(
        R,
        [&](std::size_t r) {
            Rng rng = make_substream(config.seed, r);
            const CompetingRisksDataset data = simulate_dataset(config, rng);
            for (std::size_t e = 0; e < estimators.size(); ++e) {
                try {
                    results[e][r] = estimators[e].fit(data);
                } catch (const Error& ex) {
                    errors[e][r] = std::string(ex.kind()) + ": " + ex.what();
                }
            }
        },
        threads);

    ReplicateSummary summary;
    summary.replicates = replicates;
    summary.seed = config.seed;
    const auto truth = true_parameters(config);
    for (std::size_t e = 0; e < estimators.size(); ++e) {
        const std::string& name = estimators[e].name;
        int failed = 0;
        std::map<std::string, std::vector<double>> values;
        std::map<std::string, std::pair<int, int>> covered;  // hits, intervals
        for (std::size_t r = 0; r < R; ++r) {
            if (!results[e][r]) {
                ++failed;
                summary.failure_messages[name].push_back("replicate " + std::to_string(r) + ": " +
                                                         errors[e][r]);
                continue;
            }
            for (const auto& est : *results[e][r]) values[est.name].push_back(est.value);
            for (const auto& est : *results[e][r]) {
                if (std::isnan(est.lower) || std::isnan(est.upper)) continue;
                for (const auto& [pname, t] : truth)
                    if (pname == est.name) {
                        auto& c = covered[est.name];
                        ++c.second;
                        if (est.lower <= t && t <= est.upper) ++c.first;
                    }
            }
        }
        summary.failures[name] = failed;
        for (const auto& [pname, t] : truth) {
            auto it = values.find(pname);
            if (it == values.end()) continue;
            ParameterSummary row;
            row.estimator = name;
            row.parameter = pname;
            row.metrics = empirical_metrics(it->second, t);
            if (auto c = covered.find(pname); c != covered.end() && c->second.second > 0)
                row.coverage = static_cast<double>(c->second.first) / c->second.second;
            summary.rows.push_back(row);
        }
        summary.estimates[name] = std::move(values);
    }
    return summary;
}

std::string summary_csv(const ReplicateSummary& summary) {
    std::ostringstream out;
    out << "estimator,parameter,truth,mean,median,bias,empse,rmse,coverage,count,failures\n";
    for (const auto& r : summary.rows) {
        const auto& m = r.metrics;
        out << r.estimator << ',' << r.parameter << ',' << format_double(m.truth) << ','
            << format_double(m.mean) << ',' << format_double(m.median) << ',' << format_double(m.bias)
            << ',' << format_double(m.empse) << ',' << format_double(m.rmse) << ','
            << format_double(r.coverage) << ',' << m.count << ',' << summary.failures.at(r.estimator)
            << '\n';
    }
    return out.str();
}

nlohmann::json to_json(const ReplicateSummary& summary) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : summary.rows) {
        nlohmann::json row = {{"estimator", r.estimator},
                              {"parameter", r.parameter},
                              {"truth", r.metrics.truth},
                              {"mean", r.metrics.mean},
                              {"median", r.metrics.median},
                              {"bias", r.metrics.bias},
                              {"empse", r.metrics.empse},
                              {"rmse", r.metrics.rmse},
                              {"count", r.metrics.count}};
        row["coverage"] = std::isnan(r.coverage) ? nlohmann::json(nullptr) : nlohmann::json(r.coverage);
        rows.push_back(row);
    }
    return {{"replicates", summary.replicates},
            {"seed", summary.seed},
            {"rows", rows},
            {"failures", summary.failures},
            {"failure_messages", summary.failure_messages}};
}

}  // namespace crfrail
