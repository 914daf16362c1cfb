#include "crfrail/cli.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "crfrail/coxph.hpp"
#include "crfrail/dataset.hpp"
#include "crfrail/error.hpp"
#include "crfrail/format.hpp"
#include "crfrail/frailty.hpp"
#include "crfrail/pcombine.hpp"
#include "crfrail/simulate.hpp"
#include "crfrail/threshold.hpp"
#include "json.hpp"

#ifndef CRFRAIL_VERSION
#define CRFRAIL_VERSION "0.0.0"
#endif

namespace crfrail::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("SHA-256 unavailable");
    }
    char buffer[1 << 16];
    while (in) {
        in.read(buffer, sizeof buffer);
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buffer, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_DigestFinal_ex(ctx, digest, &length);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < length; ++i)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return hex.str();
}

namespace {

// ---------------------------------------------------------------------------
// Output handling

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

std::string num(double v) { return format_double(v); }

class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

    // Creates the directory and registers `name`; the caller writes the file.
    fs::path reserve(const std::string& name) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
        if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
        return dir_ / name;
    }

    void write(const std::string& name, const std::string& content) {
        const fs::path path = reserve(name);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + path.string() + "'");
        out << content;
        out.close();
        if (!out) throw IoError("failed writing '" + path.string() + "'");
    }

    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    const std::vector<std::string>& files() const { return files_; }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

struct RunContext {
    std::string subcommand;
    std::vector<std::string> args;
    json config = json::object();
    json inputs = json::array();
    std::optional<std::uint64_t> seed;

    void add_input(const std::string& path) {
        inputs.push_back({{"path", path}, {"sha256", sha256_file(path)}});
    }
};

void write_manifest(Outputs& outputs, const RunContext& ctx, double seconds) {
    std::vector<std::string> files = outputs.files();
    files.push_back("manifest.json");
    std::sort(files.begin(), files.end());
    json m = {{"tool", "crfrail"},
              {"version", CRFRAIL_VERSION},
              {"subcommand", ctx.subcommand},
              {"args", ctx.args},
              {"config", ctx.config},
              {"inputs", ctx.inputs},
              {"seed", ctx.seed ? json(*ctx.seed) : json(nullptr)},
              {"outputs", files},
              {"wall_clock_seconds", seconds}};
    outputs.write_json("manifest.json", m);
}

// ---------------------------------------------------------------------------
// Shared option groups

struct DataOptions {
    std::string path;
    std::string time_col = "time";
    std::string status_col = "status";
    std::vector<std::string> covariates;
    std::vector<std::string> genes;
    std::string cluster_col;
    std::string id_col;
    int causes = 0;

    void attach(CLI::App* app, bool positional = true) {
        if (positional) app->add_option("data", path, "input CSV file")->required();
        app->add_option("--time-col", time_col, "time column")->capture_default_str();
        app->add_option("--status-col", status_col, "status column (0 = censored)")->capture_default_str();
        app->add_option("--covariates", covariates, "covariate columns")->delimiter(',');
        app->add_option("--genes", genes, "gene expression columns")->delimiter(',');
        app->add_option("--cluster-col", cluster_col, "cluster label column (1..K)");
        app->add_option("--id-col", id_col, "subject identifier column");
        app->add_option("--causes", causes, "declared number of causes (default: max status)");
    }

    CompetingRisksDataset load(RunContext& ctx) const {
        CsvSchema schema;
        schema.time_col = time_col;
        schema.status_col = status_col;
        schema.covariates = covariates;
        schema.genes = genes;
        if (!cluster_col.empty()) schema.cluster_col = cluster_col;
        if (!id_col.empty()) schema.id_col = id_col;
        if (causes > 0) schema.num_causes = causes;
        ctx.add_input(path);
        ctx.config["data"] = {{"path", path},        {"time_col", time_col}, {"status_col", status_col},
                              {"covariates", covariates}, {"genes", genes},       {"cluster_col", cluster_col},
                              {"id_col", id_col},    {"causes", causes}};
        return load_csv(path, schema);
    }
};

struct ThresholdOptions {
    int cause = 1;
    std::string grid = "percentile";
    int points = 99;
    double min_fraction = 0.10;
    int min_events = 1;
    std::string combiner = "fisher";
    std::uint64_t mc = 10'000;
    std::uint64_t seed = 1;
    unsigned threads = 0;

    void attach(CLI::App* app, const std::string& default_grid) {
        grid = default_grid;
        app->add_option("--cause", cause, "cause of interest")->capture_default_str();
        app->add_option("--grid", grid, "cutoff grid: percentile | equal")->capture_default_str();
        app->add_option("--points", points, "interior grid points")->capture_default_str();
        app->add_option("--min-fraction", min_fraction, "minimum arm size as a fraction of n")->capture_default_str();
        app->add_option("--min-events", min_events, "minimum events of the cause per arm")->capture_default_str();
        app->add_option("--combiner", combiner, "combiner for the combined-p criterion")->capture_default_str();
        app->add_option("--mc", mc, "Monte-Carlo draws for the combined-p criterion")->capture_default_str();
        app->add_option("--seed", seed, "seed for Monte-Carlo calibration")->capture_default_str();
        app->add_option("--threads", threads, "worker threads (0 = CRFRAIL_THREADS or all cores)");
    }

    ThresholdModelConfig config(const std::vector<std::string>& covariates, RunContext& ctx) const {
        ThresholdModelConfig c;
        c.covariates = covariates;
        c.cause = cause;
        if (grid == "percentile") c.grid.kind = GridKind::Percentile;
        else if (grid == "equal") c.grid.kind = GridKind::EqualSpacing;
        else throw DomainError("unknown grid '" + grid + "' (expected percentile or equal)");
        c.grid.points = points;
        c.min_fraction = min_fraction;
        c.min_events = min_events;
        c.combiner = parse_combiner(combiner);
        c.monte_carlo = {mc, seed, threads};
        c.threads = threads;
        ctx.seed = seed;
        ctx.config["threshold"] = {{"cause", cause},         {"grid", grid},          {"points", points},
                                   {"min_fraction", min_fraction}, {"min_events", min_events},
                                   {"combiner", combiner},   {"mc", mc}};
        return c;
    }
};

SimConfig resolve_scenario(const std::string& preset_name, const std::string& scenario,
                           std::optional<std::uint64_t> seed, RunContext& ctx) {
    SimConfig config;
    if (!scenario.empty()) {
        if (!preset_name.empty()) throw DomainError("give either --preset or --scenario, not both");
        ctx.add_input(scenario);
        config = read_scenario(scenario);
    } else {
        config = preset(preset_name.empty() ? "paper-sec3" : preset_name);
    }
    if (seed) config.seed = *seed;
    ctx.seed = config.seed;
    ctx.config["scenario"] = write_scenario(config);
    return config;
}

// ---------------------------------------------------------------------------
// Report writers

std::string step_csv(const StepFunction& f) {
    std::string s = "time,value\n";
    for (std::size_t i = 0; i < f.size(); ++i) s += num(f.breakpoints[i]) + "," + num(f.values[i]) + "\n";
    return s;
}

std::string table5_csv(const std::vector<StepwiseResult>& rows, std::size_t genes) {
    std::string s = "start,ordering";
    for (std::size_t g = 1; g <= genes; ++g) s += ",cutoff" + std::to_string(g);
    s += "\n";
    for (const auto& r : rows) {
        std::string ordering;
        for (std::size_t g = 0; g < r.ordering.size(); ++g) ordering += (g ? "|" : "") + r.ordering[g];
        s += std::string(to_string(r.start)) + "," + csv_field(ordering);
        for (double c : r.cutoffs) s += "," + num(c);
        s += "\n";
    }
    return s;
}

std::string scan_series_csv(const ThresholdScanResult& scan, const std::vector<double>& values) {
    struct Row {
        double cutoff;
        std::string p, v, status;
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < scan.cutoffs.size(); ++i)
        rows.push_back({scan.cutoffs[i], num(scan.p_values[i]),
                        scan.frailty_variances ? num((*scan.frailty_variances)[i]) : "", "ok"});
    for (const auto& e : scan.excluded) rows.push_back({e.cutoff, "", "", "excluded: " + e.reason});
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.cutoff < b.cutoff; });
    std::string s = "index,percentile,cutoff,p_value,frailty_variance,status\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto below = std::count_if(values.begin(), values.end(), [&](double x) { return x < rows[i].cutoff; });
        const double pct = 100.0 * static_cast<double>(below) / static_cast<double>(values.size());
        s += std::to_string(i + 1) + "," + num(pct) + "," + num(rows[i].cutoff) + "," + rows[i].p + "," +
             rows[i].v + "," + csv_field(rows[i].status) + "\n";
    }
    return s;
}

std::string partitions_csv(const std::vector<PartitionVariance>& rows) {
    std::string s = "position,gene,cutoff,lower_fvar,upper_fvar,note\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        s += std::to_string(i + 1) + "," + csv_field(r.gene) + "," + num(r.cutoff) + "," +
             (r.lower_fvar ? num(*r.lower_fvar) : "") + "," + (r.upper_fvar ? num(*r.upper_fvar) : "") + "," +
             csv_field(r.note) + "\n";
    }
    return s;
}

std::string replicate_table(const ReplicateSummary& summary, const std::string& estimator,
                            const std::string& prefix_filter) {
    std::string s = "parameter,truth,mean,median,bias,empse,rmse,coverage,count\n";
    for (const auto& r : summary.rows) {
        if (r.estimator != estimator) continue;
        const bool is_rho = r.parameter.rfind("rho", 0) == 0;
        if (prefix_filter == "rho" ? !is_rho : is_rho) continue;
        const auto& m = r.metrics;
        s += r.parameter + "," + num(m.truth) + "," + num(m.mean) + "," + num(m.median) + "," + num(m.bias) +
             "," + num(m.empse) + "," + num(m.rmse) + "," + (std::isnan(r.coverage) ? std::string() : num(r.coverage)) + "," + std::to_string(m.count) + "\n";
    }
    return s;
}

// ---------------------------------------------------------------------------

int exit_code_for(const Error& e) {
    const std::string kind = e.kind();
    if (kind == "io") return kIo;
    if (kind == "schema" || kind == "validation") return kInvalidInput;
    if (kind == "numerical" || kind == "convergence" || kind == "domain") return kNumerical;
    return kOther;
}

void report_error(std::ostream& err, const std::string& kind, const std::string& message, int code,
                  const json& extra = json::object()) {
    json j = {{"error", kind}, {"message", message}, {"exit_code", code}};
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    err << j.dump() << "\n";
}

std::vector<std::string> replace_out(std::vector<std::string> args, const std::string& out) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--out" && i + 1 < args.size()) {
            args[i + 1] = out;
            return args;
        }
        if (args[i].rfind("--out=", 0) == 0) {
            args[i] = "--out=" + out;
            return args;
        }
    }
    args.push_back("--out");
    args.push_back(out);
    return args;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Competing-risks frailty models, p-value combination and biomarker thresholds", "crfrail"};
    app.require_subcommand(1);
    app.set_version_flag("--version", CRFRAIL_VERSION);

    std::string out_dir;
    auto add_out = [&](CLI::App* sub, bool required = true) {
        auto* opt = sub->add_option("--out", out_dir, "output directory");
        if (required) opt->required();
    };

    // simulate
    auto* simulate = app.add_subcommand("simulate", "simulate clustered competing-risks data");
    std::string preset_name, scenario;
    std::optional<std::uint64_t> seed_opt;
    simulate->add_option("--preset", preset_name, "paper-sec3 | consistency");
    simulate->add_option("--scenario", scenario, "key = value scenario file");
    simulate->add_option("--seed", seed_opt, "master seed (overrides the scenario)");
    std::vector<std::string> planted_specs;
    int planted_n = 500;
    simulate->add_option("--planted", planted_specs,
                         "planted genes NAME=percentile:hr[:fvar_below], e.g. HER2=0.6:2")
        ->delimiter(',');
    simulate->add_option("--n", planted_n, "subjects for planted data")->capture_default_str();
    add_out(simulate);

    // fit-cox
    auto* fitcox = app.add_subcommand("fit-cox", "cause-specific Cox models");
    DataOptions data_opts;
    int cause = 0;
    int max_iter = 100;
    data_opts.attach(fitcox);
    fitcox->add_option("--cause", cause, "cause to fit (0 = every cause)")->capture_default_str();
    fitcox->add_option("--max-iter", max_iter, "Newton iterations")->capture_default_str();
    add_out(fitcox);

    // fit-frailty
    auto* fitfrailty = app.add_subcommand("fit-frailty", "correlated gamma frailty competing-risks model");
    int bootstrap = 0;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    double tolerance = 1e-6;
    int em_iter = 500;
    data_opts.attach(fitfrailty);
    fitfrailty->add_option("--bootstrap", bootstrap, "cluster bootstrap replicates (0 = none)")->capture_default_str();
    fitfrailty->add_option("--seed", seed, "bootstrap seed")->capture_default_str();
    fitfrailty->add_option("--threads", threads, "worker threads");
    fitfrailty->add_option("--tolerance", tolerance, "EM log-likelihood tolerance")->capture_default_str();
    fitfrailty->add_option("--max-iter", em_iter, "EM iterations")->capture_default_str();
    add_out(fitfrailty);

    // fit-frailty-independent
    auto* fitind = app.add_subcommand("fit-frailty-independent", "independent gamma frailty per cause");
    data_opts.attach(fitind);
    fitind->add_option("--tolerance", tolerance, "EM log-likelihood tolerance")->capture_default_str();
    add_out(fitind);

    // combine-p
    auto* combine = app.add_subcommand("combine-p", "combine independent p-values");
    std::string method = "fisher";
    std::uint64_t draws = 100'000;
    std::vector<double> pvalues;
    combine->add_option("--method", method, "fisher | pearson | mudholkar-george | edgington | tippett")
        ->capture_default_str();
    combine->add_option("--m", draws, "Monte-Carlo draws")->capture_default_str();
    combine->add_option("--seed", seed, "Monte-Carlo seed")->capture_default_str();
    combine->add_option("--threads", threads, "worker threads");
    combine->add_option("pvalues", pvalues, "p-values")->required();
    add_out(combine, false);

    // threshold-scan
    auto* scan = app.add_subcommand("threshold-scan", "single-gene cutoff scan");
    ThresholdOptions thr;
    std::string gene, criterion = "max-fvar";
    data_opts.attach(scan);
    thr.attach(scan, "percentile");
    scan->add_option("--gene", gene, "gene to scan")->required();
    scan->add_option("--criterion", criterion, "min-p | max-fvar | min-fvar | combined-p")->capture_default_str();
    add_out(scan);

    // threshold-stepwise
    auto* stepwise = app.add_subcommand("threshold-stepwise", "stepwise multi-gene cutoff search");
    ThresholdOptions thr_step;
    std::vector<std::string> starts{"Q2"};
    bool all_orders = false;
    std::size_t budget = 1000;
    data_opts.attach(stepwise, true);
    thr_step.attach(stepwise, "equal");
    stepwise->add_option("--starts", starts, "starting quartiles")->delimiter(',');
    stepwise->add_flag("--all-orders", all_orders, "run every ordering of the genes");
    stepwise->add_option("--budget", budget, "maximum stepwise runs")->capture_default_str();
    add_out(stepwise);

    // validate-partitions
    auto* validate = app.add_subcommand("validate-partitions", "shared-frailty variances below and above cutoffs");
    std::vector<std::string> cutoff_specs;
    std::string distribution = "gamma";
    data_opts.attach(validate);
    validate->add_option("--cutoffs", cutoff_specs, "GENE=value pairs")->delimiter(',')->required();
    validate->add_option("--distribution", distribution, "gamma | lognormal")->capture_default_str();
    validate->add_option("--cause", cause, "cause of interest");
    add_out(validate);

    // cif
    auto* cif = app.add_subcommand("cif", "Aalen-Johansen cumulative incidence curves");
    data_opts.attach(cif);
    add_out(cif);

    // replicate-study
    auto* replicate = app.add_subcommand("replicate-study", "simulation study of the frailty estimators");
    int reps = 50;
    std::vector<std::string> estimators{"correlated", "independent"};
    replicate->add_option("--preset", preset_name, "paper-sec3 | consistency");
    replicate->add_option("--scenario", scenario, "key = value scenario file");
    replicate->add_option("--reps", reps, "replicates")->capture_default_str();
    replicate->add_option("--seed", seed_opt, "master seed");
    replicate->add_option("--estimators", estimators, "correlated, independent")->delimiter(',');
    replicate->add_option("--threads", threads, "worker threads");
    add_out(replicate);

    // replay
    auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
    std::string manifest_path;
    replay->add_option("manifest", manifest_path, "manifest.json")->required();
    replay->add_option("--out", out_dir, "output directory (default: the recorded one)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        report_error(err, "usage", e.what(), kUsage);
        return kUsage;
    }

    const auto started = std::chrono::steady_clock::now();
    RunContext ctx;
    ctx.args = args;
    try {
        if (replay->parsed()) {
            std::ifstream in(manifest_path);
            if (!in) throw IoError("cannot open '" + manifest_path + "'");
            json m;
            try {
                m = json::parse(in);
            } catch (const json::exception& e) {
                throw SchemaError(std::string("manifest is not valid JSON: ") + e.what());
            }
            if (!m.contains("args") || !m["args"].is_array()) throw SchemaError("manifest has no args");
            for (const auto& input : m.value("inputs", json::array())) {
                const std::string path = input.at("path");
                if (sha256_file(path) != input.at("sha256").get<std::string>())
                    throw ValidationError("input '" + path + "' changed since the recorded run");
            }
            auto recorded = m["args"].get<std::vector<std::string>>();
            if (!out_dir.empty()) recorded = replace_out(recorded, out_dir);
            return run(recorded, out, err);
        }

        Outputs outputs(out_dir);
        CLI::App* active = app.get_subcommands().front();
        ctx.subcommand = active->get_name();

        if (simulate->parsed()) {
          if (!planted_specs.empty()) {
            PlantedConfig config;
            config.n = planted_n;
            for (const auto& spec : planted_specs) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos) throw DomainError("planted gene '" + spec + "' is not NAME=percentile:hr");
                PlantedGene g;
                g.name = spec.substr(0, eq);
                std::vector<double> parts;
                std::stringstream fields(spec.substr(eq + 1));
                for (std::string f; std::getline(fields, f, ':');) {
                    double v = 0.0;
                    if (!parse_double(f, v)) throw DomainError("planted gene '" + spec + "': bad number '" + f + "'");
                    parts.push_back(v);
                }
                if (parts.size() < 2 || parts.size() > 3)
                    throw DomainError("planted gene '" + spec + "' is not NAME=percentile:hr[:fvar_below]");
                g.percentile = parts[0];
                g.hazard_ratio = parts[1];
                if (parts.size() == 3) g.frailty_variance_below = parts[2];
                config.genes.push_back(g);
            }
            const std::uint64_t s = seed_opt.value_or(1);
            ctx.seed = s;
            ctx.config["planted"] = {{"genes", planted_specs}, {"n", planted_n}};
            Rng rng(s);
            save_csv(simulate_planted(config, rng), outputs.reserve("data.csv"));
          } else {
            const SimConfig config = resolve_scenario(preset_name, scenario, seed_opt, ctx);
            Rng rng(config.seed);
            Eigen::MatrixXd w;
            const CompetingRisksDataset data = simulate_dataset(config, rng, &w);
            save_csv(data, outputs.reserve("data.csv"));
            std::string frail = "cluster";
            for (Eigen::Index j = 0; j < w.cols(); ++j) frail += ",w" + std::to_string(j + 1);
            frail += "\n";
            for (Eigen::Index k = 0; k < w.rows(); ++k) {
                frail += std::to_string(k + 1);
                for (Eigen::Index j = 0; j < w.cols(); ++j) frail += "," + num(w(k, j));
                frail += "\n";
            }
            outputs.write("frailties.csv", frail);
            outputs.write("scenario.txt", write_scenario(config));
          }
        } else if (fitcox->parsed()) {
            const auto data = data_opts.load(ctx);
            FitOptions opts;
            opts.max_iterations = max_iter;
            json fits = json::array();
            for (int j = 1; j <= data.num_causes; ++j) {
                if (cause != 0 && j != cause) continue;
                fits.push_back(to_json(fit_cox(data, j, data_opts.covariates, opts)));
            }
            if (fits.empty()) throw DomainError("cause " + std::to_string(cause) + " is not in the data");
            ctx.config["cause"] = cause;
            outputs.write_json("cox.json", fits);
        } else if (fitfrailty->parsed()) {
            const auto data = data_opts.load(ctx);
            CorrelatedFrailtyOptions opts;
            opts.covariates = data_opts.covariates;
            opts.tolerance = tolerance;
            opts.max_iterations = em_iter;
            auto fit = fit_correlated_frailty(data, opts);
            if (bootstrap > 0) {
                ctx.seed = seed;
                fit.intervals = standard_errors(fit, data, opts, {bootstrap, seed, 0.95, threads});
            }
            ctx.config["em"] = {{"tolerance", tolerance}, {"max_iter", em_iter}, {"bootstrap", bootstrap}};
            outputs.write_json("frailty.json", to_json(fit));
            std::string post = "cluster,shared";
            for (int j = 1; j <= data.num_causes; ++j) post += ",specific" + std::to_string(j);
            post += "\n";
            for (Eigen::Index k = 0; k < fit.posterior_shared.size(); ++k) {
                post += std::to_string(k + 1) + "," + num(fit.posterior_shared(k));
                for (Eigen::Index j = 0; j < fit.posterior_specific.cols(); ++j) post += "," + num(fit.posterior_specific(k, j));
                post += "\n";
            }
            outputs.write("posterior.csv", post);
            std::string trace = "iteration,loglik\n";
            for (std::size_t i = 0; i < fit.loglik_trace.size(); ++i)
                trace += std::to_string(i) + "," + num(fit.loglik_trace[i]) + "\n";
            outputs.write("trace.csv", trace);
        } else if (fitind->parsed()) {
            const auto data = data_opts.load(ctx);
            SharedFrailtyOptions opts;
            opts.covariates = data_opts.covariates;
            opts.tolerance = tolerance;
            json fits = json::array();
            for (const auto& f : fit_independent_frailty(data, opts)) fits.push_back(to_json(f));
            outputs.write_json("independent.json", fits);
        } else if (combine->parsed()) {
            const CombinerKind kind = parse_combiner(method);
            ctx.seed = seed;
            const auto result = monte_carlo_pvalue(pvalues, kind, {draws, seed, threads});
            json j = to_json(result);
            j["method"] = to_string(kind);
            j["n"] = pvalues.size();
            j["seed"] = seed;
            if (kind == CombinerKind::Fisher) j["p_analytic"] = fisher_analytic(pvalues);
            ctx.config["combine"] = {{"method", to_string(kind)}, {"m", draws}, {"pvalues", pvalues}};
            out << j.dump() << "\n";
            if (!out_dir.empty()) outputs.write_json("combine.json", j);
        } else if (scan->parsed()) {
            const auto data = data_opts.load(ctx);
            const auto config = thr.config(data_opts.covariates, ctx);
            const auto crit = parse_criterion(criterion);
            ctx.config["gene"] = gene;
            ctx.config["criterion"] = criterion;
            const auto result = scan_single_gene(data, gene, crit, config);
            outputs.write_json("scan.json", to_json(result));
            outputs.write("scan_series.csv", scan_series_csv(result, data.gene(gene)));
        } else if (stepwise->parsed()) {
            const auto data = data_opts.load(ctx);
            if (data_opts.genes.empty()) throw DomainError("--genes is required");
            const auto config = thr_step.config(data_opts.covariates, ctx);
            std::vector<QuartileStart> qs;
            for (const auto& s : starts) qs.push_back(parse_start(s));
            ctx.config["stepwise"] = {{"starts", starts}, {"all_orders", all_orders}, {"budget", budget}};
            OrderingsReport report;
            std::optional<OrderingsBudgetError> overflow;
            if (all_orders) {
                try {
                    report = all_orderings(data, data_opts.genes, qs, config, budget);
                } catch (const OrderingsBudgetError& e) {
                    report = e.partial();
                    overflow = e;
                }
            } else {
                for (auto q : qs) report.rows.push_back(stepwise_multi_gene(data, data_opts.genes, q, config));
                for (const auto& row : report.rows)
                    for (std::size_t g = 0; g < row.ordering.size(); ++g) {
                        auto& seen = report.distinct_cutoffs[row.ordering[g]];
                        if (std::find(seen.begin(), seen.end(), row.cutoffs[g]) == seen.end()) seen.push_back(row.cutoffs[g]);
                    }
                for (auto& [g, seen] : report.distinct_cutoffs) std::sort(seen.begin(), seen.end());
            }
            outputs.write("table5.csv", table5_csv(report.rows, data_opts.genes.size()));
            json rows = json::array();
            for (const auto& r : report.rows) rows.push_back(to_json(r));
            outputs.write_json("stepwise.json", {{"rows", rows},
                                                 {"consistency", report.distinct_cutoffs},
                                                 {"complete", !overflow}});
            if (overflow) {
                write_manifest(outputs, ctx,
                               std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
                throw *overflow;
            }
        } else if (validate->parsed()) {
            const auto data = data_opts.load(ctx);
            std::vector<std::pair<std::string, double>> cutoffs;
            for (const auto& spec : cutoff_specs) {
                const auto eq = spec.find('=');
                double v = 0.0;
                if (eq == std::string::npos || !parse_double(spec.substr(eq + 1), v))
                    throw DomainError("cutoff '" + spec + "' is not GENE=value");
                cutoffs.emplace_back(spec.substr(0, eq), v);
            }
            ThresholdModelConfig config;
            config.covariates = data_opts.covariates;
            config.cause = cause == 0 ? 1 : cause;
            ctx.config["partitions"] = {{"cutoffs", cutoff_specs}, {"distribution", distribution}, {"cause", config.cause}};
            const auto rows = validate_partitions(data, cutoffs, parse_distribution(distribution), config);
            outputs.write("partitions.csv", partitions_csv(rows));
        } else if (cif->parsed()) {
            const auto data = data_opts.load(ctx);
            std::string all = "time,cif,cause\n";
            for (int j = 1; j <= data.num_causes; ++j) {
                const StepFunction curve = cumulative_incidence(data, j);
                outputs.write("cif_cause" + std::to_string(j) + ".csv", step_csv(curve));
                for (std::size_t i = 0; i < curve.size(); ++i)
                    all += num(curve.breakpoints[i]) + "," + num(curve.values[i]) + "," + std::to_string(j) + "\n";
            }
            outputs.write("cif.csv", all);
            outputs.write("survival.csv", step_csv(kaplan_meier(data)));
        } else if (replicate->parsed()) {
            const SimConfig config = resolve_scenario(preset_name, scenario, seed_opt, ctx);
            std::vector<NamedEstimator> chosen;
            for (const auto& e : estimators) {
                if (e == "correlated") chosen.push_back(correlated_estimator());
                else if (e == "independent") chosen.push_back(independent_estimator());
                else throw DomainError("unknown estimator '" + e + "'");
            }
            ctx.config["replicates"] = reps;
            ctx.config["estimators"] = estimators;
            const auto summary = replicate_study(config, reps, chosen, threads);
            outputs.write("summary.csv", summary_csv(summary));
            outputs.write_json("summary.json", to_json(summary));
            for (const auto& e : estimators) {
                const std::string tag = e == "correlated" ? "table1_correlated.csv" : "table2_independent.csv";
                outputs.write(tag, replicate_table(summary, e, "beta-xi"));
            }
            if (std::find(estimators.begin(), estimators.end(), "correlated") != estimators.end())
                outputs.write("table3_correlations.csv", replicate_table(summary, "correlated", "rho"));
        }

        if (!out_dir.empty())
            write_manifest(outputs, ctx, std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
        return kOk;
    } catch (const ValidationError& e) {
        report_error(err, e.kind(), e.what(), exit_code_for(e), {{"rows", e.rows()}});
        return exit_code_for(e);
    } catch (const ConvergenceError& e) {
        report_error(err, e.kind(), e.what(), exit_code_for(e), {{"trace", e.trace()}});
        return exit_code_for(e);
    } catch (const Error& e) {
        report_error(err, e.kind(), e.what(), exit_code_for(e));
        return exit_code_for(e);
    } catch (const std::exception& e) {
        report_error(err, "error", e.what(), kOther);
        return kOther;
    }
}

}  // namespace crfrail::cli
