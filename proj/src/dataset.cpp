#include "crfrail/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "crfrail/error.hpp"
#include "crfrail/format.hpp"

namespace crfrail {

namespace {

std::string join_rows(const std::vector<std::size_t>& rows) {
    std::ostringstream out;
    const std::size_t shown = std::min<std::size_t>(rows.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) out << (i ? ", " : "") << rows[i];
    if (rows.size() > shown) out << ", ... (" << rows.size() << " rows)";
    return out.str();
}

std::size_t column_of(const std::vector<std::string>& header, const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

bool CompetingRisksDataset::has_clusters() const {
    return !records.empty() &&
           std::all_of(records.begin(), records.end(),
                       [](const SurvivalRecord& r) { return r.cluster.has_value(); });
}

int CompetingRisksDataset::num_clusters() const {
    int k = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].cluster)
            throw ValidationError("record " + std::to_string(i + 1) + " has no cluster label",
                                  {i + 1});
        k = std::max(k, *records[i].cluster);
    }
    return k;
}

Eigen::VectorXd CompetingRisksDataset::times() const {
    Eigen::VectorXd t(static_cast<Eigen::Index>(records.size()));
    for (std::size_t i = 0; i < records.size(); ++i) t(static_cast<Eigen::Index>(i)) = records[i].time;
    return t;
}

Eigen::VectorXi CompetingRisksDataset::statuses() const {
    Eigen::VectorXi s(static_cast<Eigen::Index>(records.size()));
    for (std::size_t i = 0; i < records.size(); ++i) s(static_cast<Eigen::Index>(i)) = records[i].status;
    return s;
}

Eigen::VectorXi CompetingRisksDataset::clusters() const {
    Eigen::VectorXi c(static_cast<Eigen::Index>(records.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].cluster)
            throw ValidationError("record " + std::to_string(i + 1) + " has no cluster label",
                                  {i + 1});
        c(static_cast<Eigen::Index>(i)) = *records[i].cluster;
    }
    return c;
}

std::size_t CompetingRisksDataset::covariate_index(const std::string& name) const {
    auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
    if (it == covariate_names.end()) throw SchemaError("unknown covariate '" + name + "'");
    return static_cast<std::size_t>(it - covariate_names.begin());
}

Eigen::MatrixXd CompetingRisksDataset::covariate_matrix(std::span<const std::string> names) const {
    std::vector<std::size_t> columns;
    if (names.empty()) {
        columns.resize(covariate_names.size());
        std::iota(columns.begin(), columns.end(), std::size_t{0});
    } else {
        for (const auto& name : names) columns.push_back(covariate_index(name));
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()),
                      static_cast<Eigen::Index>(columns.size()));
    for (std::size_t i = 0; i < records.size(); ++i)
        for (std::size_t c = 0; c < columns.size(); ++c)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                records[i].covariates[columns[c]];
    return x;
}

const std::vector<double>& CompetingRisksDataset::gene(const std::string& name) const {
    auto it = genes.find(name);
    if (it == genes.end()) throw SchemaError("unknown gene '" + name + "'");
    return it->second;
}

std::size_t CompetingRisksDataset::event_count(int cause) const {
    return static_cast<std::size_t>(std::count_if(
        records.begin(), records.end(), [cause](const SurvivalRecord& r) { return r.status == cause; }));
}

void CompetingRisksDataset::validate() const {
    if (num_causes < 1) throw ValidationError("number of causes must be at least 1");
    std::vector<std::size_t> bad_time, bad_status, bad_cov, missing_cluster;
    std::set<int> labels;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!(r.time > 0.0) || !std::isfinite(r.time)) bad_time.push_back(i + 1);
        if (r.status < 0 || r.status > num_causes) bad_status.push_back(i + 1);
        if (r.covariates.size() != covariate_names.size() ||
            !std::all_of(r.covariates.begin(), r.covariates.end(),
                         [](double v) { return std::isfinite(v); }))
            bad_cov.push_back(i + 1);
        if (r.cluster) labels.insert(*r.cluster);
        else missing_cluster.push_back(i + 1);
    }
    if (!bad_time.empty())
        throw ValidationError("non-positive time in rows " + join_rows(bad_time), bad_time);
    if (!bad_status.empty())
        throw ValidationError("status outside 0.." + std::to_string(num_causes) + " in rows " +
                                  join_rows(bad_status),
                              bad_status);
    if (!bad_cov.empty())
        throw ValidationError("bad covariates in rows " + join_rows(bad_cov), bad_cov);
    if (!labels.empty()) {
        if (!missing_cluster.empty())
            throw ValidationError("missing cluster label in rows " + join_rows(missing_cluster),
                                  missing_cluster);
        if (*labels.begin() != 1 || *labels.rbegin() != static_cast<int>(labels.size()))
            throw ValidationError("cluster labels must form the contiguous set 1..K");
    }
    for (const auto& [name, values] : genes) {
        if (values.size() != records.size())
            throw ValidationError("gene '" + name + "' length does not match record count");
        for (std::size_t i = 0; i < values.size(); ++i)
            if (!std::isfinite(values[i]))
                throw ValidationError("gene '" + name + "' has a non-finite value in row " +
                                          std::to_string(i + 1),
                                      {i + 1});
    }
}

CompetingRisksDataset parse_csv(const std::string& text, const CsvSchema& schema) {
    if (schema.time_col.empty() || schema.status_col.empty())
        throw SchemaError("schema must name a time column and a status column");

    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty CSV input: header row required");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = std::string(trim(h));

    const std::size_t time_idx = column_of(header, schema.time_col);
    const std::size_t status_idx = column_of(header, schema.status_col);
    std::vector<std::size_t> cov_idx, gene_idx;
    for (const auto& c : schema.covariates) cov_idx.push_back(column_of(header, c));
    for (const auto& g : schema.genes) gene_idx.push_back(column_of(header, g));
    std::optional<std::size_t> cluster_idx, id_idx;
    if (schema.cluster_col) cluster_idx = column_of(header, *schema.cluster_col);
    if (schema.id_col) id_idx = column_of(header, *schema.id_col);

    CompetingRisksDataset data;
    data.covariate_names = schema.covariates;
    for (const auto& g : schema.genes) data.genes[g];

    std::vector<std::size_t> malformed, bad_time, bad_status;
    std::size_t line_no = 1;
    int max_status = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            malformed.push_back(line_no);
            continue;
        }
        SurvivalRecord r;
        bool ok = parse_double(fields[time_idx], r.time) && parse_int(fields[status_idx], r.status);
        r.covariates.resize(cov_idx.size());
        for (std::size_t c = 0; c < cov_idx.size(); ++c)
            ok = ok && parse_double(fields[cov_idx[c]], r.covariates[c]) &&
                 std::isfinite(r.covariates[c]);
        std::vector<double> gene_values(gene_idx.size());
        for (std::size_t g = 0; g < gene_idx.size(); ++g)
            ok = ok && parse_double(fields[gene_idx[g]], gene_values[g]) &&
                 std::isfinite(gene_values[g]);
        if (cluster_idx) {
            int label = 0;
            ok = ok && parse_int(fields[*cluster_idx], label);
            r.cluster = label;
        }
        if (!ok) {
            malformed.push_back(line_no);
            continue;
        }
        r.id = id_idx ? std::string(trim(fields[*id_idx])) : std::to_string(data.records.size() + 1);
        if (!(r.time > 0.0) || !std::isfinite(r.time)) bad_time.push_back(line_no);
        if (r.status < 0 || (schema.num_causes && r.status > *schema.num_causes))
            bad_status.push_back(line_no);
        max_status = std::max(max_status, r.status);
        for (std::size_t g = 0; g < gene_idx.size(); ++g)
            data.genes[schema.genes[g]].push_back(gene_values[g]);
        data.records.push_back(std::move(r));
    }
    if (!malformed.empty())
        throw ValidationError("non-numeric or missing required fields on lines " +
                                  join_rows(malformed),
                              malformed);
    if (!bad_time.empty())
        throw ValidationError("time must be positive; offending lines " + join_rows(bad_time),
                              bad_time);
    if (!bad_status.empty())
        throw ValidationError("status outside 0.." +
                                  std::to_string(schema.num_causes.value_or(0)) +
                                  "; offending lines " + join_rows(bad_status),
                              bad_status);
    data.num_causes = schema.num_causes.value_or(std::max(1, max_status));
    data.validate();
    return data;
}

CompetingRisksDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str(), schema);
}

CsvSchema save_csv(const CompetingRisksDataset& data, const std::filesystem::path& path) {
    CsvSchema schema;
    schema.id_col = "id";
    schema.time_col = "time";
    schema.status_col = "status";
    schema.covariates = data.covariate_names;
    for (const auto& [name, values] : data.genes) schema.genes.push_back(name);
    if (data.has_clusters()) schema.cluster_col = "cluster";
    schema.num_causes = data.num_causes;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "id,time,status";
    for (const auto& c : schema.covariates) out << ',' << c;
    for (const auto& g : schema.genes) out << ',' << g;
    if (schema.cluster_col) out << ",cluster";
    out << '\n';
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const auto& r = data.records[i];
        out << r.id << ',' << format_double(r.time) << ',' << r.status;
        for (double v : r.covariates) out << ',' << format_double(v);
        for (const auto& g : schema.genes) out << ',' << format_double(data.genes.at(g)[i]);
        if (schema.cluster_col) out << ',' << *r.cluster;
        out << '\n';
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
    return schema;
}

std::vector<int> dichotomize(std::span<const double> values, double cutoff) {
    std::vector<int> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(),
                   [cutoff](double v) { return v >= cutoff ? 1 : 0; });
    return out;
}

double quantile(std::span<const double> values, double probability) {
    if (values.empty()) throw DomainError("quantile of an empty sequence");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = (static_cast<double>(sorted.size()) - 1.0) * probability;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> cutoff_grid(std::span<const double> values, const GridSpec& grid) {
    if (values.empty()) throw DomainError("cutoff grid of an empty sequence");
    if (grid.points < 1) throw DomainError("cutoff grid needs at least one point");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) throw DomainError("all values identical: no valid partition");

    std::vector<double> cutoffs;
    cutoffs.reserve(static_cast<std::size_t>(grid.points));
    const double denom = grid.points + 1.0;
    if (grid.kind == GridKind::Percentile) {
        std::vector<double> sorted(values.begin(), values.end());
        std::sort(sorted.begin(), sorted.end());
        for (int k = 1; k <= grid.points; ++k) cutoffs.push_back(quantile(sorted, k / denom));
    } else {
        for (int k = 1; k <= grid.points; ++k)
            cutoffs.push_back(*lo + (*hi - *lo) * (k / denom));
    }
    return cutoffs;
}

namespace {

struct EventTable {
    std::vector<double> times;               // distinct event times
    std::vector<double> at_risk;             // n_i
    std::vector<double> all_events;          // d_i, any cause
    std::vector<std::vector<double>> cause;  // [cause-1][i]
};

EventTable event_table(const CompetingRisksDataset& data) {
    if (data.records.empty()) throw DomainError("empty dataset");
    std::vector<std::size_t> order(data.records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data.records[a].time < data.records[b].time;
    });

    EventTable table;
    table.cause.resize(static_cast<std::size_t>(data.num_causes));
    const std::size_t n = order.size();
    std::size_t i = 0;
    while (i < n) {
        const double t = data.records[order[i]].time;
        std::size_t j = i;
        std::vector<double> counts(static_cast<std::size_t>(data.num_causes), 0.0);
        double total = 0.0;
        for (; j < n && data.records[order[j]].time == t; ++j) {
            const int s = data.records[order[j]].status;
            if (s > 0) {
                counts[static_cast<std::size_t>(s - 1)] += 1.0;
                total += 1.0;
            }
        }
        if (total > 0.0) {
            table.times.push_back(t);
            table.at_risk.push_back(static_cast<double>(n - i));
            table.all_events.push_back(total);
            for (std::size_t c = 0; c < counts.size(); ++c) table.cause[c].push_back(counts[c]);
        }
        i = j;
    }
    return table;
}

}  // namespace

StepFunction kaplan_meier(const CompetingRisksDataset& data) {
    const EventTable table = event_table(data);
    StepFunction km;
    km.initial = 1.0;
    double s = 1.0;
    for (std::size_t i = 0; i < table.times.size(); ++i) {
        s *= 1.0 - table.all_events[i] / table.at_risk[i];
        km.breakpoints.push_back(table.times[i]);
        km.values.push_back(s);
    }
    return km;
}

StepFunction cumulative_incidence(const CompetingRisksDataset& data, int cause) {
    if (cause < 1 || cause > data.num_causes)
        throw DomainError("cause " + std::to_string(cause) + " outside 1.." +
                          std::to_string(data.num_causes));
    const EventTable table = event_table(data);
    const auto& d = table.cause[static_cast<std::size_t>(cause - 1)];
    StepFunction cif;
    double s_before = 1.0;
    double f = 0.0;
    for (std::size_t i = 0; i < table.times.size(); ++i) {
        f += s_before * d[i] / table.at_risk[i];
        s_before *= 1.0 - table.all_events[i] / table.at_risk[i];
        cif.breakpoints.push_back(table.times[i]);
        cif.values.push_back(f);
    }
    return cif;
}

std::vector<ClusterSummary> cluster_summaries(const CompetingRisksDataset& data,
                                              std::span<const CauseModel> models) {
    if (models.size() != static_cast<std::size_t>(data.num_causes))
        throw DomainError("need one fitted model per cause");
    const Eigen::VectorXi labels = data.clusters();
    const int k_count = labels.size() ? labels.maxCoeff() : 0;
    const auto n = static_cast<Eigen::Index>(data.size());
    for (const auto& m : models)
        if (m.linear_predictor.size() != n)
            throw DomainError("linear predictor length does not match record count");

    const int J = data.num_causes;
    std::vector<ClusterSummary> out(static_cast<std::size_t>(k_count));
    for (int k = 0; k < k_count; ++k) {
        out[static_cast<std::size_t>(k)].cluster = k + 1;
        out[static_cast<std::size_t>(k)].events = Eigen::VectorXi::Zero(J);
        out[static_cast<std::size_t>(k)].load = Eigen::VectorXd::Zero(J);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& s = out[static_cast<std::size_t>(labels(i) - 1)];
        const auto& r = data.records[static_cast<std::size_t>(i)];
        ++s.subjects;
        if (r.status > 0) ++s.events(r.status - 1);
        for (int j = 0; j < J; ++j) {
            const auto& m = models[static_cast<std::size_t>(j)];
            s.load(j) += m.cumulative_hazard(r.time) * std::exp(m.linear_predictor(i));
        }
    }
    return out;
}

}  // namespace crfrail
