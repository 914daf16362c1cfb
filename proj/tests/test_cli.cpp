#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "crfrail/cli.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using crfrail::cli::run;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result call(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("crfrail_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

}  // namespace

TEST_CASE("cif on the three-subject example") {
    const auto dir = scratch("cif");
    write(dir / "data.csv", "t,s\n1,1\n2,2\n3,0\n");
    const auto before = crfrail::cli::sha256_file(dir / "data.csv");
    const auto r = call({"cif", "--time-col", "t", "--status-col", "s", (dir / "data.csv").string(), "--out",
                         (dir / "out").string()});
    REQUIRE(r.code == 0);
    CHECK(slurp(dir / "out" / "cif_cause1.csv") == "time,value\n1,0.3333333333333333\n2,0.3333333333333333\n");
    const std::string all = slurp(dir / "out" / "cif.csv");
    CHECK(all.rfind("time,cif,cause\n", 0) == 0);
    std::istringstream lines(all);
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) {
        const int cause = std::stoi(line.substr(line.rfind(',') + 1));
        CHECK((cause == 1 || cause == 2));
    }
    CHECK(fs::exists(dir / "out" / "survival.csv"));
    CHECK(crfrail::cli::sha256_file(dir / "data.csv") == before);

    const auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
    CHECK(manifest["subcommand"] == "cif");
    CHECK(manifest["inputs"][0]["sha256"] == before);
    for (const auto& f : manifest["outputs"]) CHECK(fs::exists(dir / "out" / f.get<std::string>()));
    CHECK(manifest["outputs"].size() == 5);
}

TEST_CASE("combine-p prints JSON") {
    const auto r = call({"combine-p", "--method", "tippett", "--m", "100000", "0.3"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["p_mc"].get<double>() == doctest::Approx(0.3).epsilon(0.03));
    const auto f = nlohmann::json::parse(call({"combine-p", "--method", "fisher", "--seed", "42", "0.05", "0.05"}).out);
    CHECK(f.contains("p_analytic"));
    CHECK(f["statistic"].get<double>() == doctest::Approx(2 * std::log(0.05)));
}

TEST_CASE("replicate-study is byte-identical across runs and thread counts") {
    const auto dir = scratch("reps");
    const std::vector<std::string> base{"replicate-study", "--preset", "paper-sec3", "--reps", "50", "--seed", "7"};
    auto a = base, b = base;
    a.insert(a.end(), {"--out", (dir / "a").string(), "--threads", "1"});
    b.insert(b.end(), {"--out", (dir / "b").string(), "--threads", "3"});
    REQUIRE(call(a).code == 0);
    REQUIRE(call(b).code == 0);
    for (const char* f : {"summary.csv", "summary.json", "table1_correlated.csv", "table2_independent.csv",
                          "table3_correlations.csv"})
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
}

TEST_CASE("replay reproduces outputs") {
    const auto dir = scratch("replay");
    REQUIRE(call({"simulate", "--preset", "consistency", "--seed", "3", "--out", (dir / "sim").string()}).code == 0);
    const auto data = (dir / "sim" / "data.csv").string();
    REQUIRE(call({"fit-cox", data, "--covariates", "age,tstage,nstage", "--out", (dir / "cox").string()}).code == 0);
    REQUIRE(call({"replay", (dir / "cox" / "manifest.json").string(), "--out", (dir / "cox2").string()}).code == 0);
    CHECK(slurp(dir / "cox" / "cox.json") == slurp(dir / "cox2" / "cox.json"));
    REQUIRE(call({"replay", (dir / "sim" / "manifest.json").string(), "--out", (dir / "sim2").string()}).code == 0);
    for (const char* f : {"data.csv", "frailties.csv", "scenario.txt"})
        CHECK(slurp(dir / "sim" / f) == slurp(dir / "sim2" / f));

    // A changed input is refused.
    write(dir / "sim" / "data.csv", slurp(dir / "sim" / "data.csv") + "\n");
    CHECK(call({"replay", (dir / "cox" / "manifest.json").string(), "--out", (dir / "cox3").string()}).code == 4);
}

TEST_CASE("exit codes and error JSON") {
    const auto dir = scratch("errors");
    auto r = call({"fit-cox", "--bogus"});
    CHECK(r.code == crfrail::cli::kUsage);
    CHECK(nlohmann::json::parse(r.err)["error"] == "usage");
    CHECK(call({"nonsense"}).code == crfrail::cli::kUsage);

    r = call({"fit-cox", (dir / "missing.csv").string(), "--out", dir.string()});
    CHECK(r.code == crfrail::cli::kIo);
    CHECK(nlohmann::json::parse(r.err)["error"] == "io");

    write(dir / "bad.csv", "time,status\n1,1\n-1,0\n");
    r = call({"fit-cox", (dir / "bad.csv").string(), "--out", dir.string()});
    CHECK(r.code == crfrail::cli::kInvalidInput);
    CHECK(nlohmann::json::parse(r.err)["rows"][0] == 3);

    r = call({"fit-cox", (dir / "bad.csv").string(), "--covariates", "nope", "--out", dir.string()});
    CHECK(r.code == crfrail::cli::kInvalidInput);

    CHECK(call({"combine-p", "--method", "fisher", "1"}).code == crfrail::cli::kNumerical);
}

TEST_CASE("stepwise emits a header-only table when no row fits the budget") {
    const auto dir = scratch("stepwise");
    REQUIRE(call({"simulate", "--planted", "A=0.6:2,B=0.4:1", "--n", "300", "--out", (dir / "sim").string()}).code == 0);
    const auto data = (dir / "sim" / "data.csv").string();
    const auto r = call({"threshold-stepwise", data, "--genes", "A,B", "--covariates", "age", "--all-orders",
                         "--budget", "0", "--out", (dir / "empty").string()});
    CHECK(r.code == crfrail::cli::kNumerical);
    CHECK(slurp(dir / "empty" / "table5.csv") == "start,ordering,cutoff1,cutoff2\n");

    REQUIRE(call({"threshold-stepwise", data, "--genes", "A,B", "--covariates", "age", "--starts", "Q1,Q3",
                  "--all-orders", "--points", "9", "--out", (dir / "full").string()})
                .code == 0);
    const auto table = slurp(dir / "full" / "table5.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 5);
}

TEST_CASE("threshold-scan and validate-partitions outputs") {
    const auto dir = scratch("scan");
    REQUIRE(call({"simulate", "--planted", "G=0.6:2:1", "--n", "300", "--out", (dir / "sim").string()}).code == 0);
    const auto data = (dir / "sim" / "data.csv").string();
    REQUIRE(call({"threshold-scan", data, "--gene", "G", "--genes", "G", "--covariates", "age", "--criterion", "min-p",
                  "--out", (dir / "scan").string()})
                .code == 0);
    const auto series = slurp(dir / "scan" / "scan_series.csv");
    CHECK(series.rfind("index,percentile,cutoff,p_value,frailty_variance,status\n", 0) == 0);
    CHECK(std::count(series.begin(), series.end(), '\n') == 100);

    REQUIRE(call({"validate-partitions", data, "--genes", "G", "--covariates", "age", "--cutoffs", "G=0.1",
                  "--distribution", "gaussian", "--out", (dir / "vp").string()})
                .code == 0);
    CHECK(slurp(dir / "vp" / "partitions.csv").rfind("position,gene,cutoff,lower_fvar,upper_fvar,note\n1,G,0.1,", 0) == 0);
}
