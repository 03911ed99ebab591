#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dpl/errors.hpp"
#include "dpl/experiment.hpp"

using namespace dpl;
using namespace dpl::experiment;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path tmp_dir() {
    const auto dir = fs::temp_directory_path() / "dpl_test_out";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("format_g17 round-trips doubles") {
    for (double v : {1.0 / 3.0, 5.4119590954264772, 1e-300, 12345.678901234567}) {
        const std::string s = format_g17(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
}

TEST_CASE("flow experiment writes the declared schema and passes identities") {
    ExperimentConfig cfg;
    cfg.command = "flow";
    cfg.b = 2;
    cfg.r = 0.0;
    cfg.depth = 300;
    cfg.out = (tmp_dir() / "flow.csv").string();
    const auto rec = run(cfg);
    CHECK(rec.all_checks_pass());
    CHECK(rec.metrics.at("R").value == doctest::Approx(5.4119590954).epsilon(1e-8));

    const std::string csv = slurp(cfg.out);
    CHECK(csv.rfind("k,R,Rprime,R3,R4\n", 0) == 0);
    CHECK(csv.find("\r") == std::string::npos);  // LF endings
    CHECK(fs::exists(cfg.out + ".meta.json"));
}

TEST_CASE("determinism: identical config and seed give identical bytes") {
    for (const char* fmt : {"csv", "json"}) {
        ExperimentConfig cfg;
        cfg.command = "polymer-sim";
        cfg.b = 2;
        cfg.n = 4;
        cfg.r = -2.0;
        cfg.samples = 500;
        cfg.seed = 42;
        cfg.format = fmt;
        cfg.out = (tmp_dir() / (std::string("p1.") + fmt)).string();
        cfg.threads = 1;
        run(cfg);
        const std::string first = slurp(cfg.out);

        cfg.out = (tmp_dir() / (std::string("p2.") + fmt)).string();
        cfg.threads = 4;
        run(cfg);
        CHECK(first == slurp(cfg.out));
    }
}

TEST_CASE("correlation-check passes at the spec tolerances") {
    ExperimentConfig cfg;
    cfg.command = "correlation-check";
    cfg.b = 2;
    cfg.n = 2;
    cfg.r = 0.0;
    cfg.out = (tmp_dir() / "corr.csv").string();
    const auto rec = run(cfg);
    CHECK(rec.all_checks_pass());
    CHECK(rec.metrics.at("mass_identity_rel_dev").value <= 1e-9);
    const std::string csv = slurp(cfg.out);
    CHECK(csv.rfind("p_index,q_index,xi,mass\n", 0) == 0);
}

TEST_CASE("intersections-sim emits one row per run") {
    ExperimentConfig cfg;
    cfg.command = "intersections-sim";
    cfg.b = 2;
    cfg.r = 0.0;
    cfg.n = 20;
    cfg.runs = 50;
    cfg.seed = 7;
    cfg.out = (tmp_dir() / "inter.csv").string();
    const auto rec = run(cfg);
    CHECK(rec.all_checks_pass());
    const std::string csv = slurp(cfg.out);
    CHECK(csv.rfind("b,r,n,run,xi_tilde,xi_total,m_tilde,m_total\n", 0) == 0);
    std::size_t lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 51);  // header + 50 rows
}

TEST_CASE("hausdorff and energy schemas") {
    ExperimentConfig cfg;
    cfg.command = "hausdorff";
    cfg.b = 2;
    cfg.r = 0.0;
    cfg.n_values = {10, 20};
    cfg.h_values = {0.0, 1.0};
    cfg.runs = 200;
    cfg.seed = 3;
    cfg.out = (tmp_dir() / "haus.csv").string();
    run(cfg);
    CHECK(slurp(cfg.out).rfind("b,r,n,h,sum_mean,sum_se\n", 0) == 0);

    cfg.command = "energy";
    cfg.n_values = {10};
    cfg.h_values = {0.5};
    cfg.runs = 100;
    cfg.out = (tmp_dir() / "energy.csv").string();
    run(cfg);
    CHECK(slurp(cfg.out).rfind("b,r,n,h,Q_mean,Q_se\n", 0) == 0);
}

TEST_CASE("config validation rejects bad inputs") {
    ExperimentConfig cfg;
    cfg.command = "polymer-sim";
    cfg.b = 1;  // invalid
    cfg.n = 4;
    cfg.samples = 10;
    CHECK_THROWS_AS(run(cfg), UsageError);

    cfg.b = 2;
    cfg.samples = 0;
    CHECK_THROWS_AS(run(cfg), UsageError);

    cfg.command = "nonsense";
    CHECK_THROWS_AS(run(cfg), UsageError);

    cfg.command = "limit-sim";
    cfg.pool_size = 100;  // below floor
    CHECK_THROWS_AS(run(cfg), UsageError);
}

TEST_CASE("budget guards surface as BudgetExceeded") {
    ExperimentConfig cfg;
    cfg.command = "polymer-sim";
    cfg.b = 2;
    cfg.n = 16;  // 4^16 > 2^30
    cfg.r = 0.0;
    cfg.samples = 1;
    cfg.seed = 1;
    CHECK_THROWS_AS(run(cfg), BudgetExceeded);
}

TEST_CASE("selftest passes on a fresh tree and honors the corrupt hook") {
    const auto rec = selftest(1, 2);
    for (const auto& [name, ok] : rec.checks) {
        INFO(name);
        CHECK(ok);
    }

    setenv("DPL_SELFTEST_CORRUPT", "flow-chain-rule-b2", 1);
    const auto bad = selftest(1, 2);
    unsetenv("DPL_SELFTEST_CORRUPT");
    CHECK(!bad.all_checks_pass());
    CHECK(!bad.checks.at("flow-chain-rule-b2"));
    // only the named check fails
    for (const auto& [name, ok] : bad.checks)
        if (name != "flow-chain-rule-b2") CHECK(ok);
}

TEST_CASE("run record JSON is stable and echoes the config") {
    ExperimentConfig cfg;
    cfg.command = "flow";
    cfg.b = 3;
    cfg.r = -1.0;
    cfg.depth = 200;
    cfg.seed = 5;
    cfg.out = (tmp_dir() / "flow3.csv").string();
    const auto rec = run(cfg);
    const std::string j = rec.to_json();
    CHECK(j.find("\"command\": \"flow\"") != std::string::npos);
    CHECK(j.find("\"seed\": \"5\"") != std::string::npos);
    CHECK(j.find("\"version\": \"0.1.0\"") != std::string::npos);
}
