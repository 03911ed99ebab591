#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dpl::experiment {

inline constexpr const char* kVersion = "0.1.0";

// Validated inputs of one experiment invocation (one subcommand each).
struct ExperimentConfig {
    std::string command;
    int b = 2;
    double r = 0.0;
    int n = 0;
    int depth = 300;
    int levels = 100;
    std::uint64_t samples = 0;
    std::uint64_t runs = 0;
    std::uint64_t pool_size = 0;
    std::string model = "gaussian";
    std::vector<double> h_values;
    std::vector<int> n_values;
    std::vector<double> r_values;
    double lambda = 10.0;
    double a = 0.0;
    double eps = 0.01;
    bool variance_matched_beta = false;
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "csv";  // csv | json
    int threads = 0;             // 0 = resolve via DPL_THREADS / hardware

    void validate() const;  // throws UsageError
};

struct Metric {
    double value = 0.0;
    double se = 0.0;
};

// Reproducible run summary; serialized as the JSON sidecar next to every
// output file.  Identical (config, seed) produce identical records except
// for the wall clock.
struct RunRecord {
    std::string command;
    std::string version = kVersion;
    double wall_ms = 0.0;
    std::map<std::string, std::string> config_echo;
    std::map<std::string, Metric> metrics;
    std::map<std::string, bool> checks;
    std::string output_path;

    bool all_checks_pass() const {
        for (const auto& [name, ok] : checks)
            if (!ok) return false;
        return true;
    }
    std::string to_json() const;
};

// Dispatches the config to the owning module, writes the declared CSV (or
// JSON rows) plus the sidecar record.  Throws UsageError / BudgetExceeded.
RunRecord run(const ExperimentConfig& config);

// Fast subset of the acceptance identities plus small Monte Carlo; the
// environment hook DPL_SELFTEST_CORRUPT=<check-name> perturbs the named
// check so its failure path stays testable.
RunRecord selftest(std::uint64_t seed, int threads);

// 17-significant-digit decimal rendering used in every CSV cell.
std::string format_g17(double v);

}  // namespace dpl::experiment
