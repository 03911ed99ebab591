#include "dpl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "dpl/correlation.hpp"
#include "dpl/errors.hpp"
#include "dpl/flow.hpp"
#include "dpl/intersections.hpp"
#include "dpl/lattice.hpp"
#include "dpl/parallel.hpp"
#include "dpl/polymer_mc.hpp"
#include "dpl/stats.hpp"

namespace dpl::experiment {

using nlohmann::json;

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::string run_timestamp_free_json(const RunRecord& rec) {
    json j;
    j["command"] = rec.command;
    j["version"] = rec.version;
    j["wall_ms"] = rec.wall_ms;
    j["config"] = rec.config_echo;
    json metrics = json::object();
    for (const auto& [name, m] : rec.metrics)
        metrics[name] = {{"value", m.value}, {"se", m.se}};
    j["metrics"] = metrics;
    j["checks"] = rec.checks;
    j["output"] = rec.output_path;
    j["all_checks_pass"] = rec.all_checks_pass();
    return j.dump(2);
}

// Row sink: CSV with a fixed header, or a JSON array of objects.
class RowWriter {
public:
    RowWriter(std::string path, std::string format, std::vector<std::string> columns)
        : path_(std::move(path)), format_(std::move(format)), columns_(std::move(columns)) {}

    void add(std::vector<std::string> cells) {
        if (cells.size() != columns_.size())
            throw std::logic_error("row width does not match header");
        rows_.push_back(std::move(cells));
    }

    void write() const {
        if (path_.empty()) return;
        std::ofstream out(path_, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open output file " + path_);
        if (format_ == "csv") {
            for (std::size_t c = 0; c < columns_.size(); ++c)
                out << columns_[c] << (c + 1 < columns_.size() ? "," : "");
            out << "\n";
            for (const auto& row : rows_) {
                for (std::size_t c = 0; c < row.size(); ++c)
                    out << row[c] << (c + 1 < row.size() ? "," : "");
                out << "\n";
            }
        } else {
            json arr = json::array();
            for (const auto& row : rows_) {
                json obj = json::object();
                for (std::size_t c = 0; c < row.size(); ++c) obj[columns_[c]] = row[c];
                arr.push_back(obj);
            }
            out << arr.dump(2) << "\n";
        }
    }

private:
    std::string path_;
    std::string format_;
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

void write_sidecar(const RunRecord& rec) {
    if (rec.output_path.empty()) return;
    std::ofstream out(rec.output_path + ".meta.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot open sidecar for " + rec.output_path);
    out << run_timestamp_free_json(rec) << "\n";
}

std::map<std::string, std::string> echo_config(const ExperimentConfig& c) {
    std::map<std::string, std::string> e;
    e["command"] = c.command;
    e["b"] = std::to_string(c.b);
    e["r"] = format_g17(c.r);
    e["n"] = std::to_string(c.n);
    e["depth"] = std::to_string(c.depth);
    e["levels"] = std::to_string(c.levels);
    e["samples"] = std::to_string(c.samples);
    e["runs"] = std::to_string(c.runs);
    e["pool_size"] = std::to_string(c.pool_size);
    e["model"] = c.model;
    e["lambda"] = format_g17(c.lambda);
    e["a"] = format_g17(c.a);
    e["eps"] = format_g17(c.eps);
    e["variance_matched_beta"] = c.variance_matched_beta ? "true" : "false";
    e["seed"] = std::to_string(c.seed);
    e["format"] = c.format;
    auto join_d = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i)
            s += (i ? "," : "") + format_g17(v[i]);
        return s;
    };
    std::string ns;
    for (std::size_t i = 0; i < c.n_values.size(); ++i)
        ns += (i ? "," : "") + std::to_string(c.n_values[i]);
    e["n_values"] = ns;
    e["h_values"] = join_d(c.h_values);
    e["r_values"] = join_d(c.r_values);
    return e;
}

// ---- subcommand bodies ----------------------------------------------------

RunRecord run_flow(const ExperimentConfig& c) {
    RunRecord rec;
    const auto profile = flow::eval_moment_profile(c.r, c.depth, c.b);
    RowWriter rows(c.out, c.format, {"k", "R", "Rprime", "R3", "R4"});
    for (int k = 0; k <= profile.depth; ++k)
        rows.add({std::to_string(k), format_g17(profile.R[k]), format_g17(profile.Rprime[k]),
                  format_g17(profile.R3[k]), format_g17(profile.R4[k])});
    rows.write();

    double max_rec = 0.0, max_chain = 0.0;
    for (int k = 0; k + 1 <= profile.depth; ++k) {
        const double pred = flow::map_M(profile.R[k + 1], c.b);
        max_rec = std::max(max_rec, std::fabs(pred - profile.R[k]) / profile.R[k]);
        const double chain =
            profile.Rprime[k + 1] * flow::ipow(1.0 + profile.R[k + 1], c.b - 1);
        max_chain = std::max(max_chain, std::fabs(chain - profile.Rprime[k]) / profile.Rprime[k]);
    }
    rec.metrics["R"] = {profile.R[0], 0.0};
    rec.metrics["Rprime"] = {profile.Rprime[0], 0.0};
    rec.metrics["R3"] = {profile.R3[0], 0.0};
    rec.metrics["R4"] = {profile.R4[0], 0.0};
    rec.metrics["recursion_residual"] = {max_rec, 0.0};
    rec.metrics["chain_rule_residual"] = {max_chain, 0.0};
    rec.checks["flow-recursion-identity"] = max_rec <= 1e-12;
    rec.checks["flow-chain-rule-identity"] = max_chain <= 1e-12;
    return rec;
}

RunRecord run_correlation_check(const ExperimentConfig& c) {
    RunRecord rec;
    const auto profile = flow::eval_moment_profile(c.r, c.depth, c.b);
    const auto table = correlation::build_table(c.b, c.n, c.r, profile);

    RowWriter rows(c.out, c.format, {"p_index", "q_index", "xi", "mass"});
    for (Eigen::Index i = 0; i < table.mass.rows(); ++i)
        for (Eigen::Index j = 0; j < table.mass.cols(); ++j)
            rows.add({std::to_string(i), std::to_string(j), std::to_string(table.xi(i, j)),
                      format_g17(table.mass(i, j))});
    rows.write();

    const double expect_total = 1.0 + table.R_r;
    const double total = table.total_mass();
    const double mass_dev = std::fabs(total - expect_total) / expect_total;

    const double row_target = expect_total / static_cast<double>(table.mass.rows());
    double marg_dev = 0.0;
    for (Eigen::Index i = 0; i < table.mass.rows(); ++i) {
        marg_dev = std::max(marg_dev,
                            std::fabs(table.mass.row(i).sum() - row_target) / row_target);
        marg_dev = std::max(marg_dev,
                            std::fabs(table.mass.col(i).sum() - row_target) / row_target);
    }
    const Eigen::MatrixXd rho = correlation::lebesgue_split(table);
    const double rho_dev = std::fabs(rho.sum() - 1.0);

    rec.metrics["total_mass"] = {total, 0.0};
    rec.metrics["mass_identity_rel_dev"] = {mass_dev, 0.0};
    rec.metrics["marginal_rel_dev"] = {marg_dev, 0.0};
    rec.metrics["rho_total_dev"] = {rho_dev, 0.0};
    rec.checks["correlation-mass-identity"] = mass_dev <= 1e-9;
    rec.checks["correlation-marginals"] = marg_dev <= 1e-9;
    rec.checks["correlation-rho-total"] = rho_dev <= 1e-9;
    return rec;
}

RunRecord run_polymer_sim(const ExperimentConfig& c) {
    RunRecord rec;
    const DisorderModel model = DisorderModel::parse(c.model);
    const double beta =
        polymer::partition_beta(c.b, c.n, c.r, model, c.variance_matched_beta);
    const RunStats st = polymer::simulate_partition(c.b, c.n, c.r, model, c.samples, c.seed,
                                                    c.threads, c.variance_matched_beta);
    RowWriter rows(c.out, c.format,
                   {"b", "n", "r", "beta", "model", "samples", "mean", "se_mean", "var",
                    "se_var", "m3", "m4"});
    rows.add({std::to_string(c.b), std::to_string(c.n), format_g17(c.r), format_g17(beta),
              c.model, std::to_string(c.samples), format_g17(st.mean()),
              format_g17(st.se_mean()), format_g17(st.variance()),
              format_g17(st.se_variance()), format_g17(st.third_central()),
              format_g17(st.fourth_central())});
    rows.write();

    rec.metrics["beta"] = {beta, 0.0};
    rec.metrics["mean"] = {st.mean(), st.se_mean()};
    rec.metrics["var"] = {st.variance(), st.se_variance()};
    rec.metrics["m3"] = {st.third_central(), 0.0};
    rec.metrics["m4"] = {st.fourth_central(), 0.0};
    rec.checks["polymer-mean-within-3se"] =
        std::fabs(st.mean() - 1.0) <= 3.0 * std::max(st.se_mean(), 1e-300);
    return rec;
}

RunRecord run_limit_sim(const ExperimentConfig& c) {
    RunRecord rec;
    const auto profile = flow::eval_moment_profile(c.r, c.levels + 300, c.b);
    const auto pool =
        polymer::sample_limit_mass_pool(c.b, c.r, c.levels, c.pool_size, c.seed, c.threads);
    const RunStats& st = pool.stats;
    RowWriter rows(c.out, c.format,
                   {"b", "r", "levels", "pool", "mean", "var", "m3", "m4", "R_target",
                    "R3_target", "R4_target"});
    rows.add({std::to_string(c.b), format_g17(c.r), std::to_string(c.levels),
              std::to_string(c.pool_size), format_g17(st.mean()), format_g17(st.variance()),
              format_g17(st.third_central()), format_g17(st.fourth_central()),
              format_g17(profile.R[0]), format_g17(profile.R3[0]),
              format_g17(profile.R4[0])});
    rows.write();

    rec.metrics["mean"] = {st.mean(), st.se_mean()};
    rec.metrics["var"] = {st.variance(), st.se_variance()};
    rec.metrics["m3"] = {st.third_central(), 0.0};
    rec.metrics["m4"] = {st.fourth_central(), 0.0};
    rec.metrics["R_target"] = {profile.R[0], 0.0};
    rec.metrics["R3_target"] = {profile.R3[0], 0.0};
    rec.metrics["R4_target"] = {profile.R4[0], 0.0};
    rec.metrics["non_finite_members"] = {static_cast<double>(pool.non_finite), 0.0};
    rec.checks["pool-members-finite"] = pool.non_finite == 0;
    rec.checks["pool-mean-within-3se"] =
        std::isfinite(st.mean()) &&
        std::fabs(st.mean() - 1.0) <= 3.0 * std::max(st.se_mean(), 1e-300);
    return rec;
}

RunRecord run_disorder_scan(const ExperimentConfig& c) {
    RunRecord rec;
    const auto scan = polymer::strong_disorder_scan(c.b, c.r_values, c.levels, c.pool_size,
                                                    c.seed, c.eps, c.threads);
    RowWriter rows(c.out, c.format, {"b", "r", "frac_below_eps", "eps"});
    for (const auto& row : scan)
        rows.add({std::to_string(c.b), format_g17(row.r), format_g17(row.frac_below_eps),
                  format_g17(row.eps)});
    rows.write();
    bool monotone = true;
    for (std::size_t k = 0; k + 1 < scan.size(); ++k)
        if (scan[k + 1].r >= scan[k].r && scan[k + 1].frac_below_eps + 0.02 < scan[k].frac_below_eps)
            monotone = false;
    for (std::size_t k = 0; k < scan.size(); ++k)
        rec.metrics["frac_below_eps[r=" + format_g17(scan[k].r) + "]"] = {
            scan[k].frac_below_eps, 0.0};
    rec.checks["scan-monotone-in-r"] = monotone;
    return rec;
}

RunRecord run_intersections_sim(const ExperimentConfig& c) {
    RunRecord rec;
    const auto profile = flow::eval_moment_profile(c.r, c.n + c.depth, c.b);
    RowWriter rows(c.out, c.format,
                   {"b", "r", "n", "run", "xi_tilde", "xi_total", "m_tilde", "m_total"});

    const std::uint64_t chunk = 64;
    const std::uint64_t n_chunks = (c.runs + chunk - 1) / chunk;
    struct Row {
        std::int64_t xt, x;
        double mt, m;
    };
    std::vector<std::vector<Row>> results(n_chunks);
    RunStats mt_stats, m_stats;
    for_each_chunk(c.runs, chunk, c.threads,
                   [&](std::uint64_t ci, std::uint64_t lo, std::uint64_t hi) {
                       auto& out = results[ci];
                       out.reserve(hi - lo);
                       for (std::uint64_t run = lo; run < hi; ++run) {
                           RngStream rng(c.seed, run, 3);
                           intersections::PairedCounts pc;
                           for (int k = 0; k < c.n; ++k)
                               pc = intersections::paired_count_step(pc, k, profile, rng);
                           out.push_back(
                               {pc.xi_tilde, pc.total(),
                                intersections::martingale_estimate(pc.xi_tilde, c.n, profile),
                                intersections::total_overlap_estimate(pc.total(), c.n,
                                                                      profile)});
                       }
                   });
    std::uint64_t run_ix = 0;
    for (const auto& chunk_rows : results)
        for (const auto& row : chunk_rows) {
            rows.add({std::to_string(c.b), format_g17(c.r), std::to_string(c.n),
                      std::to_string(run_ix++), std::to_string(row.xt), std::to_string(row.x),
                      format_g17(row.mt), format_g17(row.m)});
            mt_stats.push(row.mt);
            m_stats.push(row.m);
        }
    rows.write();

    rec.metrics["m_tilde_mean"] = {mt_stats.mean(), mt_stats.se_mean()};
    rec.metrics["m_total_mean"] = {m_stats.mean(), m_stats.se_mean()};
    rec.metrics["martingale_target"] = {profile.Rprime[0] / profile.R[0], 0.0};
    rec.checks["intersections-xi-positive"] = mt_stats.min() > 0.0;
    return rec;
}

RunRecord run_hausdorff(const ExperimentConfig& c) {
    RunRecord rec;
    const int n_max = *std::max_element(c.n_values.begin(), c.n_values.end());
    const auto profile = flow::eval_moment_profile(c.r, n_max + c.depth, c.b);

    std::vector<int> checkpoints = c.n_values;
    std::sort(checkpoints.begin(), checkpoints.end());

    const std::uint64_t chunk = 64;
    const std::uint64_t n_chunks = (c.runs + chunk - 1) / chunk;
    // stats[checkpoint][h]
    std::vector<std::vector<RunStats>> partial(
        n_chunks,
        std::vector<RunStats>(checkpoints.size() * c.h_values.size()));
    for_each_chunk(
        c.runs, chunk, c.threads, [&](std::uint64_t ci, std::uint64_t lo, std::uint64_t hi) {
            auto& acc = partial[ci];
            for (std::uint64_t run = lo; run < hi; ++run) {
                RngStream rng(c.seed, run, 4);
                std::int64_t xt = 1;
                std::size_t next_cp = 0;
                for (int k = 0; k < n_max; ++k) {
                    xt = intersections::survival_count_step(xt, k, profile, rng);
                    while (next_cp < checkpoints.size() && checkpoints[next_cp] == k + 1) {
                        for (std::size_t hix = 0; hix < c.h_values.size(); ++hix)
                            acc[next_cp * c.h_values.size() + hix].push(
                                intersections::log_hausdorff_sum(xt, k + 1, c.b,
                                                                 c.h_values[hix]));
                        ++next_cp;
                    }
                }
            }
        });
    RowWriter rows(c.out, c.format, {"b", "r", "n", "h", "sum_mean", "sum_se"});
    for (std::size_t cp = 0; cp < checkpoints.size(); ++cp)
        for (std::size_t hix = 0; hix < c.h_values.size(); ++hix) {
            RunStats st;
            for (auto& p : partial) st.merge(p[cp * c.h_values.size() + hix]);
            rows.add({std::to_string(c.b), format_g17(c.r), std::to_string(checkpoints[cp]),
                      format_g17(c.h_values[hix]), format_g17(st.mean()),
                      format_g17(st.se_mean())});
            rec.metrics["sum[n=" + std::to_string(checkpoints[cp]) +
                        ",h=" + format_g17(c.h_values[hix]) + "]"] = {st.mean(),
                                                                      st.se_mean()};
        }
    rows.write();
    rec.checks["hausdorff-completed"] = true;
    return rec;
}

RunRecord run_energy(const ExperimentConfig& c) {
    RunRecord rec;
    const int n_max = *std::max_element(c.n_values.begin(), c.n_values.end());
    const auto profile = flow::eval_moment_profile(c.r, n_max + c.depth, c.b);

    std::vector<int> checkpoints = c.n_values;
    std::sort(checkpoints.begin(), checkpoints.end());

    const std::uint64_t chunk = 16;
    const std::uint64_t n_chunks = (c.runs + chunk - 1) / chunk;
    std::vector<std::vector<RunStats>> partial(
        n_chunks, std::vector<RunStats>(checkpoints.size() * c.h_values.size()));
    for_each_chunk(
        c.runs, chunk, c.threads, [&](std::uint64_t ci, std::uint64_t lo, std::uint64_t hi) {
            auto& acc = partial[ci];
            for (std::uint64_t run = lo; run < hi; ++run) {
                RngStream rng(c.seed, run, 5);
                RngStream sub(c.seed, run, 6);
                intersections::PopulationState state(c.b);
                std::size_t next_cp = 0;
                for (int k = 0; k < n_max; ++k) {
                    state.step(profile, rng);
                    while (next_cp < checkpoints.size() && checkpoints[next_cp] == k + 1) {
                        for (std::size_t hix = 0; hix < c.h_values.size(); ++hix) {
                            const auto est = intersections::energy_estimate(
                                state, c.h_values[hix], profile, 100000000ULL, &sub);
                            acc[next_cp * c.h_values.size() + hix].push(est.value);
                        }
                        ++next_cp;
                    }
                }
            }
        });
    RowWriter rows(c.out, c.format, {"b", "r", "n", "h", "Q_mean", "Q_se"});
    for (std::size_t cp = 0; cp < checkpoints.size(); ++cp)
        for (std::size_t hix = 0; hix < c.h_values.size(); ++hix) {
            RunStats st;
            for (auto& p : partial) st.merge(p[cp * c.h_values.size() + hix]);
            rows.add({std::to_string(c.b), format_g17(c.r), std::to_string(checkpoints[cp]),
                      format_g17(c.h_values[hix]), format_g17(st.mean()),
                      format_g17(st.se_mean())});
            rec.metrics["Q[n=" + std::to_string(checkpoints[cp]) +
                        ",h=" + format_g17(c.h_values[hix]) + "]"] = {st.mean(),
                                                                      st.se_mean()};
        }
    rows.write();
    rec.checks["energy-completed"] = true;
    return rec;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (b < 2) throw UsageError("b must be >= 2");
    if (depth < 1) throw UsageError("depth must be >= 1");
    if (format != "csv" && format != "json") throw UsageError("format must be csv or json");
    if (threads < 0) throw UsageError("threads must be >= 0");
    if (command == "flow") {
        if (r - depth > -flow::kAnchorFloor)
            throw UsageError("flow requires r - depth <= -50 (asymptotic validity floor)");
    } else if (command == "correlation-check") {
        if (n < 0) throw UsageError("N must be >= 0");
    } else if (command == "polymer-sim") {
        if (n < 1) throw UsageError("n must be >= 1");
        if (samples < 1) throw UsageError("samples must be >= 1");
        DisorderModel::parse(model);
    } else if (command == "limit-sim") {
        if (levels < 1) throw UsageError("levels must be >= 1");
        if (pool_size < 10000) throw UsageError("pool_size must be >= 1e4");
    } else if (command == "disorder-scan") {
        if (r_values.empty()) throw UsageError("at least one r value required");
        if (pool_size < 10000) throw UsageError("pool_size must be >= 1e4");
        if (!(eps > 0.0)) throw UsageError("eps must be > 0");
    } else if (command == "intersections-sim") {
        if (n < 1) throw UsageError("n must be >= 1");
        if (runs < 1) throw UsageError("runs must be >= 1");
    } else if (command == "hausdorff" || command == "energy") {
        if (n_values.empty()) throw UsageError("at least one n checkpoint required");
        for (int nv : n_values)
            if (nv < 1) throw UsageError("n checkpoints must be >= 1");
        if (h_values.empty()) throw UsageError("at least one h value required");
        for (double hv : h_values)
            if (hv < 0.0) throw UsageError("h must be >= 0");
        if (runs < 1) throw UsageError("runs must be >= 1");
    } else if (command == "selftest") {
        // no further constraints
    } else {
        throw UsageError("unknown subcommand '" + command + "'");
    }
}

std::string RunRecord::to_json() const { return run_timestamp_free_json(*this); }

RunRecord run(const ExperimentConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec;
    if (config.command == "flow")
        rec = run_flow(config);
    else if (config.command == "correlation-check")
        rec = run_correlation_check(config);
    else if (config.command == "polymer-sim")
        rec = run_polymer_sim(config);
    else if (config.command == "limit-sim")
        rec = run_limit_sim(config);
    else if (config.command == "disorder-scan")
        rec = run_disorder_scan(config);
    else if (config.command == "intersections-sim")
        rec = run_intersections_sim(config);
    else if (config.command == "hausdorff")
        rec = run_hausdorff(config);
    else if (config.command == "energy")
        rec = run_energy(config);
    else if (config.command == "selftest")
        rec = selftest(config.seed, config.threads);
    else
        throw UsageError("unknown subcommand '" + config.command + "'");

    rec.command = config.command;
    rec.config_echo = echo_config(config);
    rec.output_path = config.out;
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    write_sidecar(rec);
    return rec;
}

// ---- selftest --------------------------------------------------------------

namespace {

bool corrupted(const char* name) {
    const char* c = std::getenv("DPL_SELFTEST_CORRUPT");
    return c != nullptr && std::string(c) == name;
}

}  // namespace

RunRecord selftest(std::uint64_t seed, int threads) {
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.command = "selftest";

    auto check = [&](const char* name, bool ok) {
        rec.checks[name] = ok && !corrupted(name);
    };

    // Exact flow identities at both branching numbers.
    for (int b : {2, 3}) {
        const auto prof = flow::eval_moment_profile(0.0, 300, b);
        double max_rec = 0.0, max_chain = 0.0;
        for (int k = 0; k < prof.depth; ++k) {
            max_rec = std::max(max_rec, std::fabs(flow::map_M(prof.R[k + 1], b) - prof.R[k]) /
                                            prof.R[k]);
            max_chain = std::max(
                max_chain, std::fabs(prof.Rprime[k + 1] * flow::ipow(1.0 + prof.R[k + 1], b - 1) -
                                     prof.Rprime[k]) /
                               prof.Rprime[k]);
        }
        const std::string tag = "-b" + std::to_string(b);
        check(("flow-recursion" + tag).c_str(), max_rec <= 1e-12);
        check(("flow-chain-rule" + tag).c_str(), max_chain <= 1e-12);
        const double r200 = flow::eval_R(0.0, 200, b);
        const double r400 = flow::eval_R(0.0, 400, b);
        check(("flow-depth-doubling" + tag).c_str(),
              std::fabs(r200 - r400) / r400 <= 1e-6);
    }
    {
        const double beta = flow::eval_beta(100, 0.0, flow::FlowConstants::make(2, 0.0));
        check("flow-beta-value", std::fabs(beta - 0.147934) <= 1e-6);
    }

    // Correlation mass and marginal identities over the enumeration budget.
    {
        bool ok = true;
        for (const auto& [b, Nmax] : std::vector<std::pair<int, int>>{{2, 3}, {3, 2}})
            for (int N = 1; N <= Nmax; ++N)
                for (double r : {-3.0, 0.0, 2.0}) {
                    const auto prof = flow::eval_moment_profile(r, 300, b);
                    const auto table = correlation::build_table(b, N, r, prof);
                    const double expect = 1.0 + table.R_r;
                    if (std::fabs(table.total_mass() - expect) / expect > 1e-9) ok = false;
                    const double row_target = expect / static_cast<double>(table.mass.rows());
                    for (Eigen::Index i = 0; i < table.mass.rows(); ++i)
                        if (std::fabs(table.mass.row(i).sum() - row_target) / row_target >
                            1e-9)
                            ok = false;
                }
        check("correlation-identities", ok);
    }

    // Lattice exact combinatorics.
    {
        using lattice::LatticeParams;
        bool ok = lattice::path_count(LatticeParams{2}, 3) == 128 &&
                  lattice::path_count(LatticeParams{3}, 2) == 81;
        for (int n = 0; n <= 3 && ok; ++n) {
            const LatticeParams params{2};
            const std::uint64_t count = lattice::path_count_u64(params, n);
            lattice::BigInt xi_sum = 0;
            for (std::uint64_t i = 0; i < count; ++i)
                for (std::uint64_t j = 0; j < count; ++j) {
                    const auto p = lattice::path_from_index(params, n, i);
                    const auto q = lattice::path_from_index(params, n, j);
                    xi_sum += lattice::shared_edge_count(params, p, q);
                }
            if (xi_sum != lattice::BigInt(count) * count) ok = false;
        }
        check("lattice-overlap-mean", ok);
    }

    // psi iterates, exact and Monte Carlo.
    {
        const double p3 = intersections::extinction_prob(2, 3);
        check("extinction-psi3", p3 == 0.6953125);
        const double p10 = intersections::extinction_prob(2, 10);
        std::uint64_t extinct = 0;
        const std::uint64_t runs = 100000;
        for (std::uint64_t run = 0; run < runs; ++run) {
            RngStream rng(seed, run, 10);
            std::int64_t pop = 1;
            for (int g = 0; g < 10 && pop > 0; ++g) {
                std::binomial_distribution<std::int64_t> bin(pop, 0.5);
                pop = 2 * bin(rng);
            }
            if (pop == 0) ++extinct;
        }
        const double freq = static_cast<double>(extinct) / runs;
        const double se = std::sqrt(p10 * (1 - p10) / runs);
        check("extinction-mc", std::fabs(freq - p10) <= 3.0 * se);
    }

    // Martingale constancy, small run.
    {
        const auto prof = flow::eval_moment_profile(0.0, 100, 2);
        RunStats st;
        for (std::uint64_t run = 0; run < 20000; ++run) {
            RngStream rng(seed, run, 11);
            std::int64_t xt = 1;
            for (int k = 0; k < 20; ++k)
                xt = intersections::survival_count_step(xt, k, prof, rng);
            st.push(intersections::martingale_estimate(xt, 20, prof));
        }
        const double target = prof.Rprime[0] / prof.R[0];
        check("martingale-mean",
              std::fabs(st.mean() - target) <= 4.0 * std::max(st.se_mean(), 1e-12));
    }

    // Coarsening equals the brute-force path sum.
    {
        const lattice::LatticeParams params{2};
        RngStream rng(seed, 0, 12);
        auto arr = polymer::base_array(2, 2, 0.7, DisorderModel{DisorderKind::gaussian}, rng);
        const auto coarse = polymer::coarsen_to(arr, 0);
        double brute = 0.0;
        const std::uint64_t count = lattice::path_count_u64(params, 2);
        for (std::uint64_t i = 0; i < count; ++i) {
            const auto p = lattice::path_from_index(params, 2, i);
            double prod = 1.0;
            for (const auto& e : lattice::edges_of_path(params, p))
                prod *= arr.values[static_cast<Eigen::Index>(e.canonical_index(2))];
            brute += prod;
        }
        brute /= static_cast<double>(count);
        check("coarsen-path-sum",
              std::fabs(coarse.values[0] - brute) / brute <= 1e-12);
    }

    // Determinism across worker counts.
    {
        const DisorderModel model{DisorderKind::gaussian};
        const RunStats a = polymer::simulate_partition(2, 4, -2.0, model, 512, seed, 1);
        const RunStats b = polymer::simulate_partition(2, 4, -2.0, model, 512, seed, 4);
        check("determinism-threads",
              a.mean() == b.mean() && a.variance() == b.variance() &&
                  a.third_central() == b.third_central());
    }

    rec.metrics["checks_total"] = {static_cast<double>(rec.checks.size()), 0.0};
    double failed = 0;
    for (const auto& [name, ok] : rec.checks)
        if (!ok) ++failed;
    rec.metrics["checks_failed"] = {failed, 0.0};
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    rec.config_echo["command"] = "selftest";
    rec.config_echo["seed"] = std::to_string(seed);
    rec.config_echo["threads"] = std::to_string(threads);
    return rec;
}

}  // namespace dpl::experiment
