#include <CLI11.hpp>
#include <cstdio>
#include <exception>

#include "dpl/errors.hpp"
#include "dpl/experiment.hpp"

namespace {

using dpl::experiment::ExperimentConfig;

void add_common(CLI::App* cmd, ExperimentConfig& cfg, bool seed_required = true) {
    cmd->set_help_flag("--help", "print help");  // frees -h for the h exponent
    auto* seed = cmd->add_option("--seed", cfg.seed, "RNG master seed (64-bit)");
    if (seed_required) seed->required();
    cmd->add_option("--out", cfg.out, "output file path");
    cmd->add_option("--format", cfg.format, "output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--threads", cfg.threads,
                    "worker count (default: DPL_THREADS or all cores)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for critical directed polymers on the "
                 "dimension-two diamond hierarchical lattice"};
    app.set_help_flag("--help", "print help");
    app.require_subcommand(1);

    std::vector<ExperimentConfig> cfgs(9);

    auto* flow = app.add_subcommand("flow", "variance/moment flow profile");
    cfgs[0].command = "flow";
    flow->add_option("--b", cfgs[0].b, "branching number")->required();
    flow->add_option("--r", cfgs[0].r, "flow parameter r")->required();
    flow->add_option("--depth", cfgs[0].depth, "anchor depth below r (default 300)");
    add_common(flow, cfgs[0], /*seed_required=*/false);

    auto* corr = app.add_subcommand("correlation-check",
                                    "exact correlation-measure identities on Gamma_N");
    cfgs[1].command = "correlation-check";
    corr->add_option("--b", cfgs[1].b, "branching number")->required();
    corr->add_option("--N", cfgs[1].n, "path generation N")->required();
    corr->add_option("--r", cfgs[1].r, "flow parameter r")->required();
    corr->add_option("--depth", cfgs[1].depth, "flow anchor depth");
    add_common(corr, cfgs[1], /*seed_required=*/false);

    auto* poly = app.add_subcommand("polymer-sim",
                                    "discrete polymer partition mass at critical scaling");
    cfgs[2].command = "polymer-sim";
    poly->add_option("--b", cfgs[2].b, "branching number")->required();
    poly->add_option("--n", cfgs[2].n, "lattice generation")->required();
    poly->add_option("--r", cfgs[2].r, "flow parameter r")->required();
    poly->add_option("--model", cfgs[2].model,
                     "disorder law: gaussian|rademacher|shifted_exponential");
    poly->add_option("--samples", cfgs[2].samples, "Monte Carlo samples")->required();
    poly->add_flag("--variance-matched-beta", cfgs[2].variance_matched_beta,
                   "calibrate beta so the base variance equals R(r-n) exactly "
                   "(default: the asymptotic critical-window formula)");
    add_common(poly, cfgs[2]);

    auto* limit = app.add_subcommand("limit-sim",
                                     "population-dynamics sampler of the limit mass");
    cfgs[3].command = "limit-sim";
    limit->add_option("--b", cfgs[3].b, "branching number")->required();
    limit->add_option("--r", cfgs[3].r, "flow parameter r")->required();
    limit->add_option("--levels", cfgs[3].levels, "combining rounds (default 100)");
    limit->add_option("--pool", cfgs[3].pool_size, "pool size (>= 1e4)")->required();
    add_common(limit, cfgs[3]);

    auto* scan = app.add_subcommand("disorder-scan",
                                    "P[limit mass < eps] across flow parameters");
    cfgs[4].command = "disorder-scan";
    scan->add_option("--b", cfgs[4].b, "branching number")->required();
    scan->add_option("--r", cfgs[4].r_values, "flow parameters (repeatable)")->required();
    scan->add_option("--levels", cfgs[4].levels, "combining rounds (default 100)");
    scan->add_option("--pool", cfgs[4].pool_size, "pool size (>= 1e4)")->required();
    scan->add_option("--eps", cfgs[4].eps, "smallness threshold (default 0.01)");
    add_common(scan, cfgs[4]);

    auto* inter = app.add_subcommand("intersections-sim",
                                     "survival-conditioned intersection chains");
    cfgs[5].command = "intersections-sim";
    inter->add_option("--b", cfgs[5].b, "branching number")->required();
    inter->add_option("--r", cfgs[5].r, "flow parameter r")->required();
    inter->add_option("--n", cfgs[5].n, "final generation")->required();
    inter->add_option("--runs", cfgs[5].runs, "independent chains")->required();
    inter->add_option("--depth", cfgs[5].depth, "flow anchor margin below n");
    add_common(inter, cfgs[5]);

    auto* haus = app.add_subcommand("hausdorff", "log-Hausdorff coverage sums");
    cfgs[6].command = "hausdorff";
    haus->add_option("--b", cfgs[6].b, "branching number")->required();
    haus->add_option("--r", cfgs[6].r, "flow parameter r")->required();
    haus->add_option("--n", cfgs[6].n_values, "generation checkpoints (repeatable)")
        ->required();
    haus->add_option("--h", cfgs[6].h_values, "dimension-function exponents (repeatable)")
        ->required();
    haus->add_option("--runs", cfgs[6].runs, "independent chains")->required();
    haus->add_option("--depth", cfgs[6].depth, "flow anchor margin");
    add_common(haus, cfgs[6]);

    auto* energy = app.add_subcommand("energy", "discrete intersection energies");
    cfgs[7].command = "energy";
    energy->add_option("--b", cfgs[7].b, "branching number")->required();
    energy->add_option("--r", cfgs[7].r, "flow parameter r")->required();
    energy->add_option("--n", cfgs[7].n_values, "generation checkpoints (repeatable)")
        ->required();
    energy->add_option("--h", cfgs[7].h_values, "energy exponents (repeatable)")->required();
    energy->add_option("--runs", cfgs[7].runs, "independent chains")->required();
    energy->add_option("--depth", cfgs[7].depth, "flow anchor margin");
    add_common(energy, cfgs[7]);

    auto* self = app.add_subcommand("selftest",
                                    "fast exact identities plus small Monte Carlo");
    cfgs[8].command = "selftest";
    cfgs[8].seed = 1;
    add_common(self, cfgs[8], /*seed_required=*/false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    ExperimentConfig* chosen = nullptr;
    const std::vector<CLI::App*> subs{flow, corr, poly, limit, scan, inter, haus, energy,
                                      self};
    for (std::size_t i = 0; i < subs.size(); ++i)
        if (subs[i]->parsed()) chosen = &cfgs[i];
    if (chosen == nullptr) return 2;

    try {
        const auto rec = dpl::experiment::run(*chosen);
        std::fputs(rec.to_json().c_str(), stdout);
        std::fputc('\n', stdout);
        return rec.all_checks_pass() ? 0 : 1;
    } catch (const dpl::UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const dpl::BudgetExceeded& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
