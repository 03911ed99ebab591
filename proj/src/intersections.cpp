#include "dpl/intersections.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "dpl/errors.hpp"
#include "dpl/parallel.hpp"

namespace dpl::intersections {

double extinction_prob(int b, int n) {
    if (b < 2 || n < 0) throw std::invalid_argument("extinction_prob requires b >= 2, n >= 0");
    double x = 0.0;
    for (int k = 0; k < n; ++k) x = (b - 1 + flow::ipow(x, b)) / b;
    return x;
}

namespace {

void check_pmf(const std::vector<double>& pmf) {
    double sum = 0.0;
    for (double p : pmf) sum += p;
    if (std::fabs(sum - 1.0) > 1e-12)
        throw std::runtime_error("offspring pmf failed to normalize (flow inconsistency)");
}

// Inverse-CDF draw from a short pmf.
int draw_pmf(const std::vector<double>& pmf, RngStream& rng) {
    const double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < pmf.size(); ++i) {
        acc += pmf[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(pmf.size()) - 1;
}

}  // namespace

PopulationState::PopulationState(int b) : b_(b) {
    if (b < 2) throw std::invalid_argument("branching number b must be >= 2");
    arena_.push_back(Node{-1, 0});
    occupied_.push_back(0);
}

void PopulationState::step(const flow::VarianceProfile& profile, RngStream& rng) {
    if (profile.b != b_) throw std::invalid_argument("profile does not match b");
    const std::vector<double> pmf = flow::survival_offspring_pmf(profile, generation_);
    check_pmf(pmf);

    std::vector<std::int32_t> next;
    next.reserve(occupied_.size() + occupied_.size() / 4 + 4);
    std::uint8_t slots[64];
    for (const std::int32_t id : occupied_) {
        const int l = 1 + draw_pmf(pmf, rng);
        // Uniform l-subset of the b segments: partial Fisher-Yates, then
        // sort so children appear in segment order.
        for (int j = 0; j < b_; ++j) slots[j] = static_cast<std::uint8_t>(j + 1);
        for (int j = 0; j < l; ++j) {
            const int pick = j + static_cast<int>(rng.below(static_cast<std::uint64_t>(b_ - j)));
            std::swap(slots[j], slots[pick]);
        }
        std::sort(slots, slots + l);
        for (int j = 0; j < l; ++j) {
            arena_.push_back(Node{id, slots[j]});
            next.push_back(static_cast<std::int32_t>(arena_.size() - 1));
        }
    }
    occupied_ = std::move(next);
    ++generation_;
}

std::vector<std::vector<std::uint8_t>> PopulationState::occupied_addresses() const {
    std::vector<std::vector<std::uint8_t>> out;
    out.reserve(occupied_.size());
    for (const std::int32_t id : occupied_) {
        std::vector<std::uint8_t> addr(static_cast<std::size_t>(generation_));
        std::int32_t cur = id;
        for (int k = generation_; k-- > 0;) {
            addr[k] = arena_[cur].digit;
            cur = arena_[cur].parent;
        }
        out.push_back(std::move(addr));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::int64_t> survival_offspring_counts(std::int64_t xi_tilde, int n,
                                                    const flow::VarianceProfile& profile,
                                                    RngStream& rng) {
    if (xi_tilde < 0) throw std::invalid_argument("population count must be >= 0");
    const std::vector<double> pmf = flow::survival_offspring_pmf(profile, n);
    check_pmf(pmf);
    const int b = profile.b;
    std::vector<std::int64_t> counts(b, 0);
    // Sequential conditional binomials, highest offspring count first.
    std::int64_t remaining = xi_tilde;
    double mass = 1.0;
    for (int l = b; l >= 2 && remaining > 0; --l) {
        const double p = std::min(1.0, pmf[l - 1] / mass);
        std::binomial_distribution<std::int64_t> bin(remaining, p);
        counts[l - 1] = bin(rng);
        remaining -= counts[l - 1];
        mass -= pmf[l - 1];
    }
    counts[0] = remaining;
    return counts;
}

std::int64_t survival_count_step(std::int64_t xi_tilde, int n,
                                 const flow::VarianceProfile& profile, RngStream& rng) {
    const auto counts = survival_offspring_counts(xi_tilde, n, profile, rng);
    std::int64_t next = 0;
    for (int l = 1; l <= profile.b; ++l) next += static_cast<std::int64_t>(l) * counts[l - 1];
    return next;
}

PairedCounts paired_count_step(PairedCounts state, int n,
                               const flow::VarianceProfile& profile, RngStream& rng) {
    const int b = profile.b;
    const auto counts = survival_offspring_counts(state.xi_tilde, n, profile, rng);
    std::int64_t survivors = 0;
    std::int64_t doomed_children = 0;
    for (int l = 1; l <= b; ++l) {
        survivors += static_cast<std::int64_t>(l) * counts[l - 1];
        doomed_children += static_cast<std::int64_t>(b - l) * counts[l - 1];
    }
    // Doomed members reproduce 0-or-b with probability exactly 1/b: the
    // extinction-conditioned law of the unconditioned chain is parameter-free.
    std::int64_t reproducing = 0;
    if (state.doomed > 0) {
        std::binomial_distribution<std::int64_t> bin(state.doomed, 1.0 / b);
        reproducing = bin(rng);
    }
    PairedCounts next;
    next.xi_tilde = survivors;
    next.doomed = doomed_children + static_cast<std::int64_t>(b) * reproducing;
    return next;
}

std::int64_t upsilon_hat_count_step(std::int64_t xi, int n,
                                    const flow::VarianceProfile& profile, RngStream& rng) {
    if (xi <= 0) return 0;
    const int b = profile.b;
    const double p = flow::total_branch_prob(profile, n);
    std::binomial_distribution<std::int64_t> bin(xi, p);
    return static_cast<std::int64_t>(b) * bin(rng);
}

double martingale_estimate(std::int64_t xi_tilde, int n,
                           const flow::VarianceProfile& profile) {
    if (n > profile.depth) throw std::invalid_argument("profile does not cover n");
    return profile.Rprime[n] / profile.R[n] * static_cast<double>(xi_tilde);
}

double total_overlap_estimate(std::int64_t xi_total, int n,
                              const flow::VarianceProfile& profile) {
    if (n > profile.depth) throw std::invalid_argument("profile does not cover n");
    return profile.Rprime[n] / (1.0 + profile.R[n]) * static_cast<double>(xi_total);
}

double exp_moment_mc(double a, int n, std::uint64_t runs,
                     const flow::VarianceProfile& profile, std::uint64_t seed,
                     int threads) {
    if (n + 1 > profile.depth) throw std::invalid_argument("profile does not cover n");
    const std::uint64_t chunk = 256;
    const std::uint64_t n_chunks = (runs + chunk - 1) / chunk;
    std::vector<double> partial(n_chunks, 0.0);
    for_each_chunk(runs, chunk, threads,
                   [&](std::uint64_t c, std::uint64_t lo, std::uint64_t hi) {
                       double acc = 0.0;
                       for (std::uint64_t rix = lo; rix < hi; ++rix) {
                           RngStream rng(seed, rix, 1);
                           std::int64_t xi = 1;
                           for (int k = 0; k < n; ++k)
                               xi = survival_count_step(xi, k, profile, rng);
                           acc += std::exp(a * martingale_estimate(xi, n, profile));
                       }
                       partial[c] = acc;
                   });
    double total = 0.0;
    for (double p : partial) total += p;
    return total / static_cast<double>(runs);
}

double TauMeasure::mass_of_prefix(std::span<const std::uint8_t> digits) const {
    if (static_cast<int>(digits.size()) > generation)
        throw std::invalid_argument("prefix longer than interval addresses");
    std::size_t hits = 0;
    for (const auto& addr : occupied) {
        bool in = true;
        for (std::size_t k = 0; k < digits.size(); ++k)
            if (addr[k] != digits[k]) {
                in = false;
                break;
            }
        if (in) ++hits;
    }
    return weight_per_interval * static_cast<double>(hits);
}

TauMeasure tau_measure(const PopulationState& state, const flow::VarianceProfile& profile) {
    if (state.generation() > profile.depth)
        throw std::invalid_argument("profile does not cover state generation");
    TauMeasure tau;
    tau.b = state.b();
    tau.generation = state.generation();
    tau.weight_per_interval =
        profile.Rprime[state.generation()] / profile.R[state.generation()];
    tau.occupied = state.occupied_addresses();
    return tau;
}

double log_hausdorff_sum(std::int64_t xi_tilde, int n, int b, double h) {
    if (h < 0.0) throw std::invalid_argument("h must be >= 0");
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    return static_cast<double>(xi_tilde) / std::pow(n * std::log(static_cast<double>(b)), h);
}

double log_hausdorff_sum(const PopulationState& state, double h) {
    return log_hausdorff_sum(static_cast<std::int64_t>(state.count()), state.generation(),
                             state.b(), h);
}

namespace {

int first_disagreement(const std::vector<std::uint8_t>& a,
                       const std::vector<std::uint8_t>& b) {
    const std::size_t n = a.size();
    for (std::size_t k = 0; k < n; ++k)
        if (a[k] != b[k]) return static_cast<int>(k) + 1;
    return static_cast<int>(n);  // identical addresses: g = n by convention
}

}  // namespace

EnergyEstimate energy_estimate(const PopulationState& state, double h,
                               const flow::VarianceProfile& profile,
                               std::uint64_t pair_budget, RngStream* subsample_rng) {
    const int n = state.generation();
    if (n < 1) throw std::invalid_argument("energy_estimate requires generation >= 1");
    if (n > profile.depth) throw std::invalid_argument("profile does not cover n");
    const auto addrs = state.occupied_addresses();
    const std::uint64_t s = addrs.size();
    const double w = profile.Rprime[n] / profile.R[n];
    const double diag = static_cast<double>(s) * std::pow(static_cast<double>(n), h);

    EnergyEstimate out;
    if (s * s <= pair_budget) {
        double off = 0.0;
        for (std::uint64_t i = 0; i < s; ++i)
            for (std::uint64_t j = i + 1; j < s; ++j)
                off += std::pow(static_cast<double>(first_disagreement(addrs[i], addrs[j])), h);
        out.value = w * w * (diag + 2.0 * off);
        out.se = 0.0;
        out.exact = true;
        return out;
    }
    if (subsample_rng == nullptr)
        throw BudgetExceeded("energy-pairs",
                             "pair count exceeds budget and no subsample stream given");
    // Uniform subsample of unordered off-diagonal pairs.
    const std::uint64_t m = pair_budget;
    RunStats g_pow;
    for (std::uint64_t k = 0; k < m; ++k) {
        std::uint64_t i = subsample_rng->below(s);
        std::uint64_t j = subsample_rng->below(s - 1);
        if (j >= i) ++j;
        g_pow.push(std::pow(static_cast<double>(first_disagreement(addrs[i], addrs[j])), h));
    }
    const double n_pairs = static_cast<double>(s) * static_cast<double>(s - 1);
    out.value = w * w * (diag + n_pairs * g_pow.mean());
    out.se = w * w * n_pairs * g_pow.se_mean();
    out.exact = false;
    return out;
}

}  // namespace dpl::intersections
