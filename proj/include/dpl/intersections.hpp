#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpl/flow.hpp"
#include "dpl/rng.hpp"
#include "dpl/stats.hpp"

namespace dpl::intersections {

// n-fold iterate of psi(x) = (b-1)/b + x^b/b from 0: probability that the
// critical 0-or-b offspring chain is extinct by generation n.
double extinction_prob(int b, int n);

// Occupied b-adic intervals of the survival-conditioned intersection chain.
// Children are stored in a parent arena so a step is O(1) per member; full
// addresses are materialized on demand.
class PopulationState {
public:
    explicit PopulationState(int b);

    int b() const { return b_; }
    int generation() const { return generation_; }
    std::size_t count() const { return occupied_.size(); }  // xi_tilde

    // Advances one generation: each member receives l in {1..b} children
    // with P[l] = C(b,l) R(r-n-1)^l / (b R(r-n)) placed on a uniform
    // l-subset of its b sub-intervals.  Throws if the pmf fails to
    // normalize to 1e-12 (flow inconsistency).
    void step(const flow::VarianceProfile& profile, RngStream& rng);

    // Addresses (digit sequences, values 1..b) of the occupied intervals,
    // in a canonical order (sorted lexicographically).
    std::vector<std::vector<std::uint8_t>> occupied_addresses() const;

private:
    struct Node {
        std::int32_t parent;
        std::uint8_t digit;
    };
    int b_;
    int generation_ = 0;
    std::vector<Node> arena_;
    std::vector<std::int32_t> occupied_;
};

// Counts-only kernels (same laws as PopulationState, binomial-sampled).
// Offspring counts N[l-1] = #members with l surviving children.
std::vector<std::int64_t> survival_offspring_counts(std::int64_t xi_tilde, int n,
                                                    const flow::VarianceProfile& profile,
                                                    RngStream& rng);
std::int64_t survival_count_step(std::int64_t xi_tilde, int n,
                                 const flow::VarianceProfile& profile, RngStream& rng);

// Skeleton + doomed-bush companion realizing the total overlap chain xi_n
// under the survival-conditioned measure: a reproducing skeleton member has
// b children of which its surviving count are skeleton; doomed members
// reproduce 0-or-b with probability 1/b.
struct PairedCounts {
    std::int64_t xi_tilde = 1;
    std::int64_t doomed = 0;
    std::int64_t total() const { return xi_tilde + doomed; }
};
PairedCounts paired_count_step(PairedCounts state, int n,
                               const flow::VarianceProfile& profile, RngStream& rng);

// Unconditioned chain under the normalized correlation measure: 0-or-b
// offspring with P[b] = (1+R(r-n-1))^b / (b(1+R(r-n))).  Absorbs at 0.
std::int64_t upsilon_hat_count_step(std::int64_t xi, int n,
                                    const flow::VarianceProfile& profile, RngStream& rng);

// Martingale estimators.
double martingale_estimate(std::int64_t xi_tilde, int n,
                           const flow::VarianceProfile& profile);  // (R'/R) xi~
double total_overlap_estimate(std::int64_t xi_total, int n,
                              const flow::VarianceProfile& profile);  // (R'/(1+R)) xi

// Monte Carlo mean of exp(a * m~_n) over survival-conditioned chains;
// the analytic value is R(r+a)/R(r).
double exp_moment_mc(double a, int n, std::uint64_t runs,
                     const flow::VarianceProfile& profile, std::uint64_t seed,
                     int threads = 0);

// Generation-n approximant of the intersection-time measure: density
// b^n * w on every occupied interval, w = R'(r-n)/R(r-n).
struct TauMeasure {
    int b = 2;
    int generation = 0;
    double weight_per_interval = 0.0;
    std::vector<std::vector<std::uint8_t>> occupied;

    double total_mass() const {
        return weight_per_interval * static_cast<double>(occupied.size());
    }
    // Mass of the b-adic interval with the given digit prefix.
    double mass_of_prefix(std::span<const std::uint8_t> digits) const;
};
TauMeasure tau_measure(const PopulationState& state, const flow::VarianceProfile& profile);

// Canonical-cover value of the generalized Hausdorff sum at delta = b^-n:
// xi~_n / (n log b)^h.
double log_hausdorff_sum(std::int64_t xi_tilde, int n, int b, double h);
double log_hausdorff_sum(const PopulationState& state, double h);

// Discrete energy Q~_h = (R'/R)^2 sum_{e1,e2} g(e1,e2)^h over occupied
// pairs, with g the separation generation and g(e,e) = n.  Falls back to
// uniform pair subsampling above `pair_budget` and reports a standard
// error; exact runs have se = 0.
struct EnergyEstimate {
    double value = 0.0;
    double se = 0.0;
    bool exact = true;
};
EnergyEstimate energy_estimate(const PopulationState& state, double h,
                               const flow::VarianceProfile& profile,
                               std::uint64_t pair_budget = 100000000ULL,
                               RngStream* subsample_rng = nullptr);

}  // namespace dpl::intersections
