#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dpl/errors.hpp"
#include "dpl/polymer_mc.hpp"

using namespace dpl;
using namespace dpl::polymer;

TEST_CASE("base_array: beta = 0 gives exact ones; moments match the lognormal") {
    RngStream rng(5, 0);
    const DisorderModel g{DisorderKind::gaussian};
    auto ones = base_array(2, 3, 0.0, g, rng);
    CHECK((ones.values == 1.0).all());

    const double beta = 0.3;
    RunStats st;
    RngStream rng2(6, 0);
    const auto arr = base_array(2, 10, beta, g, rng2);  // 4^10 entries ~ 1e6
    for (Eigen::Index i = 0; i < arr.values.size(); ++i) st.push(arr.values[i]);
    CHECK(std::fabs(st.mean() - 1.0) <= 3.0 * st.se_mean());
    const double want_var = std::exp(beta * beta) - 1.0;
    CHECK(std::fabs(st.variance() - want_var) <= 3.0 * st.se_variance());
}

TEST_CASE("base_array rejects beta outside the MGF domain") {
    RngStream rng(5, 0);
    const DisorderModel se{DisorderKind::shifted_exponential};
    CHECK_THROWS_AS(base_array(2, 2, 1.0, se, rng), std::domain_error);
    CHECK_NOTHROW(base_array(2, 2, 0.5, se, rng));
}

TEST_CASE("disorder models have mean 0, variance 1, declared skew") {
    for (auto kind : {DisorderKind::gaussian, DisorderKind::rademacher,
                      DisorderKind::shifted_exponential}) {
        const DisorderModel m{kind};
        RngStream rng(77, static_cast<std::uint64_t>(kind));
        RunStats st;
        for (int i = 0; i < 400000; ++i) st.push(m.sample(rng));
        CHECK(std::fabs(st.mean()) <= 4.0 * st.se_mean());
        CHECK(std::fabs(st.variance() - 1.0) <= 4.0 * st.se_variance());
        CHECK(std::fabs(st.third_central() - m.skew()) <= 0.1);
        // lambda''(0) = 1, lambda'''(0) = skew (finite differences).
        const double h = 1e-3;
        const double l2 = (m.log_mgf(h) - 2 * m.log_mgf(0.0) + m.log_mgf(-h)) / (h * h);
        CHECK(std::fabs(l2 - 1.0) <= 1e-5);
        const double l3 =
            (m.log_mgf(2 * h) - 2 * m.log_mgf(h) + 2 * m.log_mgf(-h) - m.log_mgf(-2 * h)) /
            (2 * h * h * h);
        CHECK(std::fabs(l3 - m.skew()) <= 1e-4);
    }
}

TEST_CASE("coarsen: ones, hand example, budget") {
    PartitionArray ones{2, 1, Eigen::ArrayXd::Ones(4)};
    const auto c = coarsen(ones);
    CHECK(c.generation == 0);
    CHECK(c.values.size() == 1);
    CHECK(c.values[0] == 1.0);

    PartitionArray hand{2, 1, Eigen::ArrayXd(4)};
    hand.values << 2.0, 0.0, 1.0, 1.0;  // branch-major (1,1),(1,2),(2,1),(2,2)
    CHECK(coarsen(hand).values[0] == 0.5);

    CHECK_THROWS(coarsen(c));  // generation 0
}

TEST_CASE("coarsening equals the brute-force path sum") {
    const lattice::LatticeParams params{2};
    const DisorderModel g{DisorderKind::gaussian};
    for (int n : {1, 2}) {
        RngStream rng(11, static_cast<std::uint64_t>(n));
        const auto arr = base_array(2, n, 0.7, g, rng);
        const auto w0 = coarsen_to(arr, 0).values[0];
        double brute = 0.0;
        const std::uint64_t count = lattice::path_count_u64(params, n);
        for (std::uint64_t i = 0; i < count; ++i) {
            const auto p = lattice::path_from_index(params, n, i);
            double prod = 1.0;
            for (const auto& e : lattice::edges_of_path(params, p))
                prod *= arr.values[static_cast<Eigen::Index>(e.canonical_index(2))];
            brute += prod;
        }
        brute /= static_cast<double>(count);
        CHECK(std::fabs(w0 - brute) / brute <= 1e-12);
    }
}

TEST_CASE("simulate_partition: exact mean, zero-beta degeneracy, guards") {
    const DisorderModel g{DisorderKind::gaussian};
    const auto st = simulate_partition(2, 4, -2.0, g, 4000, 123);
    CHECK(std::fabs(st.mean() - 1.0) <= 3.0 * st.se_mean());

    // Budget guard: b^(2n) > 2^30.
    CHECK_THROWS_AS(simulate_partition(2, 16, 0.0, g, 1, 1), BudgetExceeded);
}

TEST_CASE("simulate_partition is bit-identical across thread counts") {
    const DisorderModel g{DisorderKind::gaussian};
    const auto a = simulate_partition(2, 4, -2.0, g, 1024, 99, 1);
    const auto b = simulate_partition(2, 4, -2.0, g, 1024, 99, 4);
    CHECK(a.mean() == b.mean());
    CHECK(a.variance() == b.variance());
    CHECK(a.third_central() == b.third_central());
    CHECK(a.fourth_central() == b.fourth_central());
}

TEST_CASE("variance-matched calibration recovers R(r) in expectation at mild r") {
    // At r = -8 the limit law is light-tailed enough for sample variance to
    // resolve the target; the asymptotic-formula beta is left to the
    // acceptance suite, which exercises the configuration named there.
    const double r = -8.0;
    const auto prof = flow::eval_moment_profile(r, 310, 2);
    const DisorderModel g{DisorderKind::gaussian};
    const auto st =
        simulate_partition(2, 8, r, g, 20000, 2024, 0, /*variance_matched_beta=*/true);
    CHECK(std::fabs(st.mean() - 1.0) <= 3.0 * st.se_mean());
    CHECK(std::fabs(st.variance() - prof.R[0]) <=
          std::max(4.0 * st.se_variance(), 0.05 * prof.R[0]));
}

TEST_CASE("pool sampler at mild r: mean one, variance near R, third moment sane") {
    // The combining flow is expanding, so resampling noise injected at depth
    // is amplified toward the top; a single pool realization carries O(1)
    // relative noise at deep level counts.  Shallow levels with a pinned
    // seed keep this a meaningful regression test.
    const double r = -5.0;
    const auto prof = flow::eval_moment_profile(r, 400, 2);
    const auto pool = sample_limit_mass_pool(2, r, 30, 200000, 77);
    CHECK(pool.non_finite == 0);
    const auto& st = pool.stats;
    CHECK(std::fabs(st.mean() - 1.0) <= 1e-12);  // renormalized each round
    CHECK(std::fabs(st.variance() - prof.R[0]) <= 0.25 * prof.R[0]);
    CHECK(st.third_central() > 0.0);
    CHECK(st.min() > 0.0);
    CHECK_THROWS(sample_limit_mass_pool(2, r, 100, 5000, 77));  // pool floor
}

TEST_CASE("limit tree: property (IV) holds bit-exactly between levels") {
    const auto tree = sample_limit_tree(2, 0.0, 3, 5, 31);
    for (int k = 0; k < 3; ++k) {
        const auto re = coarsen(tree.levels[k + 1]);
        CHECK(re.values.size() == tree.levels[k].values.size());
        for (Eigen::Index i = 0; i < re.values.size(); ++i)
            CHECK(re.values[i] == tree.levels[k].values[i]);
    }
}

TEST_CASE("limit tree: cylinder masses sum to the total mass") {
    const auto tree = sample_limit_tree(2, 0.0, 2, 6, 13);
    const lattice::LatticeParams params{2};
    double sum = 0.0;
    for (std::uint64_t i = 0; i < lattice::path_count_u64(params, 2); ++i)
        sum += cylinder_mass(tree, lattice::path_from_index(params, 2, i));
    CHECK(std::fabs(sum - tree.levels[0].values[0]) / sum <= 1e-12);
}

TEST_CASE("limit tree marginal variance against the pool oracle at mild r") {
    const double r = -8.0;
    const auto prof = flow::eval_moment_profile(r, 400, 2);
    RunStats st;
    for (std::uint64_t s = 0; s < 4000; ++s) {
        const auto tree = sample_limit_tree(2, r, 0, 8, 1000 + s);
        st.push(tree.levels[0].values[0]);
    }
    const auto pool = sample_limit_mass_pool(2, r, 30, 200000, 55);
    CHECK(std::fabs(st.mean() - 1.0) <= 4.0 * st.se_mean());
    // Exact trees are unbiased; the pool carries amplified resampling noise.
    CHECK(std::fabs(st.variance() - prof.R[0]) <=
          std::max(4.0 * st.se_variance(), 0.05 * prof.R[0]));
    CHECK(std::fabs(st.variance() - pool.stats.variance()) <= 0.3 * prof.R[0]);
}

TEST_CASE("polymer path sampler: uniform law on an all-ones tree") {
    LimitTree tree;
    tree.b = 2;
    tree.r = 0.0;
    tree.K = 2;
    for (int k = 0; k <= 2; ++k) {
        PartitionArray a{2, k, Eigen::ArrayXd::Ones(static_cast<Eigen::Index>(1) << (2 * k))};
        tree.levels.push_back(a);
    }
    const lattice::LatticeParams params{2};
    RngStream rng(7);
    std::vector<std::uint64_t> hits(8, 0);
    const std::uint64_t draws = 100000;
    for (std::uint64_t s = 0; s < draws; ++s)
        ++hits[lattice::path_index(params, sample_polymer_path(tree, 2, rng))];
    const double expect = draws / 8.0;
    double chi2 = 0.0;
    for (auto h : hits) chi2 += (h - expect) * (h - expect) / expect;
    CHECK(chi2 < 18.4753);  // 0.99 quantile, 7 dof
}

TEST_CASE("polymer path sampler matches the frozen tree's cylinder law") {
    const auto tree = sample_limit_tree(2, 0.0, 2, 6, 99);
    const lattice::LatticeParams params{2};
    std::vector<double> probs(8);
    double total = 0.0;
    for (int i = 0; i < 8; ++i) {
        probs[i] = cylinder_mass(tree, lattice::path_from_index(params, 2, i));
        total += probs[i];
    }
    for (auto& p : probs) p /= total;

    RngStream rng(3);
    std::vector<std::uint64_t> hits(8, 0);
    const std::uint64_t draws = 100000;
    for (std::uint64_t s = 0; s < draws; ++s)
        ++hits[lattice::path_index(params, sample_polymer_path(tree, 2, rng))];
    double chi2 = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double expect = draws * probs[i];
        chi2 += (hits[i] - expect) * (hits[i] - expect) / expect;
    }
    CHECK(chi2 < 18.4753);  // 0.99 quantile, 7 dof
}

TEST_CASE("pair overlap under the sampled polymer paths trends toward R'(r)") {
    // Qualitative: kappa^2 xi_N / N^2 averaged over trees and pairs should
    // not decrease as N grows and should sit within an order of magnitude
    // of R'(r) already at these depths.
    const lattice::LatticeParams params{2};
    const double rp = flow::eval_Rprime(0.0, 300, 2);
    std::vector<double> means;
    for (int N : {4, 6, 8}) {
        RunStats st;
        for (std::uint64_t t = 0; t < 60; ++t) {
            const auto tree = sample_limit_tree(2, 0.0, N, 2, 500 + t);
            RngStream rng(17, t);
            for (int pair = 0; pair < 40; ++pair) {
                const auto p = sample_polymer_path(tree, N, rng);
                const auto q = sample_polymer_path(tree, N, rng);
                const double xi =
                    static_cast<double>(lattice::shared_edge_count(params, p, q));
                st.push(2.0 * xi / (static_cast<double>(N) * N));
            }
        }
        means.push_back(st.mean());
    }
    CHECK(means[2] > 0.2 * means[0]);  // no collapse
    CHECK(means[2] < 10.0 * rp);
    CHECK(means[0] < 10.0 * rp);
}

TEST_CASE("strong disorder scan") {
    // Variance-zero seed: all members equal one, nothing below eps.
    const auto rows0 = strong_disorder_scan(2, {-8.0}, 60, 20000, 3);
    CHECK(rows0[0].frac_below_eps <= 0.01);

    const auto rows = strong_disorder_scan(2, {0.0, 8.0}, 100, 100000, 3);
    CHECK(rows[1].frac_below_eps >= rows[0].frac_below_eps);
    CHECK(rows[1].frac_below_eps > 0.5);
}
