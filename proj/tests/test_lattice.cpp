#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "dpl/intersections.hpp"
#include "dpl/lattice.hpp"
#include "dpl/rng.hpp"

using namespace dpl;
using namespace dpl::lattice;

TEST_CASE("path_count values and recursion") {
    CHECK(path_count(LatticeParams{2}, 0) == 1);
    CHECK(path_count(LatticeParams{2}, 3) == 128);
    CHECK(path_count(LatticeParams{3}, 2) == 81);
    for (int b : {2, 3}) {
        const LatticeParams params{b};
        for (int n = 0; n <= 5; ++n) {
            BigInt lhs = path_count(params, n + 1);
            BigInt rhs = b * boost::multiprecision::pow(path_count(params, n), b);
            CHECK(lhs == rhs);
        }
    }
    // Overflows 64 bits at b=2, n=6: exact arithmetic required.
    CHECK(path_count(LatticeParams{2}, 6) == BigInt("9223372036854775808"));
}

TEST_CASE("edges_of_path small cases") {
    const LatticeParams params{2};
    // Generation 0: one address of length zero.
    const auto root = edges_of_path(params, trivial_path());
    REQUIRE(root.size() == 1);
    CHECK(root[0].generation == 0);

    // Generation 1, decision 2 -> [(2,1), (2,2)].
    HierPath p1{1, {2}};
    const auto e1 = edges_of_path(params, p1);
    REQUIRE(e1.size() == 2);
    CHECK(e1[0].branch[0] == 2);
    CHECK(e1[0].segment[0] == 1);
    CHECK(e1[1].branch[0] == 2);
    CHECK(e1[1].segment[0] == 2);

    // Generation 2: four edges sharing the top branch digit; the l-th edge's
    // segment digits are the base-b expansion of l-1.
    for (std::uint64_t ix = 0; ix < path_count_u64(params, 2); ++ix) {
        const auto p = path_from_index(params, 2, ix);
        const auto edges = edges_of_path(params, p);
        REQUIRE(edges.size() == 4);
        for (std::size_t l = 0; l < edges.size(); ++l) {
            CHECK(edges[l].branch[0] == p.decisions[0]);
            CHECK(edges[l].segment[0] == 1 + static_cast<int>(l / 2));
            CHECK(edges[l].segment[1] == 1 + static_cast<int>(l % 2));
        }
    }
}

TEST_CASE("edges_of_path is deterministic and injective on Gamma_n") {
    for (int n = 1; n <= 3; ++n) {
        const LatticeParams params{2};
        std::set<std::vector<std::uint64_t>> seen;
        for (std::uint64_t ix = 0; ix < path_count_u64(params, n); ++ix) {
            const auto p = path_from_index(params, n, ix);
            std::vector<std::uint64_t> key;
            for (const auto& e : edges_of_path(params, p))
                key.push_back(e.canonical_index(2));
            CHECK(seen.insert(key).second);
        }
    }
}

TEST_CASE("shared_edge_count: identities, symmetry, totals") {
    for (int b : {2, 3}) {
        const LatticeParams params{b};
        RngStream rng(7, static_cast<std::uint64_t>(b));
        for (int n = 0; n <= 3; ++n) {
            const auto p = sample_uniform_path(params, n, rng);
            std::uint64_t bn = 1;
            for (int k = 0; k < n; ++k) bn *= static_cast<std::uint64_t>(b);
            CHECK(shared_edge_count(params, p, p) == bn);
        }
    }
    const LatticeParams params{2};
    // Exhaustive at b=2, n <= 3: symmetry, agreement with explicit edge
    // intersection, and total sum |Gamma_n|^2 (mean overlap exactly one).
    for (int n = 1; n <= 3; ++n) {
        const std::uint64_t count = path_count_u64(params, n);
        BigInt total = 0;
        for (std::uint64_t i = 0; i < count; ++i) {
            const auto p = path_from_index(params, n, i);
            const auto pe = edges_of_path(params, p);
            for (std::uint64_t j = i; j < count; ++j) {
                const auto q = path_from_index(params, n, j);
                const auto xi = shared_edge_count(params, p, q);
                CHECK(xi == shared_edge_count(params, q, p));
                if (p.decisions[0] != q.decisions[0]) CHECK(xi == 0);
                const auto qe = edges_of_path(params, q);
                std::uint64_t direct = 0;
                for (std::size_t l = 0; l < pe.size(); ++l)
                    if (pe[l] == qe[l]) ++direct;
                CHECK(xi == direct);
                total += (i == j) ? BigInt(xi) : 2 * BigInt(xi);
            }
        }
        CHECK(total == BigInt(count) * count);
    }
}

TEST_CASE("separation_generation") {
    EdgeAddress e{2, {1, 1}, {1, 1}};
    EdgeAddress f{2, {1, 2}, {1, 2}};
    CHECK(separation_generation(e, f) == 2);
    EdgeAddress g{2, {2, 1}, {1, 1}};
    CHECK(separation_generation(e, g) == 1);
    CHECK_THROWS(separation_generation(e, e));

    // Exhaustive over E_3 at b=2: g in {1..3}, symmetric.
    const LatticeParams params{2};
    std::vector<EdgeAddress> edges;
    for (std::uint64_t ix = 0; ix < path_count_u64(params, 3); ++ix)
        for (const auto& e3 : edges_of_path(params, path_from_index(params, 3, ix)))
            if (edges.end() == std::find(edges.begin(), edges.end(), e3))
                edges.push_back(e3);
    CHECK(edges.size() == 64);
    for (std::size_t i = 0; i < edges.size(); ++i)
        for (std::size_t j = i + 1; j < edges.size(); ++j) {
            const int gd = separation_generation(edges[i], edges[j]);
            CHECK(gd >= 1);
            CHECK(gd <= 3);
            CHECK(gd == separation_generation(edges[j], edges[i]));
        }
}

TEST_CASE("coarse_grain is consistent with edge prefixes") {
    const LatticeParams params{2};
    RngStream rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = sample_uniform_path(params, 3, rng);
        for (int N = 0; N <= 3; ++N) {
            const auto coarse = coarse_grain(params, p, N);
            const auto ce = edges_of_path(params, coarse);
            const auto fe = edges_of_path(params, p);
            const std::size_t per = fe.size() / ce.size();
            for (std::size_t l = 0; l < fe.size(); ++l) {
                const auto& want = ce[l / per];
                for (int k = 0; k < N; ++k) {
                    CHECK(fe[l].branch[k] == want.branch[k]);
                    CHECK(fe[l].segment[k] == want.segment[k]);
                }
            }
        }
    }
}

TEST_CASE("path index round trip") {
    for (int b : {2, 3}) {
        const LatticeParams params{b};
        for (int n = 0; n <= 2; ++n)
            for (std::uint64_t ix = 0; ix < path_count_u64(params, n); ++ix)
                CHECK(path_index(params, path_from_index(params, n, ix)) == ix);
    }
}

TEST_CASE("uniform path sampler: trivial case and cylinder chi-square") {
    const LatticeParams params{2};
    RngStream rng(4242);
    CHECK(sample_uniform_path(params, 0, rng) == trivial_path());

    const std::uint64_t cells = path_count_u64(params, 2);  // 8
    std::vector<std::uint64_t> hits(cells, 0);
    const std::uint64_t draws = 100000;
    for (std::uint64_t s = 0; s < draws; ++s)
        ++hits[path_index(params, sample_uniform_path(params, 2, rng))];
    const double expect = static_cast<double>(draws) / static_cast<double>(cells);
    double chi2 = 0.0;
    for (auto h : hits) chi2 += (h - expect) * (h - expect) / expect;
    CHECK(chi2 < 18.4753);  // chi-square 0.99 quantile, 7 dof
}

TEST_CASE("pair survival frequency matches the psi iteration") {
    // P[xi_10 > 0] for two independent uniform paths = 1 - psi^10(0).
    const LatticeParams params{2};
    const double p_surv = 1.0 - intersections::extinction_prob(2, 10);
    RngStream rng(31337);
    const std::uint64_t pairs = 100000;
    std::uint64_t hits = 0;
    for (std::uint64_t s = 0; s < pairs; ++s) {
        const auto p = sample_uniform_path(params, 10, rng);
        const auto q = sample_uniform_path(params, 10, rng);
        if (shared_edge_count(params, p, q) > 0) ++hits;
    }
    const double freq = static_cast<double>(hits) / pairs;
    const double se = std::sqrt(p_surv * (1.0 - p_surv) / pairs);
    CHECK(std::fabs(freq - p_surv) <= 3.0 * se);
}
