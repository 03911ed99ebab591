#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <span>
#include <vector>

#include "dpl/rng.hpp"

namespace dpl::lattice {

using BigInt = boost::multiprecision::cpp_int;

struct LatticeParams {
    int b;  // branching = segmenting number, >= 2
};

// Number of decisions a generation-n path carries: (b^n - 1)/(b - 1).
std::size_t decision_count(int b, int n);

// |Gamma_n| = b^((b^n - 1)/(b - 1)), exact.
BigInt path_count(const LatticeParams& params, int n);

// |E_n| = b^(2n), exact.
BigInt edge_count(const LatticeParams& params, int n);

// Generation-n edge as its digit sequence (branch_k, segment_k), 1-based
// components.  The canonical index reads the digits most-significant first
// in base b^2 with digit (branch-1)*b + (segment-1).
struct EdgeAddress {
    int generation = 0;
    std::vector<std::uint8_t> branch;
    std::vector<std::uint8_t> segment;

    std::uint64_t canonical_index(int b) const;
    bool operator==(const EdgeAddress&) const = default;
};

// Directed path as its branch decisions in depth-first order: the top-level
// choice first, then the decision blocks of the b sub-paths in segment
// order.  Each sub-block is itself a valid generation-(n-1) path, so
// recursion works on contiguous spans.
struct HierPath {
    int generation = 0;
    std::vector<std::uint8_t> decisions;  // values in 1..b

    bool operator==(const HierPath&) const = default;
};

// Trivial generation-0 path (no decisions, occupies the root edge).
HierPath trivial_path();

// The b^n edges crossed by p, in time order; at n = 0 this is one address
// of length zero (root edge convention).
std::vector<EdgeAddress> edges_of_path(const LatticeParams& params, const HierPath& p);

// Overlap xi_n(p, q): number of generation-n edges shared by p and q.
// Recursive: zero when the top decisions differ, otherwise the sum over
// the b segments; xi_0 = 1 by the root-edge convention.
std::uint64_t shared_edge_count(const LatticeParams& params, const HierPath& p,
                                const HierPath& q);

// Smallest k >= 1 at which the digit prefixes of two distinct equal-
// generation edges differ.  Throws on e == f.
int separation_generation(const EdgeAddress& e, const EdgeAddress& f);

// Uniform path: every decision independently uniform on 1..b.
HierPath sample_uniform_path(const LatticeParams& params, int n, RngStream& rng);

// Canonical enumeration of Gamma_n: the decision vector read as a base-b
// number, most significant first.  Requires |Gamma_n| to fit in 64 bits.
HierPath path_from_index(const LatticeParams& params, int n, std::uint64_t index);
std::uint64_t path_index(const LatticeParams& params, const HierPath& p);
std::uint64_t path_count_u64(const LatticeParams& params, int n);

// Coarse-grained path [p]_N for N <= generation(p).
HierPath coarse_grain(const LatticeParams& params, const HierPath& p, int N);

// Span-based overlap used by the recursion (exposed for tests that stream
// large generations without materializing HierPath objects).
std::uint64_t shared_edge_count_span(int b, int n, std::span<const std::uint8_t> p,
                                     std::span<const std::uint8_t> q);

}  // namespace dpl::lattice
