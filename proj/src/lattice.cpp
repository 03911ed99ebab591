#include "dpl/lattice.hpp"

#include <stdexcept>

#include "dpl/errors.hpp"

namespace dpl::lattice {

namespace {

void check_params(const LatticeParams& params) {
    if (params.b < 2) throw std::invalid_argument("branching number b must be >= 2");
}

void check_path(const LatticeParams& params, const HierPath& p) {
    if (p.decisions.size() != decision_count(params.b, p.generation))
        throw std::invalid_argument("path decision vector has wrong length for its generation");
}

}  // namespace

std::size_t decision_count(int b, int n) {
    if (n < 0) throw std::invalid_argument("generation must be >= 0");
    std::size_t m = 0;
    std::size_t level = 1;
    for (int k = 0; k < n; ++k) {
        m += level;
        level *= static_cast<std::size_t>(b);
    }
    return m;
}

BigInt path_count(const LatticeParams& params, int n) {
    check_params(params);
    if (n < 0) throw std::invalid_argument("generation must be >= 0");
    BigInt exponent = (boost::multiprecision::pow(BigInt(params.b), n) - 1) / (params.b - 1);
    BigInt result = 1;
    BigInt base = params.b;
    BigInt e = exponent;
    while (e > 0) {
        if ((e & 1) != 0) result *= base;
        base *= base;
        e >>= 1;
    }
    return result;
}

BigInt edge_count(const LatticeParams& params, int n) {
    check_params(params);
    return boost::multiprecision::pow(BigInt(params.b), 2 * n);
}

std::uint64_t EdgeAddress::canonical_index(int b) const {
    const std::uint64_t base = static_cast<std::uint64_t>(b) * b;
    std::uint64_t idx = 0;
    for (int k = 0; k < generation; ++k) {
        if (idx > (UINT64_MAX - base) / base)
            throw BudgetExceeded("edge-index-64bit", "canonical edge index exceeds 64 bits");
        idx = idx * base + static_cast<std::uint64_t>(branch[k] - 1) * b + (segment[k] - 1);
    }
    return idx;
}

HierPath trivial_path() { return HierPath{0, {}}; }

namespace {

// Appends the edges of the sub-path `dec` (a generation-n decision block)
// to `out`, prefixing every address with the digits accumulated so far.
void expand_edges(int b, int n, std::span<const std::uint8_t> dec,
                  std::vector<std::uint8_t>& branch_prefix,
                  std::vector<std::uint8_t>& segment_prefix,
                  std::vector<EdgeAddress>& out) {
    if (n == 0) {
        EdgeAddress e;
        e.generation = static_cast<int>(branch_prefix.size());
        e.branch = branch_prefix;
        e.segment = segment_prefix;
        out.push_back(std::move(e));
        return;
    }
    const std::uint8_t top = dec[0];
    const std::size_t block = decision_count(b, n - 1);
    for (int j = 1; j <= b; ++j) {
        branch_prefix.push_back(top);
        segment_prefix.push_back(static_cast<std::uint8_t>(j));
        expand_edges(b, n - 1, dec.subspan(1 + (j - 1) * block, block), branch_prefix,
                     segment_prefix, out);
        branch_prefix.pop_back();
        segment_prefix.pop_back();
    }
}

}  // namespace

std::vector<EdgeAddress> edges_of_path(const LatticeParams& params, const HierPath& p) {
    check_params(params);
    check_path(params, p);
    std::vector<EdgeAddress> out;
    std::size_t count = 1;
    for (int k = 0; k < p.generation; ++k) count *= static_cast<std::size_t>(params.b);
    out.reserve(count);
    std::vector<std::uint8_t> bp, sp;
    expand_edges(params.b, p.generation, std::span<const std::uint8_t>(p.decisions), bp, sp,
                 out);
    return out;
}

std::uint64_t shared_edge_count_span(int b, int n, std::span<const std::uint8_t> p,
                                     std::span<const std::uint8_t> q) {
    if (n == 0) return 1;  // root edge convention
    if (p[0] != q[0]) return 0;
    if (n == 1) return static_cast<std::uint64_t>(b);
    const std::size_t block = decision_count(b, n - 1);
    std::uint64_t sum = 0;
    for (int j = 0; j < b; ++j)
        sum += shared_edge_count_span(b, n - 1, p.subspan(1 + j * block, block),
                                      q.subspan(1 + j * block, block));
    return sum;
}

std::uint64_t shared_edge_count(const LatticeParams& params, const HierPath& p,
                                const HierPath& q) {
    check_params(params);
    check_path(params, p);
    check_path(params, q);
    if (p.generation != q.generation)
        throw std::invalid_argument("shared_edge_count requires equal generations");
    return shared_edge_count_span(params.b, p.generation, p.decisions, q.decisions);
}

int separation_generation(const EdgeAddress& e, const EdgeAddress& f) {
    if (e.generation != f.generation)
        throw std::invalid_argument("separation_generation requires equal generations");
    for (int k = 0; k < e.generation; ++k)
        if (e.branch[k] != f.branch[k] || e.segment[k] != f.segment[k]) return k + 1;
    throw std::invalid_argument("separation_generation is undefined for identical edges");
}

HierPath sample_uniform_path(const LatticeParams& params, int n, RngStream& rng) {
    check_params(params);
    HierPath p;
    p.generation = n;
    p.decisions.resize(decision_count(params.b, n));
    for (auto& d : p.decisions)
        d = static_cast<std::uint8_t>(1 + rng.below(static_cast<std::uint64_t>(params.b)));
    return p;
}

std::uint64_t path_count_u64(const LatticeParams& params, int n) {
    const BigInt c = path_count(params, n);
    if (c > BigInt(UINT64_MAX))
        throw BudgetExceeded("path-enumeration-64bit",
                             "|Gamma_n| exceeds 64 bits; enumeration not available");
    return static_cast<std::uint64_t>(c);
}

HierPath path_from_index(const LatticeParams& params, int n, std::uint64_t index) {
    check_params(params);
    const std::size_t m = decision_count(params.b, n);
    HierPath p;
    p.generation = n;
    p.decisions.assign(m, 1);
    for (std::size_t k = m; k-- > 0;) {
        p.decisions[k] = static_cast<std::uint8_t>(1 + index % params.b);
        index /= params.b;
    }
    if (index != 0) throw std::invalid_argument("path index out of range");
    return p;
}

std::uint64_t path_index(const LatticeParams& params, const HierPath& p) {
    check_params(params);
    check_path(params, p);
    std::uint64_t idx = 0;
    for (std::uint8_t d : p.decisions) {
        if (idx > (UINT64_MAX - (d - 1u)) / params.b)
            throw BudgetExceeded("path-enumeration-64bit", "path index exceeds 64 bits");
        idx = idx * params.b + (d - 1u);
    }
    return idx;
}

namespace {

void gather_coarse(int b, int n, int N, std::span<const std::uint8_t> dec,
                   std::vector<std::uint8_t>& out) {
    if (N == 0) return;
    out.push_back(dec[0]);
    const std::size_t block = decision_count(b, n - 1);
    for (int j = 0; j < b; ++j)
        gather_coarse(b, n - 1, N - 1, dec.subspan(1 + j * block, block), out);
}

}  // namespace

HierPath coarse_grain(const LatticeParams& params, const HierPath& p, int N) {
    check_params(params);
    check_path(params, p);
    if (N < 0 || N > p.generation)
        throw std::invalid_argument("coarse_grain requires 0 <= N <= generation");
    HierPath out;
    out.generation = N;
    out.decisions.reserve(decision_count(params.b, N));
    gather_coarse(params.b, p.generation, N, p.decisions, out.decisions);
    return out;
}

}  // namespace dpl::lattice
