#include "dpl/polymer_mc.hpp"

#include <cmath>
#include <stdexcept>

#include "dpl/errors.hpp"
#include "dpl/parallel.hpp"

namespace dpl::polymer {

namespace {

std::uint64_t checked_length(int b, int n) {
    std::uint64_t len = 1;
    for (int k = 0; k < 2 * n; ++k) {
        len *= static_cast<std::uint64_t>(b);
        if (len > kArrayBudget)
            throw BudgetExceeded("partition-array",
                                 "b^(2n) exceeds the 2^30 entry budget");
    }
    return len;
}

// Mean-one lognormal with the given variance.
double lognormal_member(double sigma, double half_sigma_sq, RngStream& rng) {
    return std::exp(sigma * rng.normal() - half_sigma_sq);
}

}  // namespace

PartitionArray base_array(int b, int n, double beta, const DisorderModel& model,
                          RngStream& rng) {
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
    if (beta >= model.beta_max())
        throw std::domain_error("beta outside the MGF domain of the disorder law");
    const std::uint64_t len = checked_length(b, n);
    const double lambda = model.log_mgf(beta);
    PartitionArray arr;
    arr.b = b;
    arr.generation = n;
    arr.values.resize(static_cast<Eigen::Index>(len));
    if (beta == 0.0) {
        arr.values.setOnes();
        return arr;
    }
    switch (model.kind) {
        case DisorderKind::rademacher: {
            // Two-point law: precompute both weights.
            const double up = std::exp(beta - lambda);
            const double down = std::exp(-beta - lambda);
            for (Eigen::Index i = 0; i < arr.values.size(); ++i)
                arr.values[i] = (rng() >> 63) ? up : down;
            return arr;
        }
        case DisorderKind::gaussian: {
            // Scalar polar normals, then one vectorized exp pass.
            for (Eigen::Index i = 0; i < arr.values.size(); ++i)
                arr.values[i] = rng.normal();
            arr.values = (beta * arr.values - lambda).exp();
            return arr;
        }
        case DisorderKind::shifted_exponential: {
            const Eigen::Index m = arr.values.size();
            Eigen::ArrayXd u(m);
            for (Eigen::Index i = 0; i < m; ++i) u[i] = 1.0 - rng.uniform01();
            // omega = -log(u) - 1 for u uniform on (0, 1].
            arr.values = (-beta * u.log() - (beta + lambda)).exp();
            return arr;
        }
    }
    return arr;
}

PartitionArray coarsen(const PartitionArray& arr) {
    if (arr.generation < 1) throw std::invalid_argument("cannot coarsen generation 0");
    const int b = arr.b;
    const Eigen::Index bsq = static_cast<Eigen::Index>(b) * b;
    PartitionArray out;
    out.b = b;
    out.generation = arr.generation - 1;
    out.values.resize(arr.values.size() / bsq);
    for (Eigen::Index e = 0; e < out.values.size(); ++e) {
        const Eigen::Index base = e * bsq;
        double sum = 0.0;
        for (int i = 0; i < b; ++i) {
            double prod = 1.0;
            for (int j = 0; j < b; ++j) prod *= arr.values[base + i * b + j];
            sum += prod;
        }
        out.values[e] = sum / b;
    }
    return out;
}

PartitionArray coarsen_to(PartitionArray arr, int target_generation) {
    while (arr.generation > target_generation) arr = coarsen(arr);
    return arr;
}

double partition_beta(int b, int n, double r, const DisorderModel& model,
                      bool variance_matched_beta) {
    if (!variance_matched_beta)
        return flow::eval_beta(n, r, flow::FlowConstants::make(b, model.skew()));
    const auto profile = flow::eval_moment_profile(r, n + 300, b);
    const double hi = std::min(model.beta_max() * 0.999, 20.0);
    return flow::beta_variance_matched(
        profile.R[n], [&](double x) { return model.log_mgf(x); }, hi);
}

RunStats simulate_partition(int b, int n, double r, const DisorderModel& model,
                            std::uint64_t samples, std::uint64_t seed, int threads,
                            bool variance_matched_beta) {
    checked_length(b, n);
    const double beta = partition_beta(b, n, r, model, variance_matched_beta);

    const std::uint64_t chunk = 64;
    const std::uint64_t n_chunks = (samples + chunk - 1) / chunk;
    std::vector<RunStats> partials(n_chunks);
    for_each_chunk(samples, chunk, threads,
                   [&](std::uint64_t c, std::uint64_t lo, std::uint64_t hi) {
                       RunStats acc;
                       for (std::uint64_t s = lo; s < hi; ++s) {
                           RngStream rng(seed, s, 0);
                           PartitionArray arr = base_array(b, n, beta, model, rng);
                           arr = coarsen_to(std::move(arr), 0);
                           acc.push(arr.values[0]);
                       }
                       partials[c] = acc;
                   });
    RunStats total;
    for (const auto& p : partials) total.merge(p);
    return total;
}

namespace {

struct PoolRun {
    Eigen::ArrayXd pool;
    std::uint64_t non_finite = 0;
};

// The empirical pool mean obeys m -> m^b per combining round, so the exact
// mean-one fixed point is exponentially unstable under resampling noise: a
// seed fluctuation of order pool^{-1/2} collapses (or blows up) the pool
// within ~log_b(sqrt(pool)) rounds.  Since the target law has mean exactly
// one, the pool is renormalized to mean one after every round; this removes
// only the unstable direction and biases the remaining moments by
// O(levels/pool).
void renormalize_mean(Eigen::ArrayXd& pool, std::uint64_t chunk, int threads) {
    const std::uint64_t n = static_cast<std::uint64_t>(pool.size());
    std::vector<double> sums((n + chunk - 1) / chunk, 0.0);
    for_each_chunk(n, chunk, threads,
                   [&](std::uint64_t c, std::uint64_t lo, std::uint64_t hi) {
                       double s = 0.0;
                       for (std::uint64_t i = lo; i < hi; ++i)
                           s += pool[static_cast<Eigen::Index>(i)];
                       sums[c] = s;
                   });
    double total = 0.0;
    for (double s : sums) total += s;
    const double mean = total / static_cast<double>(n);
    if (!(mean > 0.0) || !std::isfinite(mean)) return;  // degenerate pool; leave as is
    const double inv = 1.0 / mean;
    for_each_chunk(n, chunk, threads,
                   [&](std::uint64_t, std::uint64_t lo, std::uint64_t hi) {
                       for (std::uint64_t i = lo; i < hi; ++i)
                           pool[static_cast<Eigen::Index>(i)] *= inv;
                   });
}

PoolRun run_pool(int b, double r, int levels, std::uint64_t pool_size, std::uint64_t seed,
                 std::uint64_t key, int threads) {
    if (pool_size < 10000)
        throw std::invalid_argument("pool_size must be >= 1e4");
    const auto profile = flow::eval_moment_profile(r, levels + 300, b);
    const double v0 = profile.R[levels];
    const double sigma_sq = std::log1p(v0);
    const double sigma = std::sqrt(sigma_sq);

    Eigen::ArrayXd cur(static_cast<Eigen::Index>(pool_size));
    Eigen::ArrayXd next(static_cast<Eigen::Index>(pool_size));
    const std::uint64_t chunk = std::uint64_t{1} << 15;

    for_each_chunk(pool_size, chunk, threads,
                   [&](std::uint64_t c, std::uint64_t lo, std::uint64_t hi) {
                       RngStream rng(seed, key, /*level=*/0, c);
                       for (std::uint64_t i = lo; i < hi; ++i)
                           cur[static_cast<Eigen::Index>(i)] =
                               lognormal_member(sigma, 0.5 * sigma_sq, rng);
                   });
    renormalize_mean(cur, chunk, threads);

    for (int lev = 1; lev <= levels; ++lev) {
        for_each_chunk(pool_size, chunk, threads,
                       [&](std::uint64_t c, std::uint64_t lo, std::uint64_t hi) {
                           RngStream rng(seed, key, static_cast<std::uint64_t>(lev), c);
                           for (std::uint64_t i = lo; i < hi; ++i) {
                               double sum = 0.0;
                               for (int br = 0; br < b; ++br) {
                                   double prod = 1.0;
                                   for (int sg = 0; sg < b; ++sg)
                                       prod *= cur[static_cast<Eigen::Index>(
                                           rng.below(pool_size))];
                                   sum += prod;
                               }
                               next[static_cast<Eigen::Index>(i)] = sum / b;
                           }
                       });
        cur.swap(next);
        renormalize_mean(cur, chunk, threads);
    }

    PoolRun out;
    out.pool = std::move(cur);
    for (Eigen::Index i = 0; i < out.pool.size(); ++i)
        if (!std::isfinite(out.pool[i])) ++out.non_finite;
    return out;
}

}  // namespace

PoolResult sample_limit_mass_pool(int b, double r, int levels, std::uint64_t pool_size,
                                  std::uint64_t seed, int threads, double eps) {
    PoolRun run = run_pool(b, r, levels, pool_size, seed, /*key=*/0, threads);
    PoolResult out;
    std::uint64_t below = 0;
    for (Eigen::Index i = 0; i < run.pool.size(); ++i) {
        out.stats.push(run.pool[i]);
        if (run.pool[i] < eps) ++below;
    }
    out.non_finite = run.non_finite;
    out.below_eps_fraction = static_cast<double>(below) / static_cast<double>(pool_size);
    return out;
}

LimitTree sample_limit_tree(int b, double r, int K, int tree_depth, std::uint64_t seed) {
    if (K < 0 || tree_depth < 0) throw std::invalid_argument("K, tree_depth must be >= 0");
    const int deepest = K + tree_depth;
    const std::uint64_t len = checked_length(b, deepest);
    if (len > (std::uint64_t{1} << 24))
        throw BudgetExceeded("limit-tree", "b^(2(K+tree_depth)) exceeds 2^24 entries");

    const auto profile = flow::eval_moment_profile(r, deepest + 300, b);
    const double sigma_sq = std::log1p(profile.R[deepest]);
    const double sigma = std::sqrt(sigma_sq);

    RngStream rng(seed, /*sample=*/0, /*level=*/static_cast<std::uint64_t>(deepest));
    PartitionArray seed_arr;
    seed_arr.b = b;
    seed_arr.generation = deepest;
    seed_arr.values.resize(static_cast<Eigen::Index>(len));
    for (Eigen::Index i = 0; i < seed_arr.values.size(); ++i)
        seed_arr.values[i] = lognormal_member(sigma, 0.5 * sigma_sq, rng);

    LimitTree tree;
    tree.b = b;
    tree.r = r;
    tree.K = K;
    tree.levels.assign(K + 1, PartitionArray{});
    PartitionArray cur = std::move(seed_arr);
    while (cur.generation > K) cur = coarsen(cur);
    tree.levels[K] = std::move(cur);
    for (int k = K - 1; k >= 0; --k) tree.levels[k] = coarsen(tree.levels[k + 1]);
    return tree;
}

namespace {

void descend(const LimitTree& tree, int N, int k, std::uint64_t edge,
             std::vector<std::uint8_t>& decisions, RngStream& rng) {
    if (k == N) return;
    const int b = tree.b;
    const auto& child = tree.levels[k + 1].values;
    const std::uint64_t base = edge * static_cast<std::uint64_t>(b) * b;
    double weight[64];
    double total = 0.0;
    for (int i = 0; i < b; ++i) {
        double prod = 1.0;
        for (int j = 0; j < b; ++j)
            prod *= child[static_cast<Eigen::Index>(base + static_cast<std::uint64_t>(i) * b + j)];
        weight[i] = prod;
        total += prod;
    }
    if (!(total > 0.0))
        throw std::runtime_error("polymer path sampler hit zero total branch weight");
    const double u = rng.uniform01() * total;
    double acc = 0.0;
    int pick = b - 1;
    for (int i = 0; i < b; ++i) {
        acc += weight[i];
        if (u < acc) {
            pick = i;
            break;
        }
    }
    decisions.push_back(static_cast<std::uint8_t>(pick + 1));
    for (int j = 0; j < b; ++j)
        descend(tree, N, k + 1, base + static_cast<std::uint64_t>(pick) * b + j, decisions,
                rng);
}

}  // namespace

lattice::HierPath sample_polymer_path(const LimitTree& tree, int N, RngStream& rng) {
    if (N < 0 || N > tree.K)
        throw std::invalid_argument("sample_polymer_path requires 0 <= N <= K");
    if (tree.b > 64) throw BudgetExceeded("path-sampler", "b > 64");
    lattice::HierPath p;
    p.generation = N;
    p.decisions.reserve(lattice::decision_count(tree.b, N));
    descend(tree, N, 0, 0, p.decisions, rng);
    return p;
}

double cylinder_mass(const LimitTree& tree, const lattice::HierPath& p) {
    const int K = p.generation;
    if (K > tree.K) throw std::invalid_argument("path generation exceeds tree K");
    const auto edges = lattice::edges_of_path(lattice::LatticeParams{tree.b}, p);
    const double gamma =
        lattice::path_count(lattice::LatticeParams{tree.b}, K).convert_to<double>();
    double prod = 1.0;
    for (const auto& e : edges)
        prod *= tree.levels[K].values[static_cast<Eigen::Index>(e.canonical_index(tree.b))];
    return prod / gamma;
}

std::vector<ScanRow> strong_disorder_scan(int b, const std::vector<double>& r_list,
                                          int levels, std::uint64_t pool_size,
                                          std::uint64_t seed, double eps, int threads) {
    std::vector<ScanRow> rows;
    rows.reserve(r_list.size());
    for (std::size_t k = 0; k < r_list.size(); ++k) {
        PoolRun run = run_pool(b, r_list[k], levels, pool_size, seed,
                               /*key=*/k + 1, threads);
        std::uint64_t below = 0;
        for (Eigen::Index i = 0; i < run.pool.size(); ++i)
            if (run.pool[i] < eps) ++below;
        rows.push_back(
            {r_list[k], static_cast<double>(below) / static_cast<double>(pool_size), eps});
    }
    return rows;
}

}  // namespace dpl::polymer
