#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dpl/disorder.hpp"
#include "dpl/flow.hpp"
#include "dpl/lattice.hpp"
#include "dpl/rng.hpp"
#include "dpl/stats.hpp"

namespace dpl::polymer {

// Edge-indexed nonnegative weights at a fixed generation, flat in the
// canonical base-b^2 edge order (children of edge e occupy the contiguous
// block [e*b^2, (e+1)*b^2), branch-major).
struct PartitionArray {
    int b = 2;
    int generation = 0;
    Eigen::ArrayXd values;
};

// Hard cap on array length (2^30 entries).
inline constexpr std::uint64_t kArrayBudget = std::uint64_t{1} << 30;

// i.i.d. entries exp(beta*omega - lambda(beta)); each has exact mean one.
PartitionArray base_array(int b, int n, double beta, const DisorderModel& model,
                          RngStream& rng);

// One coarsening step: parent e <- (1/b) sum_i prod_j child(e, i, j), with
// the summation order fixed branch-major for bit reproducibility.
PartitionArray coarsen(const PartitionArray& arr);

// Convenience: coarsen k times.
PartitionArray coarsen_to(PartitionArray arr, int target_generation);

// Monte Carlo of the total partition mass W^(0,n) at critical scaling
// beta = eval_beta(n, r).  Samples are independent; stream key (seed, sample).
RunStats simulate_partition(int b, int n, double r, const DisorderModel& model,
                            std::uint64_t samples, std::uint64_t seed, int threads = 0,
                            bool variance_matched_beta = false);

// The beta actually used by simulate_partition for the given mode.
double partition_beta(int b, int n, double r, const DisorderModel& model,
                      bool variance_matched_beta);

// Population-dynamics solver of W = (1/b) sum_i prod_j W_ij: a pool of
// `pool_size` members is seeded mean-1 lognormal with variance R(r-levels)
// and pushed through `levels` combining rounds with uniform resampling.
struct PoolResult {
    RunStats stats;                 // final pool statistics
    std::uint64_t non_finite = 0;   // members lost to overflow, if any
    double below_eps_fraction = 0;  // fraction of final pool < eps (for scans)
};
PoolResult sample_limit_mass_pool(int b, double r, int levels, std::uint64_t pool_size,
                                  std::uint64_t seed, int threads = 0, double eps = 0.01);

// Jointly consistent arrays W^(k), k = 0..K: an exact i.i.d. lognormal seed
// at generation K+tree_depth coarsened downward, so the recursion
// W^(k) = (1/b) sum prod W^(k+1) holds bit-exactly between levels.
struct LimitTree {
    int b = 2;
    double r = 0.0;
    int K = 0;
    std::vector<PartitionArray> levels;  // levels[k].generation == k
};
LimitTree sample_limit_tree(int b, double r, int K, int tree_depth, std::uint64_t seed);

// Samples a generation-N path from the cylinder law M_r(p)/M_r(Gamma) of a
// frozen tree: at each embedded copy, branch i is chosen proportional to
// prod_j W^(k+1)(e x (i,j)).  Requires K >= N.  Throws on zero total weight.
lattice::HierPath sample_polymer_path(const LimitTree& tree, int N, RngStream& rng);

// Exact cylinder mass M_r(p) = (1/|Gamma_K|) prod_l W^(K)(p(l)) for a path
// at generation K of the frozen tree.
double cylinder_mass(const LimitTree& tree, const lattice::HierPath& p);

// P[final pool member < eps] for each r, via the pool sampler.
struct ScanRow {
    double r;
    double frac_below_eps;
    double eps;
};
std::vector<ScanRow> strong_disorder_scan(int b, const std::vector<double>& r_list,
                                          int levels, std::uint64_t pool_size,
                                          std::uint64_t seed, double eps = 0.01,
                                          int threads = 0);

}  // namespace dpl::polymer
