#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "dpl/flow.hpp"
#include "dpl/lattice.hpp"

namespace dpl::correlation {

// Exact two-path correlation masses on Gamma_N x Gamma_N:
//   mass(p, q) = (1 + R(r-N))^xi_N(p,q) / |Gamma_N|^2.
// Row/column order is the canonical path enumeration.
struct CorrelationTable {
    int b = 2;
    int N = 0;
    double r = 0.0;
    double R_at = 0.0;  // R(r-N)
    double R_r = 0.0;   // R(r), same profile
    Eigen::MatrixXd mass;
    Eigen::MatrixXi xi;

    double total_mass() const { return mass.sum(); }
};

// Enumeration budget: |Gamma_N| <= 128 (b=2 up to N=3, b=3 up to N=2).
CorrelationTable build_table(int b, int N, double r, const flow::VarianceProfile& profile);

// Lebesgue decomposition upsilon_r = mu x mu + R(r) * rho_r.
// Returns the rho matrix: (mass - 1/|Gamma|^2)/R(r), entrywise >= 0, zero
// exactly on pairs with xi = 0, total 1.
Eigen::MatrixXd lebesgue_split(const CorrelationTable& table);

// Radon-Nikodym martingale factor
//   phi_n^{(r,t)}(p,q) = ((1+R(t-n)) / (1+R(r-n)))^xi_n(p,q)
// for generation-n paths; profiles must be anchored at r and t and cover n.
double rn_factor(const lattice::HierPath& p, const lattice::HierPath& q,
                 const flow::VarianceProfile& profile_r,
                 const flow::VarianceProfile& profile_t);

// Pair counts of Gamma_N x Gamma_N grouped by shared-edge count, computed by
// the generating-function recursion Z_{n+1}(x) = b(b-1)|Gamma_n|^(2b) +
// b Z_n(x)^b with Z_0 = x.  Exact integers; index = xi.
std::vector<lattice::BigInt> xi_histogram(int b, int N);

// Total correlation mass via the histogram: sum_xi count * (1+R(r-N))^xi
// / |Gamma_N|^2.  Extends the mass identity beyond the dense-table budget.
double histogram_total_mass(int b, int N, const flow::VarianceProfile& profile);

}  // namespace dpl::correlation
