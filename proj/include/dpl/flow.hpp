#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace dpl::flow {

// Constants attached to the branching number b.
struct FlowConstants {
    int b;
    double kappa2;    // 2/(b-1)
    double eta;       // (b+1)/(3(b-1))
    double tau_skew;  // third moment of the disorder law

    static FlowConstants make(int b, double tau_skew = 0.0);
};

// x^n by plain repeated multiplication.  Used everywhere the flow maps are
// evaluated so that algebraically identical expressions are also
// bit-identical in floating point.
double ipow(double x, int n);

// One renormalization step of the variance: M_b(x) = ((1+x)^b - 1)/b.
double map_M(double x, int b);

// Asymptotic expansion of the variance flow at the weak-disorder end,
//
//   R(-t) = sum_{i>=1} Q_i(log t) / t^i,   deg Q_i <= i-1,
//
// with Q_1 = kappa^2 and the normalization Q_2(L) = kappa^2*eta*L (no
// constant term), which pins the unique flow with vanishing asymptotics.
// The polynomial coefficients are solved order by order from the exact
// functional equation R(-t) = M_b(R(-t-1)); truncating at `order` leaves a
// seed error O(log^order(t)/t^(order+1)).  The two leading terms are the
// closed-form seed -kappa^2/t + kappa^2*eta*log(-t)/t^2; the higher terms
// are required because the forward iteration amplifies any seed error by
// R'(r)/R'(anchor) ~ depth^2, which would otherwise cap the attainable
// accuracy near 1e-1 at depth 200.
class AsymptoticSeed {
public:
    explicit AsymptoticSeed(int b, int order = 12);

    // R(-t); requires t >= validity floor (50).
    double value(double t) const;

    int b() const { return b_; }
    int order() const { return order_; }
    double coeff(int i, int j) const { return coeff_(i, j); }

private:
    int b_;
    int order_;
    Eigen::MatrixXd coeff_;  // coeff_(i,j) multiplies log^j(t) / t^i
};

// Shared, lazily-built seed table per branching number.
const AsymptoticSeed& seed_for(int b);

// Minimum depth below r at which the asymptotic seed is trusted.
inline constexpr double kAnchorFloor = 50.0;

// R(r) by seeding at r-depth and applying map_M `depth` times.
// Requires r - depth <= -kAnchorFloor.
double eval_R(double r, int depth, int b);

// R'(r): the seed derivative is a central finite difference of the
// asymptotic seed (step 1e-3), pushed forward with the chain-rule factor
// (1+R)^(b-1) per step.
double eval_Rprime(double r, int depth, int b);

// One step of the centered-moment recursion for W = (1/b) sum_i prod_j W_ij
// with i.i.d. mean-one factors of centered moments (R, R3, R4).
struct MomentTriple {
    double R;
    double R3;
    double R4;
};
MomentTriple moment_step(double R, double R3, double R4, int b);

// Tabulated flow values at r, r-1, ..., r-depth.
struct VarianceProfile {
    int b = 2;
    double r = 0.0;
    int depth = 0;
    std::vector<double> R;       // R[k]  = R(r-k)
    std::vector<double> Rprime;  // R'(r-k)
    std::vector<double> R3;      // third centered moment at r-k
    std::vector<double> R4;      // fourth centered moment at r-k

    // Raw fourth moment 1 + 6R + 4R3 + R4 at r-k.
    double fourth_raw(int k) const { return 1.0 + 6.0 * R[k] + 4.0 * R3[k] + R4[k]; }
};

// Builds the profile: R and R' seeded asymptotically at the anchor, R3 and
// R4 seeded at zero (their recursions contract seed error by 1/b and 1/b^2
// per step, so zero-seeding at depth >= 100 is exact to machine precision).
VarianceProfile eval_moment_profile(double r, int depth, int b);

// Critical weak-disorder inverse temperature
//   kappa/sqrt(n) - tau*kappa^2/(2n) + kappa*eta*log(n)/n^(3/2) + kappa*r/n^(3/2).
// Throws std::domain_error when the result is not positive.
double eval_beta(long n, double r, const FlowConstants& fc);

// Inverse temperature calibrated so the generation-n base variance equals
// R(r-n) exactly, i.e. lambda(2*beta) - 2*lambda(beta) = log(1+R(r-n)).
// With this choice the variance of the coarsened mass is R(r) at every n,
// not only asymptotically.  `log_mgf` is the disorder law's cumulant
// generating function; beta is bracketed in (0, beta_hi).
double beta_variance_matched(double target_base_variance,
                             const std::function<double(double)>& log_mgf,
                             double beta_hi);

// Spatial-correlation constant
//   C_{r,n} = (R'(r-n))^2 * prod_{k=1..n-1} (1+6R+4R3+R4)(r-k)^(b-1),
// asymptotically proportional to n^8.
double vartheta_correlation(int n, const VarianceProfile& profile);

// Partial sum  sum_{n=1..N} (b-1)(b+1) * C_{r,n} / n^lambda  of the
// intersection-energy series; converges iff lambda > 9.
double energy_series_partial(double lambda, int N, const VarianceProfile& profile);

// Offspring law of the survival-conditioned intersection chain at
// generation n:  P[l] = C(b,l) R(r-n-1)^l / (b R(r-n)),  l = 1..b.
// Sums to one exactly because R(r-n) = M_b(R(r-n-1)) holds entrywise.
std::vector<double> survival_offspring_pmf(const VarianceProfile& profile, int n);

// Reproduction probability of the unconditioned chain under the normalized
// correlation measure: P[b children] = (1+R(r-n-1))^b / (b (1+R(r-n))).
double total_branch_prob(const VarianceProfile& profile, int n);

// The same quantity as printed in the source's footnote, with R^b in place
// of (1+R)^b in the numerator.  Exposed for comparison only; it does not
// normalize the offspring law and is not used by the population chains.
double total_branch_prob_footnote_variant(const VarianceProfile& profile, int n);

}  // namespace dpl::flow
