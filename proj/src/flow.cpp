#include "dpl/flow.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace dpl::flow {

FlowConstants FlowConstants::make(int b, double tau_skew) {
    if (b < 2) throw std::invalid_argument("branching number b must be >= 2");
    return FlowConstants{b, 2.0 / (b - 1), (b + 1) / (3.0 * (b - 1)), tau_skew};
}

double ipow(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

double map_M(double x, int b) { return (ipow(1.0 + x, b) - 1.0) / b; }

namespace {

// Bivariate truncated series: S(i,j) multiplies log^j(t) / t^i.
using Series = Eigen::MatrixXd;

double binom(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

Series s_zero(int N) { return Series::Zero(N + 1, N + 1); }

Series s_mul(const Series& a, const Series& b, int N) {
    Series c = s_zero(N);
    for (int i1 = 0; i1 <= N; ++i1)
        for (int j1 = 0; j1 <= N; ++j1) {
            const double av = a(i1, j1);
            if (av == 0.0) continue;
            for (int i2 = 0; i2 + i1 <= N; ++i2)
                for (int j2 = 0; j2 + j1 <= N; ++j2) {
                    const double bv = b(i2, j2);
                    if (bv != 0.0) c(i1 + i2, j1 + j2) += av * bv;
                }
        }
    return c;
}

// Re-expands S(t+1) in terms of L = log t and 1/t, using
// log(t+1) = L + w with w = sum_{m>=1} (-1)^(m+1) t^-m / m and
// (t+1)^-i = sum_m (-1)^m C(i+m-1, m) t^-(i+m).
Series s_shift(const Series& s, int N) {
    Series w = s_zero(N);
    for (int m = 1; m <= N; ++m) w(m, 0) = ((m % 2) ? 1.0 : -1.0) / m;
    std::vector<Series> wpow(N + 1, s_zero(N));
    wpow[0](0, 0) = 1.0;
    for (int k = 1; k <= N; ++k) wpow[k] = s_mul(wpow[k - 1], w, N);

    Series out = s_zero(N);
    for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= N; ++j) {
            const double c = s(i, j);
            if (c == 0.0) continue;
            for (int m = 0; i + m <= N; ++m) {
                double tb;
                if (i > 0)
                    tb = ((m % 2) ? -1.0 : 1.0) * binom(i + m - 1, m);
                else
                    tb = (m == 0) ? 1.0 : 0.0;
                if (tb == 0.0) continue;
                for (int k = 0; k <= j; ++k) {
                    const double bk = binom(j, k);
                    const Series& W = wpow[k];
                    for (int i2 = 0; i + m + i2 <= N; ++i2)
                        for (int j2 = 0; (j - k) + j2 <= N; ++j2) {
                            const double wv = W(i2, j2);
                            if (wv != 0.0)
                                out(i + m + i2, (j - k) + j2) += c * tb * bk * wv;
                        }
                }
            }
        }
    return out;
}

Series s_apply_M(const Series& s, int b, int N) {
    Series out = s_zero(N);
    Series p = s;
    for (int k = 1; k <= b; ++k) {
        if (k > 1) p = s_mul(p, s, N);
        out += (binom(b, k) / b) * p;
    }
    return out;
}

}  // namespace

AsymptoticSeed::AsymptoticSeed(int b, int order) : b_(b), order_(order) {
    if (b < 2) throw std::invalid_argument("branching number b must be >= 2");
    if (order < 4) throw std::invalid_argument("seed order must be >= 4");
    const int N = order;
    Series c = s_zero(N);
    c(1, 0) = 2.0 / (b - 1);  // kappa^2

    // The functional equation R(-t) = M_b(R(-t-1)) is solved order by order:
    // the residual rows at order I are linear in the level-(I-1) unknowns
    // because their quadratic self-products first appear at order 2(I-1) > I.
    // The time-shift freedom of the flow is spent by pinning the constant
    // term of Q_2 to zero, which is exactly the paper-normalized branch.
    for (int I = 3; I <= N; ++I) {
        const int lev = I - 1;
        std::vector<int> unknowns;
        if (lev == 2) {
            unknowns = {1};
        } else {
            for (int j = 0; j <= lev - 1; ++j) unknowns.push_back(j);
        }
        auto residual_rows = [&](const Series& cc) {
            Eigen::VectorXd rows(I + 1);
            Series e = cc - s_apply_M(s_shift(cc, N), b, N);
            for (int j = 0; j <= I; ++j) rows(j) = e(I, j);
            return rows;
        };
        Eigen::VectorXd r0 = residual_rows(c);
        Eigen::MatrixXd A(I + 1, static_cast<int>(unknowns.size()));
        for (std::size_t u = 0; u < unknowns.size(); ++u) {
            Series probe = c;
            probe(lev, unknowns[u]) = 1.0;
            A.col(static_cast<int>(u)) = residual_rows(probe) - r0;
        }
        Eigen::VectorXd sol = A.colPivHouseholderQr().solve(-r0);
        const double resid = (A * sol + r0).cwiseAbs().maxCoeff();
        if (!(resid < 1e-7))
            throw std::runtime_error("asymptotic seed solve failed to close at order " +
                                     std::to_string(I));
        for (std::size_t u = 0; u < unknowns.size(); ++u)
            c(lev, unknowns[u]) = sol(static_cast<int>(u));
    }
    coeff_ = c;
}

double AsymptoticSeed::value(double t) const {
    const double L = std::log(t);
    const double inv = 1.0 / t;
    double acc = 0.0;
    for (int i = order_; i >= 1; --i) {
        double p = 0.0;
        for (int j = order_; j >= 0; --j) p = p * L + coeff_(i, j);
        acc = (acc + p) * inv;
    }
    return acc;
}

const AsymptoticSeed& seed_for(int b) {
    static std::mutex mu;
    static std::map<int, AsymptoticSeed> table;
    std::lock_guard<std::mutex> lock(mu);
    auto it = table.find(b);
    if (it == table.end()) it = table.emplace(b, AsymptoticSeed(b)).first;
    return it->second;
}

namespace {

void check_anchor(double r, int depth) {
    if (depth <= 0 || r - depth > -kAnchorFloor)
        throw std::domain_error(
            "flow anchor r-depth must lie at or below the asymptotic validity floor -50");
}

}  // namespace

double eval_R(double r, int depth, int b) {
    check_anchor(r, depth);
    const AsymptoticSeed& seed = seed_for(b);
    double x = seed.value(static_cast<double>(depth) - r);
    for (int k = 0; k < depth; ++k) x = map_M(x, b);
    return x;
}

double eval_Rprime(double r, int depth, int b) {
    check_anchor(r, depth);
    const AsymptoticSeed& seed = seed_for(b);
    const double t = static_cast<double>(depth) - r;
    const double h = 1e-3;
    // dR/dr = -dR/dt at the anchor.
    double d = (seed.value(t - h) - seed.value(t + h)) / (2.0 * h);
    double x = seed.value(t);
    for (int k = 0; k < depth; ++k) {
        d *= ipow(1.0 + x, b - 1);
        x = map_M(x, b);
    }
    return d;
}

MomentTriple moment_step(double R, double R3, double R4, int b) {
    const double m2 = 1.0 + R;
    const double m3 = 1.0 + 3.0 * R + R3;
    const double m4 = 1.0 + 6.0 * R + 4.0 * R3 + R4;
    // Centered moments of Y = prod_j W_j - 1 over one branch.
    const double y2 = ipow(m2, b) - 1.0;
    const double y3 = ipow(m3, b) - 3.0 * ipow(m2, b) + 2.0;
    const double y4 = ipow(m4, b) - 4.0 * ipow(m3, b) + 6.0 * ipow(m2, b) - 3.0;
    MomentTriple out;
    out.R = y2 / b;
    out.R3 = y3 / (b * b);
    out.R4 = (y4 + 3.0 * (b - 1) * y2 * y2) / (b * b * b);
    return out;
}

VarianceProfile eval_moment_profile(double r, int depth, int b) {
    check_anchor(r, depth);
    const AsymptoticSeed& seed = seed_for(b);
    VarianceProfile p;
    p.b = b;
    p.r = r;
    p.depth = depth;
    p.R.resize(depth + 1);
    p.Rprime.resize(depth + 1);
    p.R3.assign(depth + 1, 0.0);
    p.R4.assign(depth + 1, 0.0);

    const double t = static_cast<double>(depth) - r;
    const double h = 1e-3;
    p.R[depth] = seed.value(t);
    p.Rprime[depth] = (seed.value(t - h) - seed.value(t + h)) / (2.0 * h);
    for (int k = depth; k > 0; --k) {
        const MomentTriple next = moment_step(p.R[k], p.R3[k], p.R4[k], b);
        p.R[k - 1] = next.R;
        p.R3[k - 1] = next.R3;
        p.R4[k - 1] = next.R4;
        p.Rprime[k - 1] = p.Rprime[k] * ipow(1.0 + p.R[k], b - 1);
    }
    return p;
}

double eval_beta(long n, double r, const FlowConstants& fc) {
    if (n < 1) throw std::invalid_argument("eval_beta requires n >= 1");
    const double kappa = std::sqrt(fc.kappa2);
    const double nn = static_cast<double>(n);
    const double n32 = nn * std::sqrt(nn);
    const double beta = kappa / std::sqrt(nn) - fc.tau_skew * fc.kappa2 / (2.0 * nn) +
                        kappa * fc.eta * std::log(nn) / n32 + kappa * r / n32;
    if (!(beta > 0.0))
        throw std::domain_error("critical scaling beta_{n,r} is not positive for this (n, r)");
    return beta;
}

double beta_variance_matched(double target_base_variance,
                             const std::function<double(double)>& log_mgf,
                             double beta_hi) {
    if (!(target_base_variance > 0.0))
        throw std::invalid_argument("target base variance must be positive");
    const double goal = std::log1p(target_base_variance);
    auto f = [&](double beta) { return log_mgf(2.0 * beta) - 2.0 * log_mgf(beta) - goal; };
    double lo = 0.0, hi = beta_hi;
    if (!(f(hi) > 0.0)) throw std::domain_error("variance-matched beta bracket failed");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

double vartheta_correlation(int n, const VarianceProfile& profile) {
    if (n < 1 || n > profile.depth)
        throw std::invalid_argument("vartheta_correlation requires 1 <= n <= profile depth");
    double prod = 1.0;
    for (int k = 1; k < n; ++k) prod *= ipow(profile.fourth_raw(k), profile.b - 1);
    return profile.Rprime[n] * profile.Rprime[n] * prod;
}

double energy_series_partial(double lambda, int N, const VarianceProfile& profile) {
    if (N < 1 || N > profile.depth)
        throw std::invalid_argument("energy_series_partial requires 1 <= N <= profile depth");
    const int b = profile.b;
    double sum = 0.0;
    double prod = 1.0;  // running prod_{k=1..n-1} fourth_raw(k)^(b-1)
    for (int n = 1; n <= N; ++n) {
        if (n > 1) prod *= ipow(profile.fourth_raw(n - 1), b - 1);
        const double c = profile.Rprime[n] * profile.Rprime[n] * prod;
        sum += (b - 1.0) * (b + 1.0) * c / std::pow(static_cast<double>(n), lambda);
    }
    return sum;
}

std::vector<double> survival_offspring_pmf(const VarianceProfile& profile, int n) {
    if (n < 0 || n + 1 > profile.depth)
        throw std::invalid_argument("offspring pmf needs profile depth > n+1");
    const int b = profile.b;
    const double r_down = profile.R[n + 1];
    const double r_up = profile.R[n];
    std::vector<double> pmf(b);
    for (int l = 1; l <= b; ++l)
        pmf[l - 1] = binom(b, l) * ipow(r_down, l) / (b * r_up);
    return pmf;
}

double total_branch_prob(const VarianceProfile& profile, int n) {
    if (n < 0 || n + 1 > profile.depth)
        throw std::invalid_argument("branch prob needs profile depth > n+1");
    const int b = profile.b;
    return ipow(1.0 + profile.R[n + 1], b) / (b * (1.0 + profile.R[n]));
}

double total_branch_prob_footnote_variant(const VarianceProfile& profile, int n) {
    if (n < 0 || n + 1 > profile.depth)
        throw std::invalid_argument("branch prob needs profile depth > n+1");
    const int b = profile.b;
    return ipow(profile.R[n + 1], b) / (b * (1.0 + profile.R[n]));
}

}  // namespace dpl::flow
