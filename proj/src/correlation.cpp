#include "dpl/correlation.hpp"

#include <stdexcept>

#include "dpl/errors.hpp"

namespace dpl::correlation {

using lattice::BigInt;
using lattice::HierPath;
using lattice::LatticeParams;

CorrelationTable build_table(int b, int N, double r, const flow::VarianceProfile& profile) {
    if (profile.b != b || profile.r != r)
        throw std::invalid_argument("profile does not match requested (b, r)");
    if (N < 0 || N > profile.depth)
        throw std::invalid_argument("profile depth does not cover N");
    const LatticeParams params{b};
    const BigInt count_big = lattice::path_count(params, N);
    if (count_big > 128)
        throw BudgetExceeded("correlation-enumeration",
                             "|Gamma_N| > 128; dense table limited to b=2,N<=3 / b=3,N<=2");
    const int count = static_cast<int>(count_big);

    std::vector<HierPath> paths;
    paths.reserve(count);
    for (int i = 0; i < count; ++i)
        paths.push_back(lattice::path_from_index(params, N, static_cast<std::uint64_t>(i)));

    CorrelationTable table;
    table.b = b;
    table.N = N;
    table.r = r;
    table.R_at = profile.R[N];
    table.R_r = profile.R[0];
    table.mass.resize(count, count);
    table.xi.resize(count, count);
    const double inv_sq = 1.0 / (static_cast<double>(count) * static_cast<double>(count));
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < count; ++j) {
            const auto xi =
                static_cast<int>(lattice::shared_edge_count(params, paths[i], paths[j]));
            table.xi(i, j) = xi;
            table.mass(i, j) = flow::ipow(1.0 + table.R_at, xi) * inv_sq;
        }
    return table;
}

Eigen::MatrixXd lebesgue_split(const CorrelationTable& table) {
    if (!(table.R_r > 0.0))
        throw std::domain_error("lebesgue_split requires R(r) > 0");
    const double n2 = static_cast<double>(table.mass.rows()) * table.mass.cols();
    Eigen::MatrixXd rho =
        (table.mass.array() - 1.0 / n2).matrix() / table.R_r;
    // Pairs with xi = 0 carry exactly the product mass; force the exact zero
    // rather than leaving a rounding residue.
    for (Eigen::Index i = 0; i < rho.rows(); ++i)
        for (Eigen::Index j = 0; j < rho.cols(); ++j)
            if (table.xi(i, j) == 0) rho(i, j) = 0.0;
    return rho;
}

double rn_factor(const HierPath& p, const HierPath& q,
                 const flow::VarianceProfile& profile_r,
                 const flow::VarianceProfile& profile_t) {
    if (p.generation != q.generation)
        throw std::invalid_argument("rn_factor requires equal generations");
    const int n = p.generation;
    if (n > profile_r.depth || n > profile_t.depth)
        throw std::invalid_argument("profiles do not cover generation n");
    if (profile_r.b != profile_t.b)
        throw std::invalid_argument("profiles disagree on b");
    const LatticeParams params{profile_r.b};
    const auto xi = lattice::shared_edge_count(params, p, q);
    const double ratio = (1.0 + profile_t.R[n]) / (1.0 + profile_r.R[n]);
    double out = 1.0;
    for (std::uint64_t k = 0; k < xi; ++k) out *= ratio;
    return out;
}

std::vector<BigInt> xi_histogram(int b, int N) {
    if (b < 2 || N < 0) throw std::invalid_argument("xi_histogram requires b >= 2, N >= 0");
    // Polynomial degree is b^N; keep the table well under control.
    double edges = 1.0;
    for (int k = 0; k < N; ++k) edges *= b;
    if (edges > 4096.0)
        throw BudgetExceeded("xi-histogram", "b^N > 4096");

    const LatticeParams params{b};
    std::vector<BigInt> z{BigInt(0), BigInt(1)};  // Z_0(x) = x
    for (int n = 0; n < N; ++n) {
        // Z^b by repeated convolution.
        std::vector<BigInt> p{BigInt(1)};
        for (int k = 0; k < b; ++k) {
            std::vector<BigInt> q(p.size() + z.size() - 1, BigInt(0));
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (p[i] == 0) continue;
                for (std::size_t j = 0; j < z.size(); ++j)
                    if (z[j] != 0) q[i + j] += p[i] * z[j];
            }
            p = std::move(q);
        }
        for (auto& c : p) c *= b;
        const BigInt gamma_n = lattice::path_count(params, n);
        p[0] += BigInt(b) * (b - 1) * boost::multiprecision::pow(gamma_n, 2 * b);
        z = std::move(p);
    }
    return z;
}

double histogram_total_mass(int b, int N, const flow::VarianceProfile& profile) {
    if (profile.b != b) throw std::invalid_argument("profile does not match b");
    if (N > profile.depth) throw std::invalid_argument("profile depth does not cover N");
    const std::vector<BigInt> hist = xi_histogram(b, N);
    const BigInt total = lattice::path_count(LatticeParams{b}, N);
    const double inv_sq = 1.0 / boost::multiprecision::pow(total, 2).convert_to<double>();
    double sum = 0.0;
    for (std::size_t xi = 0; xi < hist.size(); ++xi) {
        if (hist[xi] == 0) continue;
        sum += hist[xi].convert_to<double>() *
               flow::ipow(1.0 + profile.R[N], static_cast<int>(xi)) * inv_sq;
    }
    return sum;
}

}  // namespace dpl::correlation
