#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace dpl {

// One-pass accumulator for mean and the 2nd..4th centered moments
// (Pebay's update formulas).  Merging two accumulators is exact up to
// floating-point reassociation, which makes per-chunk partials mergeable
// in a fixed order regardless of the number of workers.
class RunStats {
public:
    void push(double x) {
        const double n1 = static_cast<double>(n_);
        n_ += 1;
        const double n = static_cast<double>(n_);
        const double delta = x - mean_;
        const double delta_n = delta / n;
        const double delta_n2 = delta_n * delta_n;
        const double term1 = delta * delta_n * n1;
        mean_ += delta_n;
        m4_ += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * m2_ -
               4.0 * delta_n * m3_;
        m3_ += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2_;
        m2_ += term1;
        if (x < min_) min_ = x;
        if (x > max_) max_ = x;
    }

    void merge(const RunStats& o) {
        if (o.n_ == 0) return;
        if (n_ == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n_);
        const double nb = static_cast<double>(o.n_);
        const double n = na + nb;
        const double delta = o.mean_ - mean_;
        const double d2 = delta * delta;
        const double d3 = d2 * delta;
        const double d4 = d2 * d2;

        const double m2 = m2_ + o.m2_ + d2 * na * nb / n;
        const double m3 = m3_ + o.m3_ + d3 * na * nb * (na - nb) / (n * n) +
                          3.0 * delta * (na * o.m2_ - nb * m2_) / n;
        const double m4 =
            m4_ + o.m4_ +
            d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
            6.0 * d2 * (na * na * o.m2_ + nb * nb * m2_) / (n * n) +
            4.0 * delta * (na * o.m3_ - nb * m3_) / n;

        mean_ += delta * nb / n;
        m2_ = m2;
        m3_ = m3;
        m4_ = m4;
        n_ += o.n_;
        if (o.min_ < min_) min_ = o.min_;
        if (o.max_ > max_) max_ = o.max_;
    }

    std::uint64_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 0 ? m2_ / static_cast<double>(n_) : 0.0; }
    double third_central() const { return n_ > 0 ? m3_ / static_cast<double>(n_) : 0.0; }
    double fourth_central() const { return n_ > 0 ? m4_ / static_cast<double>(n_) : 0.0; }
    double min() const { return min_; }
    double max() const { return max_; }

    double se_mean() const {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }
    // Asymptotic standard error of the sample variance.
    double se_variance() const {
        if (n_ < 2) return 0.0;
        const double v = variance();
        const double q = fourth_central() - v * v;
        return q > 0.0 ? std::sqrt(q / static_cast<double>(n_)) : 0.0;
    }

private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
    double m3_ = 0.0;
    double m4_ = 0.0;
    double min_ = std::numeric_limits<double>::infinity();
    double max_ = -std::numeric_limits<double>::infinity();
};

}  // namespace dpl
