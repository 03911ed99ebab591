#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "dpl/rng.hpp"

namespace dpl {

enum class DisorderKind { gaussian, rademacher, shifted_exponential };

// Mean-zero unit-variance disorder laws with closed-form log-MGF.
struct DisorderModel {
    DisorderKind kind = DisorderKind::gaussian;

    static DisorderModel parse(const std::string& name) {
        if (name == "gaussian") return {DisorderKind::gaussian};
        if (name == "rademacher") return {DisorderKind::rademacher};
        if (name == "shifted_exponential") return {DisorderKind::shifted_exponential};
        throw std::invalid_argument("unknown disorder model '" + name + "'");
    }

    const char* name() const {
        switch (kind) {
            case DisorderKind::gaussian: return "gaussian";
            case DisorderKind::rademacher: return "rademacher";
            case DisorderKind::shifted_exponential: return "shifted_exponential";
        }
        return "?";
    }

    double skew() const { return kind == DisorderKind::shifted_exponential ? 2.0 : 0.0; }

    // Upper end of the MGF domain (exclusive where finite).
    double beta_max() const {
        return kind == DisorderKind::shifted_exponential
                   ? 1.0
                   : std::numeric_limits<double>::infinity();
    }

    double log_mgf(double beta) const {
        switch (kind) {
            case DisorderKind::gaussian: return 0.5 * beta * beta;
            case DisorderKind::rademacher: {
                // log cosh, overflow-safe.
                const double a = std::fabs(beta);
                return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
            }
            case DisorderKind::shifted_exponential:
                if (beta >= 1.0)
                    throw std::domain_error("shifted_exponential MGF diverges for beta >= 1");
                return -beta - std::log1p(-beta);
        }
        return 0.0;
    }

    double sample(RngStream& rng) const {
        switch (kind) {
            case DisorderKind::gaussian: return rng.normal();
            case DisorderKind::rademacher: return (rng() >> 63) ? 1.0 : -1.0;
            case DisorderKind::shifted_exponential: return rng.exponential() - 1.0;
        }
        return 0.0;
    }
};

}  // namespace dpl
