#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dynaprop {

enum class FilterKind { Ppr, HighPass, Custom };

[[nodiscard]] std::string_view filter_name(FilterKind kind) noexcept;

/// Geometric graph filter gamma_k = gamma0 * gamma^k applied to the
/// propagation matrix D^-beta A D^(beta-1), together with the push threshold.
struct FilterSchedule {
    double gamma0 = 0.2;
    double gamma = 0.8;
    double beta = 0.5;
    double r_max = 1e-7;
    FilterKind kind = FilterKind::Custom;

    /// Validating constructor; throws std::invalid_argument.
    static FilterSchedule make(double gamma0, double gamma, double beta, double r_max,
                               FilterKind kind = FilterKind::Custom);

    [[nodiscard]] std::string tag() const { return std::string(filter_name(kind)); }
};

inline constexpr double kDefaultAlpha = 0.2;
inline constexpr double kDefaultBeta = 0.5;
inline constexpr double kDefaultRMax = 1e-7;

/// Low-pass personalized PageRank weights alpha (1 - alpha)^k.
FilterSchedule ppr_schedule(double alpha = kDefaultAlpha, double beta = kDefaultBeta,
                            double r_max = kDefaultRMax);

/// High-pass weights alpha (alpha - 1)^k, alternating in sign.
FilterSchedule highpass_schedule(double alpha = kDefaultAlpha, double beta = kDefaultBeta,
                                 double r_max = kDefaultRMax);

[[nodiscard]] double weight_at(const FilterSchedule &schedule, unsigned k);

/// Per-node guarantee |pi_hat(i) - pi(i)| <= r_max d^(1-beta) gamma0 / (1 - |gamma|).
/// For ppr_schedule the trailing factor is exactly 1.
[[nodiscard]] double error_bound(const FilterSchedule &schedule, double degree);

/// d^e with the exponents that occur in practice special-cased. 0^0 == 1.
[[nodiscard]] inline double degree_pow(double degree, double exponent) noexcept {
    if (exponent == 0.0) {
        return 1.0;
    }
    if (exponent == 1.0) {
        return degree;
    }
    if (exponent == 0.5) {
        return std::sqrt(degree);
    }
    return std::pow(degree, exponent);
}

/// Push threshold r_max * d^(1-beta).
[[nodiscard]] inline double push_threshold(const FilterSchedule &schedule, double degree) noexcept {
    return schedule.r_max * degree_pow(degree, 1.0 - schedule.beta);
}

} // namespace dynaprop
