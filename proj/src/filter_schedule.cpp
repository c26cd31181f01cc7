#include "dynaprop/filter_schedule.hpp"

#include <sstream>

namespace dynaprop {

std::string_view filter_name(FilterKind kind) noexcept {
    switch (kind) {
    case FilterKind::Ppr:
        return "ppr";
    case FilterKind::HighPass:
        return "highpass";
    case FilterKind::Custom:
        break;
    }
    return "custom";
}

FilterSchedule FilterSchedule::make(double gamma0, double gamma, double beta, double r_max,
                                    FilterKind kind) {
    std::ostringstream errors;
    if (!(std::abs(gamma) > 0.0 && std::abs(gamma) < 1.0)) {
        errors << " common ratio must satisfy 0 < |gamma| < 1 (got " << gamma << ");";
    }
    if (gamma0 == 0.0 || !std::isfinite(gamma0)) {
        errors << " gamma0 must be finite and nonzero;";
    }
    if (!(beta >= 0.0 && beta <= 1.0)) {
        errors << " beta must lie in [0, 1] (got " << beta << ");";
    }
    if (!(r_max > 0.0) || !std::isfinite(r_max)) {
        errors << " r_max must be positive (got " << r_max << ");";
    }
    if (auto msg = errors.str(); !msg.empty()) {
        throw std::invalid_argument("invalid filter schedule:" + msg);
    }
    return FilterSchedule{gamma0, gamma, beta, r_max, kind};
}

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        std::ostringstream msg;
        msg << "alpha must lie in (0, 1), got " << alpha;
        throw std::invalid_argument(msg.str());
    }
}

} // namespace

FilterSchedule ppr_schedule(double alpha, double beta, double r_max) {
    check_alpha(alpha);
    return FilterSchedule::make(alpha, 1.0 - alpha, beta, r_max, FilterKind::Ppr);
}

FilterSchedule highpass_schedule(double alpha, double beta, double r_max) {
    check_alpha(alpha);
    return FilterSchedule::make(alpha, alpha - 1.0, beta, r_max, FilterKind::HighPass);
}

double weight_at(const FilterSchedule &schedule, unsigned k) {
    double w = schedule.gamma0;
    for (unsigned i = 0; i < k; ++i) {
        w *= schedule.gamma;
    }
    return w;
}

double error_bound(const FilterSchedule &schedule, double degree) {
    if (degree < 0.0) {
        throw std::invalid_argument("degree must be non-negative");
    }
    // alpha / (1 - |1 - alpha|) is exactly 1 for both named schedules
    const double tail = schedule.kind == FilterKind::Custom
                            ? std::abs(schedule.gamma0) / (1.0 - std::abs(schedule.gamma))
                            : 1.0;
    return push_threshold(schedule, degree) * tail;
}

} // namespace dynaprop
