#include "dynaprop/config.hpp"

#include <cstdlib>
#include <sstream>

namespace dynaprop {

void RunConfig::validate() const {
    std::ostringstream errors;
    if (!(alpha > 0.0 && alpha < 1.0)) {
        errors << " alpha must lie in (0, 1), got " << alpha << ";";
    }
    if (!(beta >= 0.0 && beta <= 1.0)) {
        errors << " beta must lie in [0, 1], got " << beta << ";";
    }
    if (!(r_max > 0.0)) {
        errors << " rmax must be positive, got " << r_max << ";";
    }
    if (workers == 0) {
        errors << " workers must be at least 1;";
    }
    if (stride == 0) {
        errors << " stride must be at least 1;";
    }
    if (work_budget == 0) {
        errors << " work budget must be positive;";
    }
    if (auto msg = errors.str(); !msg.empty()) {
        throw ConfigError("invalid configuration:" + msg);
    }
}

std::vector<FilterSchedule> RunConfig::schedules() const {
    validate();
    switch (filter) {
    case FilterChoice::Ppr:
        return {ppr_schedule(alpha, beta, r_max)};
    case FilterChoice::HighPass:
        return {highpass_schedule(alpha, beta, r_max)};
    case FilterChoice::Both:
        break;
    }
    return {ppr_schedule(alpha, beta, r_max), highpass_schedule(alpha, beta, r_max)};
}

FilterChoice parse_filter_choice(const std::string &name) {
    if (name == "ppr") {
        return FilterChoice::Ppr;
    }
    if (name == "highpass") {
        return FilterChoice::HighPass;
    }
    if (name == "both") {
        return FilterChoice::Both;
    }
    throw ConfigError("unknown filter '" + name + "' (expected ppr, highpass or both)");
}

std::size_t workers_from_env(std::size_t fallback) {
    const char *raw = std::getenv("DYNAPROP_WORKERS");
    if (raw == nullptr || *raw == '\0') {
        return fallback;
    }
    char *end = nullptr;
    const unsigned long long value = std::strtoull(raw, &end, 10);
    if (*end != '\0' || value == 0) {
        throw ConfigError(std::string("DYNAPROP_WORKERS must be a positive integer, got '") + raw +
                          "'");
    }
    return static_cast<std::size_t>(value);
}

} // namespace dynaprop
