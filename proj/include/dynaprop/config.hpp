#pragma once

#include "dynaprop/filter_schedule.hpp"
#include "dynaprop/propagation.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynaprop {

enum class FilterChoice { Ppr, HighPass, Both };

/// Raised by RunConfig::validate; the message names every violation.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct RunConfig {
    double alpha = kDefaultAlpha;
    double beta = kDefaultBeta;
    double r_max = kDefaultRMax;
    FilterChoice filter = FilterChoice::Ppr;
    std::size_t workers = 1;
    std::size_t stride = 1;
    bool eager = false;
    std::uint64_t work_budget = kDefaultWorkBudget;

    void validate() const;

    /// ppr, highpass, or both (low-pass first).
    [[nodiscard]] std::vector<FilterSchedule> schedules() const;
};

FilterChoice parse_filter_choice(const std::string &name);

/// Worker cap from DYNAPROP_WORKERS, or `fallback` when unset.
std::size_t workers_from_env(std::size_t fallback);

} // namespace dynaprop
