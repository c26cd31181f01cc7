#pragma once

#include "dynaprop/filter_schedule.hpp"
#include "dynaprop/graph_store.hpp"

#include <cstdint>
#include <deque>
#include <span>
#include <stdexcept>
#include <vector>

namespace dynaprop {

/// Estimate / residual pair for one feature column.
///
/// Whenever a state is handed back to a caller it satisfies, at every node i,
///
///   est(i) + gamma0 * res(i) = gamma0 * x(i) + sum_j gamma w_ij est(j) / (d(i)^beta d(j)^(1-beta))
///
/// `frontier` holds candidate nodes with |res| above threshold; `in_frontier`
/// prevents duplicates. Zero-degree nodes with a nonzero residual wait in
/// `isolated` instead: they have no neighbors to push to and are settled
/// directly.
struct PropagationState {
    std::vector<double> estimate;
    std::vector<double> residual;
    std::deque<NodeId> frontier;
    std::vector<std::uint8_t> in_frontier;
    std::vector<NodeId> isolated;
    std::vector<std::uint8_t> in_isolated;

    [[nodiscard]] std::size_t size() const noexcept { return estimate.size(); }
};

enum class FrontierOrder { Fifo, Lifo };

inline constexpr std::uint64_t kDefaultWorkBudget = 1'000'000'000;

struct PushOptions {
    std::uint64_t work_budget = kDefaultWorkBudget;
    FrontierOrder order = FrontierOrder::Fifo;
};

struct ConvergenceReport {
    bool converged = true;
    std::uint64_t pushes = 0;
    std::uint64_t settled = 0;
    std::size_t remaining = 0;

    ConvergenceReport &operator+=(const ConvergenceReport &other) {
        converged = converged && other.converged;
        pushes += other.pushes;
        settled += other.settled;
        remaining += other.remaining;
        return *this;
    }
};

/// est = 0, res = x; every over-threshold node is queued.
PropagationState init_state(const WeightedDynamicGraph &graph, const FilterSchedule &schedule,
                            std::span<const double> column);

/// Registers nodes [state.size(), column.size()) with est = 0, res = x.
void extend_state(const WeightedDynamicGraph &graph, const FilterSchedule &schedule,
                  PropagationState &state, std::span<const double> column);

/// Queues `node` if its residual is above threshold (or, for an isolated
/// node, nonzero).
void refresh_frontier(const WeightedDynamicGraph &graph, const FilterSchedule &schedule,
                      PropagationState &state, NodeId node);

/// One forward push at `node`. Throws std::invalid_argument for d(node) = 0.
void push_node(const WeightedDynamicGraph &graph, const FilterSchedule &schedule,
               PropagationState &state, NodeId node);

/// Pushes until every positive-degree node satisfies |res(i)| <= r_max d(i)^(1-beta)
/// and isolated nodes carry no residual, or the push budget runs out.
ConvergenceReport push_until_converged(const WeightedDynamicGraph &graph,
                                       const FilterSchedule &schedule, PropagationState &state,
                                       const PushOptions &options = {});

[[nodiscard]] bool is_converged(const WeightedDynamicGraph &graph, const FilterSchedule &schedule,
                                const PropagationState &state);

/// Largest absolute violation of the invariant over all nodes.
[[nodiscard]] double verify_invariant(const WeightedDynamicGraph &graph,
                                      const FilterSchedule &schedule,
                                      const PropagationState &state,
                                      std::span<const double> column);

} // namespace dynaprop
