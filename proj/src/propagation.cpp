#include "dynaprop/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dynaprop {

namespace {

bool over_threshold(const FilterSchedule &schedule, double residual, double degree) {
    return std::abs(residual) > push_threshold(schedule, degree);
}

void check_length(std::size_t have, std::size_t want) {
    if (have != want) {
        throw std::invalid_argument("feature column has " + std::to_string(have) +
                                    " entries, graph has " + std::to_string(want) + " nodes");
    }
}

// Isolated node: the invariant reduces to est + gamma0 res = gamma0 x, so
// moving the whole residual into the estimate keeps it exact.
void settle(const FilterSchedule &schedule, PropagationState &state, NodeId node) {
    state.estimate[node] += schedule.gamma0 * state.residual[node];
    state.residual[node] = 0.0;
}

} // namespace

void refresh_frontier(const WeightedDynamicGraph &graph, const FilterSchedule &schedule,
                      PropagationState &state, NodeId node) {
    const double d = graph.degree(node);
    if (d > 0.0) {
        if (!state.in_frontier[node] && over_threshold(schedule, state.residual[node], d)) {
            state.in_frontier[node] = 1;
            state.frontier.push_back(node);
        }
    } else if (!state.in_isolated[node] && state.residual[node] != 0.0) {
        state.in_isolated[node] = 1;
        state.isolated.push_back(node);
    }
}

void extend_state(const WeightedDynamicGraph &graph, const FilterSchedule &schedule,
                  PropagationState &state, std::span<const double> column) {
    const std::size_t old_n = state.size();
    if (column.size() < old_n) {
        throw std::invalid_argument("feature column shorter than the state it extends");
    }
    if (column.size() > graph.node_count()) {
        throw std::invalid_argument("feature column covers nodes the graph does not have");
    }
    state.estimate.resize(column.size(), 0.0);
    state.residual.resize(column.size(), 0.0);
    state.in_frontier.resize(column.size(), 0);
    state.in_isolated.resize(column.size(), 0);
    for (std::size_t i = old_n; i < column.size(); ++i) {
        state.residual[i] = column[i];
        refresh_frontier(graph, schedule, state, static_cast<NodeId>(i));
    }
}

PropagationState init_state(const WeightedDynamicGraph &graph, const FilterSchedule &schedule,
                            std::span<const double> column) {
    check_length(column.size(), graph.node_count());
    PropagationState state;
    extend_state(graph, schedule, state, column);
    return state;
}

void push_node(const WeightedDynamicGraph &graph, const FilterSchedule &schedule,
               PropagationState &state, NodeId node) {
    const double d = graph.degree(node);
    if (!(d > 0.0)) {
        throw std::invalid_argument("push on zero-degree node " + std::to_string(node));
    }
    const double r = state.residual[node];
    state.estimate[node] += schedule.gamma0 * r;
    state.residual[node] = 0.0;

    const double scale = schedule.gamma * r / degree_pow(d, 1.0 - schedule.beta);
    const auto &deg = graph.degrees();
    for (const auto &nb : graph.neighbors(node)) {
        state.residual[nb.id] += scale * nb.weight / degree_pow(deg[nb.id], schedule.beta);
        if (!state.in_frontier[nb.id] &&
            over_threshold(schedule, state.residual[nb.id], deg[nb.id])) {
            state.in_frontier[nb.id] = 1;
            state.frontier.push_back(nb.id);
        }
    }
}

ConvergenceReport push_until_converged(const WeightedDynamicGraph &graph,
                                       const FilterSchedule &schedule, PropagationState &state,
                                       const PushOptions &options) {
    check_length(state.size(), graph.node_count());
    ConvergenceReport report;

    for (NodeId node : state.isolated) {
        state.in_isolated[node] = 0;
        if (graph.degree(node) == 0.0) {
            settle(schedule, state, node);
            ++report.settled;
        } else {
            refresh_frontier(graph, schedule, state, node);
        }
    }
    state.isolated.clear();

    const auto &deg = graph.degrees();
    while (!state.frontier.empty()) {
        NodeId node;
        if (options.order == FrontierOrder::Fifo) {
            node = state.frontier.front();
            state.frontier.pop_front();
        } else {
            node = state.frontier.back();
            state.frontier.pop_back();
        }
        state.in_frontier[node] = 0;

        const double d = deg[node];
        if (d == 0.0) {
            // lost its edges while queued
            if (state.residual[node] != 0.0) {
                settle(schedule, state, node);
                ++report.settled;
            }
            continue;
        }
        if (!over_threshold(schedule, state.residual[node], d)) {
            continue;
        }
        if (report.pushes >= options.work_budget) {
            state.in_frontier[node] = 1;
            state.frontier.push_front(node);
            report.converged = false;
            report.remaining = state.frontier.size();
            return report;
        }
        push_node(graph, schedule, state, node);
        ++report.pushes;
    }
    return report;
}

bool is_converged(const WeightedDynamicGraph &graph, const FilterSchedule &schedule,
                  const PropagationState &state) {
    for (NodeId i = 0; i < state.size(); ++i) {
        const double d = graph.degree(i);
        if (d > 0.0 ? over_threshold(schedule, state.residual[i], d) : state.residual[i] != 0.0) {
            return false;
        }
    }
    return true;
}

double verify_invariant(const WeightedDynamicGraph &graph, const FilterSchedule &schedule,
                        const PropagationState &state, std::span<const double> column) {
    check_length(column.size(), graph.node_count());
    check_length(state.size(), graph.node_count());
    const auto &deg = graph.degrees();
    double worst = 0.0;
    for (NodeId i = 0; i < state.size(); ++i) {
        double neighbor_sum = 0.0;
        if (deg[i] > 0.0) {
            const double left = degree_pow(deg[i], schedule.beta);
            for (const auto &nb : graph.neighbors(i)) {
                neighbor_sum += schedule.gamma * nb.weight * state.estimate[nb.id] /
                                (left * degree_pow(deg[nb.id], 1.0 - schedule.beta));
            }
        }
        const double lhs = state.estimate[i] + schedule.gamma0 * state.residual[i];
        const double rhs = schedule.gamma0 * column[i] + neighbor_sum;
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

} // namespace dynaprop
