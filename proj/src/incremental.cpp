#include "dynaprop/incremental.hpp"

#include <stdexcept>
#include <string>

namespace dynaprop {

void rescale_estimate(PropagationState &state, NodeId u, double d_old, double d_new,
                      const FilterSchedule &schedule) {
    if (d_old == d_new) {
        return;
    }
    double &est = state.estimate[u];
    if (d_old <= 0.0 || d_new <= 0.0) {
        if (d_old < 0.0 || d_new < 0.0) {
            throw std::invalid_argument("negative degree at node " + std::to_string(u));
        }
        state.residual[u] += est / schedule.gamma0;
        est = 0.0;
        return;
    }
    const double e = 1.0 - schedule.beta;
    const double old_pow = degree_pow(d_old, e);
    const double new_pow = degree_pow(d_new, e);
    const double before = est;
    est = before * new_pow / old_pow;
    state.residual[u] += est * (old_pow - new_pow) / (schedule.gamma0 * new_pow);
}

void residual_increment(const WeightedDynamicGraph &graph, PropagationState &state, NodeId u,
                        double d_old, double d_new, double x_u,
                        const std::map<NodeId, double> &added,
                        const std::map<NodeId, double> &removed,
                        const FilterSchedule &schedule, const RatioLookup &removed_ratio) {
    if (d_new <= 0.0) {
        // isolated: the neighbor sum is empty and est(u) was folded away
        state.residual[u] = x_u - state.estimate[u] / schedule.gamma0;
        return;
    }
    const double g0 = schedule.gamma0;
    const double new_beta_pow = degree_pow(d_new, schedule.beta);
    const double rest = 1.0 - schedule.beta;

    double delta = 0.0;
    if (d_old > 0.0) {
        const double old_sum = state.estimate[u] + g0 * state.residual[u] - g0 * x_u;
        delta = old_sum * (degree_pow(d_old, schedule.beta) - new_beta_pow) / new_beta_pow;
    }
    for (const auto &[v, w] : added) {
        const double dv = graph.degree(v);
        if (dv <= 0.0) {
            if (state.estimate[v] != 0.0) {
                throw std::logic_error("added neighbor " + std::to_string(v) +
                                       " has zero degree and a nonzero estimate");
            }
            continue;
        }
        delta += schedule.gamma * w * state.estimate[v] / (new_beta_pow * degree_pow(dv, rest));
    }
    for (const auto &[v, w] : removed) {
        delta -= schedule.gamma * w * removed_ratio(v) / new_beta_pow;
    }
    state.residual[u] += delta / g0;
}

void restore_invariant(const WeightedDynamicGraph &graph, const FilterSchedule &schedule,
                       PropagationState &state, const SnapshotDiff &diff,
                       std::span<const double> column) {
    if (graph.node_count() != diff.nodes_after) {
        throw std::invalid_argument("graph does not reflect the diff being restored");
    }
    if (state.size() < diff.nodes_after) {
        extend_state(graph, schedule, state, column.first(diff.nodes_after));
    }

    const double rest = 1.0 - schedule.beta;
    std::vector<double> ratio_before(diff.affected.size(), 0.0);
    for (std::size_t k = 0; k < diff.affected.size(); ++k) {
        const auto &nd = diff.affected[k];
        if (nd.degree_before > 0.0) {
            ratio_before[k] = state.estimate[nd.node] / degree_pow(nd.degree_before, rest);
        }
    }

    for (const auto &nd : diff.affected) {
        rescale_estimate(state, nd.node, nd.degree_before, graph.degree(nd.node), schedule);
    }

    const RatioLookup lookup = [&](NodeId v) {
        auto idx = diff.index_of(v);
        if (!idx) {
            throw std::logic_error("removed neighbor " + std::to_string(v) +
                                   " is missing from the affected set");
        }
        return ratio_before[*idx];
    };
    for (const auto &nd : diff.affected) {
        residual_increment(graph, state, nd.node, nd.degree_before, graph.degree(nd.node),
                           column[nd.node], nd.added, nd.removed, schedule, lookup);
    }
    for (const auto &nd : diff.affected) {
        refresh_frontier(graph, schedule, state, nd.node);
    }
}

ConvergenceReport apply_batch_update(const WeightedDynamicGraph &graph,
                                     const FilterSchedule &schedule, PropagationState &state,
                                     const SnapshotDiff &diff, std::span<const double> column,
                                     const PushOptions &options) {
    restore_invariant(graph, schedule, state, diff, column);
    return push_until_converged(graph, schedule, state, options);
}

ConvergenceReport apply_single_event(WeightedDynamicGraph &graph, PropagationState &state,
                                     const GraphEvent &event, std::span<const double> column,
                                     const FilterSchedule &schedule, bool eager,
                                     const PushOptions &options) {
    const auto diff = graph.apply_event(event);
    if (!eager) {
        restore_invariant(graph, schedule, state, diff, column);
        ConvergenceReport report;
        report.converged = state.frontier.empty() && state.isolated.empty();
        report.remaining = state.frontier.size() + state.isolated.size();
        return report;
    }
    return apply_batch_update(graph, schedule, state, diff, column, options);
}

} // namespace dynaprop
