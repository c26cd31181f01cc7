#pragma once

#include "dynaprop/filter_schedule.hpp"
#include "dynaprop/graph_store.hpp"
#include "dynaprop/propagation.hpp"

#include <functional>
#include <map>
#include <span>
#include <vector>

namespace dynaprop {

/// Degree-change step at a single node. Scales est(u) by (d_new/d_old)^(1-beta)
/// so that est(u)/d(u)^(1-beta), the only quantity neighbors see, is
/// unchanged, and compensates in res(u) so est(u) + gamma0 res(u) is unchanged.
///
/// With d_new == 0 or d_old == 0 the estimate is folded into the residual
/// instead (est(u) = 0), which preserves the same sum.
void rescale_estimate(PropagationState &state, NodeId u, double d_old, double d_new,
                      const FilterSchedule &schedule);

/// est(v) / d(v)^(1-beta) for removed neighbor v, as it was before the
/// rescale step. Needed because a neighbor isolated by the update has had
/// its estimate folded away.
using RatioLookup = std::function<double(NodeId)>;

/// Residual correction at u after all rescales of the batch have run.
/// `graph` is the post-update graph (time t). Throws std::logic_error if an
/// added neighbor has no degree but a nonzero estimate.
void residual_increment(const WeightedDynamicGraph &graph, PropagationState &state, NodeId u,
                        double d_old, double d_new, double x_u,
                        const std::map<NodeId, double> &added,
                        const std::map<NodeId, double> &removed,
                        const FilterSchedule &schedule, const RatioLookup &removed_ratio);

/// Restores the invariant on the post-update graph for every node in the
/// diff (two phases: all rescales, then all increments) and refreshes the
/// frontier. Extends the state to diff.nodes_after using `column`. No pushes.
void restore_invariant(const WeightedDynamicGraph &graph, const FilterSchedule &schedule,
                       PropagationState &state, const SnapshotDiff &diff,
                       std::span<const double> column);

/// restore_invariant followed by push_until_converged.
ConvergenceReport apply_batch_update(const WeightedDynamicGraph &graph,
                                     const FilterSchedule &schedule, PropagationState &state,
                                     const SnapshotDiff &diff, std::span<const double> column,
                                     const PushOptions &options = {});

/// Single-column convenience for one streamed event: mutates `graph`,
/// restores the invariant, and pushes when `eager` is set. A lazy call leaves
/// the residuals for a later push_until_converged.
ConvergenceReport apply_single_event(WeightedDynamicGraph &graph, PropagationState &state,
                                     const GraphEvent &event, std::span<const double> column,
                                     const FilterSchedule &schedule, bool eager,
                                     const PushOptions &options = {});

} // namespace dynaprop
