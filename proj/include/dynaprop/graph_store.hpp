#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dynaprop {

using NodeId = std::uint32_t;
using Timestamp = std::int64_t;

/// Raised for structural violations: unknown nodes, missing edges, over-deletion.
class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Neighbor {
    NodeId id;
    double weight;
};

struct WeightedEdge {
    NodeId u;
    NodeId v;
    double weight;

    friend bool operator==(const WeightedEdge &, const WeightedEdge &) = default;
};

enum class EventKind { AddEdge, DeleteEdge, AddNode };

/// One timestamped mutation. For AddNode only `u` is meaningful; nodes up to
/// and including `u` are registered.
struct GraphEvent {
    Timestamp time = 0;
    EventKind kind = EventKind::AddEdge;
    NodeId u = 0;
    NodeId v = 0;
    double weight = 1.0;

    friend bool operator==(const GraphEvent &, const GraphEvent &) = default;
};

/// Net change of a single undirected edge, stored with u < v.
struct EdgeChange {
    NodeId u;
    NodeId v;
    double weight_before;
    double weight_after;
};

/// Per-node view of a diff: neighbor weight gained / lost and the degree
/// the node had before the change.
struct NodeDelta {
    NodeId node = 0;
    double degree_before = 0.0;
    double degree_delta = 0.0;
    std::map<NodeId, double> added;
    std::map<NodeId, double> removed;
};

/// Change between two graph states. `affected` is sorted by node id and
/// holds exactly the nodes touched by a nonzero edge change.
struct SnapshotDiff {
    std::size_t nodes_before = 0;
    std::size_t nodes_after = 0;
    std::vector<EdgeChange> edges;
    std::vector<NodeDelta> affected;

    [[nodiscard]] bool empty() const noexcept {
        return edges.empty() && nodes_before == nodes_after;
    }
    [[nodiscard]] std::optional<std::size_t> index_of(NodeId node) const;
    [[nodiscard]] const NodeDelta *find(NodeId node) const;
};

/// Undirected weighted multigraph-by-accumulation. Repeated insertions of
/// the same edge add to its weight; the weighted degree of every node is
/// cached and updated in O(1) per mutation.
///
/// Not thread-safe for mutation. Concurrent const access is fine.
class WeightedDynamicGraph {
public:
    explicit WeightedDynamicGraph(std::size_t nodes = 0);

    static WeightedDynamicGraph from_edges(std::span<const WeightedEdge> edges,
                                           std::size_t min_nodes = 0);

    [[nodiscard]] std::size_t node_count() const noexcept { return adjacency_.size(); }
    [[nodiscard]] std::size_t edge_count() const noexcept { return edge_count_; }
    [[nodiscard]] bool has_node(NodeId u) const noexcept { return u < adjacency_.size(); }
    [[nodiscard]] bool has_edge(NodeId u, NodeId v) const;

    /// Stored weight, 0 when absent.
    [[nodiscard]] double weight(NodeId u, NodeId v) const;
    [[nodiscard]] double degree(NodeId u) const;
    [[nodiscard]] std::span<const Neighbor> neighbors(NodeId u) const;
    [[nodiscard]] const std::vector<double> &degrees() const noexcept { return degree_; }

    /// Sum of the adjacency row, ignoring the cache.
    [[nodiscard]] double recompute_degree(NodeId u) const;

    /// All edges with u < v, sorted.
    [[nodiscard]] std::vector<WeightedEdge> edges() const;

    NodeId add_node();
    void ensure_nodes(std::size_t count);

    void add_edge(NodeId u, NodeId v, double weight);
    void remove_edge_weight(NodeId u, NodeId v, double weight);

    SnapshotDiff apply_event(const GraphEvent &event);

    /// Applies every event in order and returns the net diff. If any event
    /// fails the graph is rolled back to its prior state and the error
    /// rethrown.
    SnapshotDiff apply_batch(std::span<const GraphEvent> events);

    /// Replays a diff produced against this graph's current state.
    void apply_diff(const SnapshotDiff &diff);

    /// Node deletion: drops every incident edge, the node stays registered.
    SnapshotDiff isolate_node(NodeId u);

private:
    void check_node(NodeId u) const;
    void set_weight(NodeId u, NodeId v, double weight);
    void set_half(NodeId u, NodeId v, double weight);

    static std::uint64_t key(NodeId u, NodeId v) noexcept {
        return (static_cast<std::uint64_t>(u) << 32) | v;
    }

    std::vector<std::vector<Neighbor>> adjacency_;
    std::vector<double> degree_;
    // (u,v) -> slot of v in adjacency_[u]
    std::unordered_map<std::uint64_t, std::uint32_t> slot_;
    std::size_t edge_count_ = 0;
};

[[nodiscard]] double weighted_degree(const WeightedDynamicGraph &graph, NodeId node);

/// Builds a diff from per-edge before/after weights. `degree_before` must
/// give the prior cached degree of any endpoint.
template <typename DegreeFn>
SnapshotDiff make_diff(std::size_t nodes_before, std::size_t nodes_after,
                       std::vector<EdgeChange> edges, DegreeFn &&degree_before);

/// Diff from `prev` to the graph described by `next` (duplicate lines
/// accumulate). Pure; `prev` is not modified.
[[nodiscard]] SnapshotDiff diff_snapshots(const WeightedDynamicGraph &prev,
                                          std::span<const WeightedEdge> next,
                                          std::size_t next_min_nodes = 0);

// ---------------------------------------------------------------------------

template <typename DegreeFn>
SnapshotDiff make_diff(std::size_t nodes_before, std::size_t nodes_after,
                       std::vector<EdgeChange> edges, DegreeFn &&degree_before) {
    SnapshotDiff diff;
    diff.nodes_before = nodes_before;
    diff.nodes_after = nodes_after;

    std::map<NodeId, NodeDelta> per_node;
    auto touch = [&](NodeId node) -> NodeDelta & {
        auto [it, inserted] = per_node.try_emplace(node);
        if (inserted) {
            it->second.node = node;
            it->second.degree_before = degree_before(node);
        }
        return it->second;
    };

    std::vector<EdgeChange> kept;
    kept.reserve(edges.size());
    for (const auto &change : edges) {
        const double delta = change.weight_after - change.weight_before;
        if (delta == 0.0) {
            continue;
        }
        kept.push_back(change);
        for (const auto &[a, b] : {std::pair{change.u, change.v}, std::pair{change.v, change.u}}) {
            auto &nd = touch(a);
            if (delta > 0.0) {
                nd.added[b] += delta;
            } else {
                nd.removed[b] += -delta;
            }
            nd.degree_delta += delta;
        }
    }
    diff.edges = std::move(kept);
    diff.affected.reserve(per_node.size());
    for (auto &[node, nd] : per_node) {
        diff.affected.push_back(std::move(nd));
    }
    return diff;
}

} // namespace dynaprop
