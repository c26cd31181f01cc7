#include "dynaprop/graph_store.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dynaprop {

namespace {

// Relative slack allowed when a deletion is meant to remove the whole edge.
constexpr double kDeleteSlack = 1e-12;

std::pair<NodeId, NodeId> ordered(NodeId u, NodeId v) {
    return u < v ? std::pair{u, v} : std::pair{v, u};
}

} // namespace

std::optional<std::size_t> SnapshotDiff::index_of(NodeId node) const {
    auto it = std::lower_bound(affected.begin(), affected.end(), node,
                               [](const NodeDelta &nd, NodeId id) { return nd.node < id; });
    if (it == affected.end() || it->node != node) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - affected.begin());
}

const NodeDelta *SnapshotDiff::find(NodeId node) const {
    auto idx = index_of(node);
    return idx ? &affected[*idx] : nullptr;
}

WeightedDynamicGraph::WeightedDynamicGraph(std::size_t nodes)
    : adjacency_(nodes), degree_(nodes, 0.0) {}

WeightedDynamicGraph WeightedDynamicGraph::from_edges(std::span<const WeightedEdge> edges,
                                                      std::size_t min_nodes) {
    std::size_t n = min_nodes;
    for (const auto &e : edges) {
        n = std::max<std::size_t>(n, std::max(e.u, e.v) + std::size_t{1});
    }
    WeightedDynamicGraph g(n);
    for (const auto &e : edges) {
        g.add_edge(e.u, e.v, e.weight);
    }
    return g;
}

void WeightedDynamicGraph::check_node(NodeId u) const {
    if (!has_node(u)) {
        throw GraphError("unknown node " + std::to_string(u) + " (graph has " +
                         std::to_string(node_count()) + " nodes)");
    }
}

bool WeightedDynamicGraph::has_edge(NodeId u, NodeId v) const {
    return slot_.contains(key(u, v));
}

double WeightedDynamicGraph::weight(NodeId u, NodeId v) const {
    auto it = slot_.find(key(u, v));
    return it == slot_.end() ? 0.0 : adjacency_[u][it->second].weight;
}

double WeightedDynamicGraph::degree(NodeId u) const {
    check_node(u);
    return degree_[u];
}

std::span<const Neighbor> WeightedDynamicGraph::neighbors(NodeId u) const {
    check_node(u);
    return adjacency_[u];
}

double WeightedDynamicGraph::recompute_degree(NodeId u) const {
    check_node(u);
    double sum = 0.0;
    for (const auto &nb : adjacency_[u]) {
        sum += nb.weight;
    }
    return sum;
}

std::vector<WeightedEdge> WeightedDynamicGraph::edges() const {
    std::vector<WeightedEdge> out;
    out.reserve(edge_count_);
    for (NodeId u = 0; u < adjacency_.size(); ++u) {
        for (const auto &nb : adjacency_[u]) {
            if (u < nb.id) {
                out.push_back({u, nb.id, nb.weight});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const WeightedEdge &a, const WeightedEdge &b) {
        return a.u != b.u ? a.u < b.u : a.v < b.v;
    });
    return out;
}

NodeId WeightedDynamicGraph::add_node() {
    adjacency_.emplace_back();
    degree_.push_back(0.0);
    return static_cast<NodeId>(adjacency_.size() - 1);
}

void WeightedDynamicGraph::ensure_nodes(std::size_t count) {
    if (count > adjacency_.size()) {
        adjacency_.resize(count);
        degree_.resize(count, 0.0);
    }
}

void WeightedDynamicGraph::set_half(NodeId u, NodeId v, double w) {
    auto &row = adjacency_[u];
    auto it = slot_.find(key(u, v));
    if (it == slot_.end()) {
        if (w == 0.0) {
            return;
        }
        slot_.emplace(key(u, v), static_cast<std::uint32_t>(row.size()));
        row.push_back({v, w});
        degree_[u] += w;
        return;
    }
    const std::uint32_t pos = it->second;
    const double old = row[pos].weight;
    if (w == 0.0) {
        slot_.erase(it);
        if (pos + 1 != row.size()) {
            row[pos] = row.back();
            slot_[key(u, row[pos].id)] = pos;
        }
        row.pop_back();
        degree_[u] -= old;
    } else {
        row[pos].weight = w;
        degree_[u] += w - old;
    }
    if (row.empty()) {
        degree_[u] = 0.0;
    }
}

void WeightedDynamicGraph::set_weight(NodeId u, NodeId v, double w) {
    const bool existed = has_edge(u, v);
    set_half(u, v, w);
    set_half(v, u, w);
    if (!existed && w != 0.0) {
        ++edge_count_;
    } else if (existed && w == 0.0) {
        --edge_count_;
    }
}

void WeightedDynamicGraph::add_edge(NodeId u, NodeId v, double w) {
    check_node(u);
    check_node(v);
    if (u == v) {
        throw GraphError("self-loop on node " + std::to_string(u));
    }
    if (!(w > 0.0) || !std::isfinite(w)) {
        throw GraphError("edge weight must be positive and finite");
    }
    set_weight(u, v, weight(u, v) + w);
}

void WeightedDynamicGraph::remove_edge_weight(NodeId u, NodeId v, double w) {
    check_node(u);
    check_node(v);
    if (!(w > 0.0) || !std::isfinite(w)) {
        throw GraphError("deleted weight must be positive and finite");
    }
    const double current = weight(u, v);
    if (current == 0.0) {
        throw GraphError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                         ") does not exist");
    }
    if (w > current * (1.0 + kDeleteSlack)) {
        throw GraphError("deleting weight " + std::to_string(w) + " from edge (" +
                         std::to_string(u) + "," + std::to_string(v) + ") holding " +
                         std::to_string(current));
    }
    const double remaining = current - w;
    set_weight(u, v, remaining <= current * kDeleteSlack ? 0.0 : remaining);
}

SnapshotDiff WeightedDynamicGraph::apply_event(const GraphEvent &event) {
    return apply_batch(std::span<const GraphEvent>(&event, 1));
}

SnapshotDiff WeightedDynamicGraph::apply_batch(std::span<const GraphEvent> events) {
    const std::size_t nodes_before = node_count();
    // first-touch weights and degrees, for the net diff and for rollback
    std::map<std::pair<NodeId, NodeId>, double> weight_before;
    std::unordered_map<NodeId, double> degree_before;

    auto remember = [&](NodeId u, NodeId v) {
        if (has_node(u) && has_node(v)) {
            weight_before.try_emplace(ordered(u, v), weight(u, v));
            degree_before.try_emplace(u, degree_[u]);
            degree_before.try_emplace(v, degree_[v]);
        }
    };

    try {
        for (const auto &ev : events) {
            switch (ev.kind) {
            case EventKind::AddNode:
                ensure_nodes(std::size_t{ev.u} + 1);
                break;
            case EventKind::AddEdge:
                remember(ev.u, ev.v);
                add_edge(ev.u, ev.v, ev.weight);
                break;
            case EventKind::DeleteEdge:
                remember(ev.u, ev.v);
                remove_edge_weight(ev.u, ev.v, ev.weight);
                break;
            }
        }
    } catch (...) {
        for (const auto &[uv, w] : weight_before) {
            set_weight(uv.first, uv.second, w);
        }
        for (const auto &[u, d] : degree_before) {
            degree_[u] = d;
        }
        adjacency_.resize(nodes_before);
        degree_.resize(nodes_before);
        throw;
    }

    std::vector<EdgeChange> changes;
    changes.reserve(weight_before.size());
    for (const auto &[uv, before] : weight_before) {
        changes.push_back({uv.first, uv.second, before, weight(uv.first, uv.second)});
    }
    return make_diff(nodes_before, node_count(), std::move(changes),
                     [&](NodeId u) { return degree_before.at(u); });
}

void WeightedDynamicGraph::apply_diff(const SnapshotDiff &diff) {
    if (diff.nodes_before != node_count()) {
        throw GraphError("diff was computed against a graph with " +
                         std::to_string(diff.nodes_before) + " nodes, this one has " +
                         std::to_string(node_count()));
    }
    ensure_nodes(diff.nodes_after);
    for (const auto &change : diff.edges) {
        check_node(change.u);
        check_node(change.v);
        set_weight(change.u, change.v, change.weight_after);
    }
}

SnapshotDiff WeightedDynamicGraph::isolate_node(NodeId u) {
    check_node(u);
    std::vector<GraphEvent> events;
    events.reserve(adjacency_[u].size());
    for (const auto &nb : adjacency_[u]) {
        events.push_back({0, EventKind::DeleteEdge, u, nb.id, nb.weight});
    }
    return apply_batch(events);
}

double weighted_degree(const WeightedDynamicGraph &graph, NodeId node) {
    return graph.degree(node);
}

SnapshotDiff diff_snapshots(const WeightedDynamicGraph &prev, std::span<const WeightedEdge> next,
                            std::size_t next_min_nodes) {
    std::map<std::pair<NodeId, NodeId>, double> target;
    std::size_t nodes_after = std::max(prev.node_count(), next_min_nodes);
    for (const auto &e : next) {
        if (e.u == e.v) {
            throw GraphError("self-loop on node " + std::to_string(e.u));
        }
        if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
            throw GraphError("edge weight must be positive and finite");
        }
        target[ordered(e.u, e.v)] += e.weight;
        nodes_after = std::max<std::size_t>(nodes_after, std::max(e.u, e.v) + std::size_t{1});
    }

    std::vector<EdgeChange> changes;
    for (const auto &e : prev.edges()) {
        auto it = target.find({e.u, e.v});
        const double after = it == target.end() ? 0.0 : it->second;
        if (after != e.weight) {
            changes.push_back({e.u, e.v, e.weight, after});
        }
    }
    for (const auto &[uv, w] : target) {
        if (prev.weight(uv.first, uv.second) == 0.0 || !prev.has_node(uv.second)) {
            changes.push_back({uv.first, uv.second, 0.0, w});
        }
    }
    std::sort(changes.begin(), changes.end(), [](const EdgeChange &a, const EdgeChange &b) {
        return a.u != b.u ? a.u < b.u : a.v < b.v;
    });
    return make_diff(prev.node_count(), nodes_after, std::move(changes), [&](NodeId u) {
        return prev.has_node(u) ? prev.degree(u) : 0.0;
    });
}

} // namespace dynaprop
