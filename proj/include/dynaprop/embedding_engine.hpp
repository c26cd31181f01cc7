#pragma once

#include "dynaprop/filter_schedule.hpp"
#include "dynaprop/graph_store.hpp"
#include "dynaprop/propagation.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynaprop {

/// Malformed input: time regressions, features that do not cover a node,
/// inconsistent timelines, unreadable files.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// All events sharing one timestamp.
struct EventBatch {
    Timestamp time = 0;
    std::vector<GraphEvent> events;
};

struct Snapshot {
    Timestamp time = 0;
    std::vector<WeightedEdge> edges;
};

/// Node feature matrix, one row per node id. Stored column-major so each
/// feature column is a contiguous span.
struct FeatureStore {
    Eigen::MatrixXd matrix;
    std::optional<std::uint64_t> seed;

    /// Uniform(-0.5, 0.5) entries drawn row by row from a seeded mt19937_64.
    static FeatureStore random(std::size_t rows, std::size_t cols, std::uint64_t seed);

    [[nodiscard]] std::size_t rows() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
    [[nodiscard]] std::size_t cols() const noexcept { return static_cast<std::size_t>(matrix.cols()); }
    [[nodiscard]] std::span<const double> column(std::size_t s) const;
};

struct Checkpoint {
    Timestamp time = 0;
    Eigen::MatrixXd embedding; // rows = nodes registered at `time`
};

struct EmbeddingTimeline {
    std::vector<Checkpoint> checkpoints;
    /// One entry per concatenated filter, in column order.
    std::vector<FilterSchedule> filters;
    std::optional<std::uint64_t> feature_seed;

    [[nodiscard]] std::string schedule_tag() const;
    [[nodiscard]] std::size_t width() const;
    [[nodiscard]] std::size_t max_rows() const;
};

/// delta[k] = Z_{k+1} - Z_k, with rows for nodes born at k+1 taken against zero.
struct DeltaSequence {
    std::vector<Timestamp> times;
    std::vector<Eigen::MatrixXd> deltas;
};

struct EngineOptions {
    std::size_t workers = 1;
    /// Push after every batch. When false, batches only restore the
    /// invariant and pushing waits for the next checkpoint.
    bool eager = true;
    PushOptions push;
};

struct CheckpointPolicy {
    /// Checkpoint after every `stride`-th batch; the last batch always checkpoints.
    std::size_t stride = 1;
};

/// Maintains one PropagationState per (filter, feature column) over a
/// shared dynamic graph. Graph mutation and propagation never overlap.
class DynamicPropagator {
public:
    DynamicPropagator(WeightedDynamicGraph graph, FeatureStore features,
                      std::vector<FilterSchedule> filters, EngineOptions options = {});

    /// Initial push on G_0 and the first checkpoint.
    ConvergenceReport initialize(Timestamp time = 0);

    /// Applies one timestamp's events. Nodes past the current range are
    /// registered on first appearance.
    ConvergenceReport apply_events(Timestamp time, std::span<const GraphEvent> events,
                                   bool checkpoint);

    /// Moves the graph to the given snapshot via its diff.
    ConvergenceReport apply_snapshot(Timestamp time, std::span<const WeightedEdge> edges,
                                     bool checkpoint);

    /// Applies a diff computed against the current graph.
    ConvergenceReport apply_diff(Timestamp time, const SnapshotDiff &diff, bool checkpoint);

    /// Pushes every column to convergence and records an embedding at `time`.
    ConvergenceReport checkpoint(Timestamp time);

    [[nodiscard]] const WeightedDynamicGraph &graph() const noexcept { return graph_; }
    [[nodiscard]] const FeatureStore &features() const noexcept { return features_; }
    [[nodiscard]] const std::vector<EmbeddingTimeline> &timelines() const noexcept {
        return timelines_;
    }
    [[nodiscard]] const PropagationState &state(std::size_t filter, std::size_t column) const;
    [[nodiscard]] Eigen::MatrixXd current_embedding(std::size_t filter) const;
    [[nodiscard]] std::optional<Timestamp> last_time() const noexcept { return last_time_; }

private:
    void check_time(Timestamp time);
    ConvergenceReport after_mutation(Timestamp time, const SnapshotDiff &diff, bool checkpoint);
    ConvergenceReport push_all();

    WeightedDynamicGraph graph_;
    FeatureStore features_;
    std::vector<FilterSchedule> filters_;
    EngineOptions options_;
    std::vector<PropagationState> states_; // filter-major
    std::vector<EmbeddingTimeline> timelines_;
    std::optional<Timestamp> last_time_;
    bool initialized_ = false;
};

struct TimelineRun {
    std::vector<EmbeddingTimeline> timelines; // one per filter
    ConvergenceReport report;
};

/// CTDG: initial graph plus timestamp-grouped events. Initial checkpoint at
/// `initial_time`, which must precede every batch.
TimelineRun run_timeline(WeightedDynamicGraph initial, FeatureStore features,
                         std::span<const EventBatch> stream, std::vector<FilterSchedule> filters,
                         CheckpointPolicy policy = {}, EngineOptions options = {},
                         Timestamp initial_time = 0);

/// DTDG: `initial` is G_0 and `snapshots` are G_1..G_T.
TimelineRun run_timeline(WeightedDynamicGraph initial, FeatureStore features,
                         std::span<const Snapshot> snapshots, std::vector<FilterSchedule> filters,
                         CheckpointPolicy policy = {}, EngineOptions options = {},
                         Timestamp initial_time = 0);

DeltaSequence delta_sequence(const EmbeddingTimeline &timeline);

/// Column-wise concatenation; checkpoint times and row counts must agree.
EmbeddingTimeline concat_filters(std::span<const EmbeddingTimeline> timelines);

enum class ExportFormat { Binary64, Binary32, Tsv };

/// Binary layout (little-endian):
///   "DPEMBED\0", u32 version, u32 scalar bytes, u64 n, u64 d, u64 t,
///   f64 beta, f64 r_max, u32 k, k x {f64 gamma0, f64 gamma, u32 len, tag},
///   u8 has_seed, u64 seed, t x {i64 time, u64 rows}, then t x n x d scalars
///   row-major with rows past a checkpoint's own count zero-filled.
void export_timeline(const EmbeddingTimeline &timeline, const std::filesystem::path &path,
                     ExportFormat format = ExportFormat::Binary64);

EmbeddingTimeline import_timeline(const std::filesystem::path &path);

/// Runs `fn(task)` for task in [0, count) on up to `workers` threads.
/// Tasks are statically partitioned.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)> &fn);

} // namespace dynaprop
