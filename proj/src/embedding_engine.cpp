#include "dynaprop/embedding_engine.hpp"
#include "dynaprop/incremental.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace dynaprop {

// ----------------------------------------------------------------- features

FeatureStore FeatureStore::random(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    FeatureStore store;
    store.seed = seed;
    store.matrix.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    for (Eigen::Index i = 0; i < store.matrix.rows(); ++i) {
        for (Eigen::Index s = 0; s < store.matrix.cols(); ++s) {
            store.matrix(i, s) = dist(rng);
        }
    }
    return store;
}

std::span<const double> FeatureStore::column(std::size_t s) const {
    if (s >= cols()) {
        throw std::out_of_range("feature column " + std::to_string(s) + " out of range");
    }
    return {matrix.data() + s * rows(), rows()};
}

// ----------------------------------------------------------------- timeline

std::string EmbeddingTimeline::schedule_tag() const {
    std::string tag;
    for (const auto &f : filters) {
        if (!tag.empty()) {
            tag += '+';
        }
        tag += f.tag();
    }
    return tag;
}

std::size_t EmbeddingTimeline::width() const {
    return checkpoints.empty() ? 0 : static_cast<std::size_t>(checkpoints.front().embedding.cols());
}

std::size_t EmbeddingTimeline::max_rows() const {
    std::size_t n = 0;
    for (const auto &cp : checkpoints) {
        n = std::max(n, static_cast<std::size_t>(cp.embedding.rows()));
    }
    return n;
}

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)> &fn) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) {
                    fn(i);
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        });
    }
    for (auto &t : threads) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

// --------------------------------------------------------------- propagator

DynamicPropagator::DynamicPropagator(WeightedDynamicGraph graph, FeatureStore features,
                                     std::vector<FilterSchedule> filters, EngineOptions options)
    : graph_(std::move(graph)), features_(std::move(features)), filters_(std::move(filters)),
      options_(options) {
    if (filters_.empty()) {
        throw std::invalid_argument("at least one filter schedule is required");
    }
    if (features_.rows() < graph_.node_count()) {
        throw DataError("features cover " + std::to_string(features_.rows()) +
                        " nodes, initial graph has " + std::to_string(graph_.node_count()));
    }
    timelines_.resize(filters_.size());
    for (std::size_t f = 0; f < filters_.size(); ++f) {
        timelines_[f].filters = {filters_[f]};
        timelines_[f].feature_seed = features_.seed;
    }
}

const PropagationState &DynamicPropagator::state(std::size_t filter, std::size_t column) const {
    return states_.at(filter * features_.cols() + column);
}

Eigen::MatrixXd DynamicPropagator::current_embedding(std::size_t filter) const {
    const auto n = static_cast<Eigen::Index>(graph_.node_count());
    const auto d = static_cast<Eigen::Index>(features_.cols());
    Eigen::MatrixXd z(n, d);
    for (Eigen::Index s = 0; s < d; ++s) {
        const auto &est = states_[filter * features_.cols() + static_cast<std::size_t>(s)].estimate;
        for (Eigen::Index i = 0; i < n; ++i) {
            z(i, s) = est[static_cast<std::size_t>(i)];
        }
    }
    return z;
}

void DynamicPropagator::check_time(Timestamp time) {
    if (last_time_ && time <= *last_time_) {
        throw DataError("time regression: " + std::to_string(time) + " after " +
                        std::to_string(*last_time_));
    }
}

ConvergenceReport DynamicPropagator::push_all() {
    std::vector<ConvergenceReport> reports(states_.size());
    parallel_for(states_.size(), options_.workers, [&](std::size_t task) {
        const auto &schedule = filters_[task / features_.cols()];
        reports[task] = push_until_converged(graph_, schedule, states_[task], options_.push);
    });
    ConvergenceReport total;
    for (const auto &r : reports) {
        total += r;
    }
    return total;
}

ConvergenceReport DynamicPropagator::initialize(Timestamp time) {
    if (initialized_) {
        throw std::logic_error("propagator already initialized");
    }
    const std::size_t n = graph_.node_count();
    const std::size_t d = features_.cols();
    states_.resize(filters_.size() * d);
    parallel_for(states_.size(), options_.workers, [&](std::size_t task) {
        states_[task] = init_state(graph_, filters_[task / d], features_.column(task % d).first(n));
    });
    initialized_ = true;
    return checkpoint(time);
}

ConvergenceReport DynamicPropagator::checkpoint(Timestamp time) {
    if (!initialized_) {
        throw std::logic_error("propagator not initialized");
    }
    if (last_time_ && time < *last_time_) {
        throw DataError("checkpoint time " + std::to_string(time) + " precedes " +
                        std::to_string(*last_time_));
    }
    if (!timelines_.front().checkpoints.empty() &&
        timelines_.front().checkpoints.back().time >= time) {
        throw DataError("checkpoint times must be strictly increasing");
    }
    auto report = push_all();
    for (std::size_t f = 0; f < filters_.size(); ++f) {
        timelines_[f].checkpoints.push_back({time, current_embedding(f)});
    }
    last_time_ = time;
    return report;
}

ConvergenceReport DynamicPropagator::after_mutation(Timestamp time, const SnapshotDiff &diff,
                                                    bool checkpoint_now) {
    const std::size_t d = features_.cols();
    const std::size_t n = graph_.node_count();
    auto restore = [&](std::size_t task) {
        restore_invariant(graph_, filters_[task / d], states_[task], diff,
                          features_.column(task % d).first(n));
    };
    // small diffs are cheaper serially than spawning workers
    const std::size_t work = (diff.affected.size() + (diff.nodes_after - diff.nodes_before)) *
                             states_.size();
    parallel_for(states_.size(), work < 4096 ? 1 : options_.workers, restore);

    ConvergenceReport report;
    if (checkpoint_now) {
        report = checkpoint(time);
    } else {
        if (options_.eager) {
            report = push_all();
        }
        last_time_ = time;
    }
    return report;
}

ConvergenceReport DynamicPropagator::apply_events(Timestamp time,
                                                  std::span<const GraphEvent> events,
                                                  bool checkpoint_now) {
    if (!initialized_) {
        throw std::logic_error("propagator not initialized");
    }
    check_time(time);

    // implicit node registration on first appearance
    std::vector<GraphEvent> expanded;
    expanded.reserve(events.size());
    std::size_t n = graph_.node_count();
    for (const auto &ev : events) {
        const std::size_t top = ev.kind == EventKind::AddNode
                                    ? std::size_t{ev.u} + 1
                                    : std::max<std::size_t>(ev.u, ev.v) + 1;
        if (top > n && ev.kind != EventKind::AddNode) {
            expanded.push_back({ev.time, EventKind::AddNode, static_cast<NodeId>(top - 1), 0, 0.0});
        }
        n = std::max(n, top);
        expanded.push_back(ev);
    }
    if (n > features_.rows()) {
        throw DataError("event at time " + std::to_string(time) + " introduces node " +
                        std::to_string(n - 1) + " but features cover only " +
                        std::to_string(features_.rows()) + " nodes");
    }
    SnapshotDiff diff;
    try {
        diff = graph_.apply_batch(expanded);
    } catch (const GraphError &e) {
        throw DataError("at time " + std::to_string(time) + ": " + e.what());
    }
    return after_mutation(time, diff, checkpoint_now);
}

ConvergenceReport DynamicPropagator::apply_snapshot(Timestamp time,
                                                    std::span<const WeightedEdge> edges,
                                                    bool checkpoint_now) {
    SnapshotDiff diff;
    try {
        diff = diff_snapshots(graph_, edges);
    } catch (const GraphError &e) {
        throw DataError("snapshot at time " + std::to_string(time) + ": " + e.what());
    }
    return apply_diff(time, diff, checkpoint_now);
}

ConvergenceReport DynamicPropagator::apply_diff(Timestamp time, const SnapshotDiff &diff,
                                                bool checkpoint_now) {
    if (!initialized_) {
        throw std::logic_error("propagator not initialized");
    }
    check_time(time);
    if (diff.nodes_after > features_.rows()) {
        throw DataError("snapshot at time " + std::to_string(time) + " has " +
                        std::to_string(diff.nodes_after) + " nodes but features cover only " +
                        std::to_string(features_.rows()));
    }
    graph_.apply_diff(diff);
    return after_mutation(time, diff, checkpoint_now);
}

namespace {

template <typename Step>
TimelineRun run_steps(DynamicPropagator &engine, std::size_t steps, CheckpointPolicy policy,
                      Timestamp initial_time, Step &&step) {
    if (policy.stride == 0) {
        throw std::invalid_argument("checkpoint stride must be positive");
    }
    TimelineRun run;
    run.report = engine.initialize(initial_time);
    for (std::size_t k = 0; k < steps; ++k) {
        const bool cp = (k + 1) % policy.stride == 0 || k + 1 == steps;
        run.report += step(k, cp);
    }
    run.timelines = engine.timelines();
    return run;
}

} // namespace

TimelineRun run_timeline(WeightedDynamicGraph initial, FeatureStore features,
                         std::span<const EventBatch> stream, std::vector<FilterSchedule> filters,
                         CheckpointPolicy policy, EngineOptions options, Timestamp initial_time) {
    DynamicPropagator engine(std::move(initial), std::move(features), std::move(filters), options);
    return run_steps(engine, stream.size(), policy, initial_time, [&](std::size_t k, bool cp) {
        return engine.apply_events(stream[k].time, stream[k].events, cp);
    });
}

TimelineRun run_timeline(WeightedDynamicGraph initial, FeatureStore features,
                         std::span<const Snapshot> snapshots, std::vector<FilterSchedule> filters,
                         CheckpointPolicy policy, EngineOptions options, Timestamp initial_time) {
    DynamicPropagator engine(std::move(initial), std::move(features), std::move(filters), options);
    return run_steps(engine, snapshots.size(), policy, initial_time, [&](std::size_t k, bool cp) {
        return engine.apply_snapshot(snapshots[k].time, snapshots[k].edges, cp);
    });
}

// ------------------------------------------------------------ deltas/concat

DeltaSequence delta_sequence(const EmbeddingTimeline &timeline) {
    if (timeline.checkpoints.size() < 2) {
        throw std::invalid_argument("delta sequence needs at least two checkpoints");
    }
    DeltaSequence seq;
    for (std::size_t k = 1; k < timeline.checkpoints.size(); ++k) {
        const auto &prev = timeline.checkpoints[k - 1].embedding;
        const auto &next = timeline.checkpoints[k].embedding;
        Eigen::MatrixXd delta = next;
        const auto shared = std::min(prev.rows(), next.rows());
        delta.topRows(shared) -= prev.topRows(shared);
        seq.times.push_back(timeline.checkpoints[k].time);
        seq.deltas.push_back(std::move(delta));
    }
    return seq;
}

EmbeddingTimeline concat_filters(std::span<const EmbeddingTimeline> timelines) {
    if (timelines.empty()) {
        throw std::invalid_argument("nothing to concatenate");
    }
    const auto &first = timelines.front();
    EmbeddingTimeline out;
    out.feature_seed = first.feature_seed;
    for (const auto &tl : timelines) {
        if (tl.checkpoints.size() != first.checkpoints.size()) {
            throw DataError("timelines have different checkpoint counts");
        }
        out.filters.insert(out.filters.end(), tl.filters.begin(), tl.filters.end());
    }
    for (std::size_t k = 0; k < first.checkpoints.size(); ++k) {
        const auto rows = first.checkpoints[k].embedding.rows();
        Eigen::Index width = 0;
        for (const auto &tl : timelines) {
            const auto &cp = tl.checkpoints[k];
            if (cp.time != first.checkpoints[k].time || cp.embedding.rows() != rows) {
                throw DataError("timelines disagree at checkpoint " + std::to_string(k));
            }
            width += cp.embedding.cols();
        }
        Eigen::MatrixXd z(rows, width);
        Eigen::Index col = 0;
        for (const auto &tl : timelines) {
            const auto &e = tl.checkpoints[k].embedding;
            z.middleCols(col, e.cols()) = e;
            col += e.cols();
        }
        out.checkpoints.push_back({first.checkpoints[k].time, std::move(z)});
    }
    return out;
}

// ------------------------------------------------------------------- export

namespace {

constexpr char kMagic[8] = {'D', 'P', 'E', 'M', 'B', 'E', 'D', '\0'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "export assumes a little-endian host");

template <typename T>
void put(std::ostream &out, T value) {
    out.write(reinterpret_cast<const char *>(&value), sizeof(T));
}

template <typename T>
T get(std::istream &in) {
    T value{};
    in.read(reinterpret_cast<char *>(&value), sizeof(T));
    if (!in) {
        throw DataError("truncated embedding file");
    }
    return value;
}

void write_tsv(const EmbeddingTimeline &timeline, std::ostream &out) {
    out << "# dynaprop embedding v" << kVersion << " n=" << timeline.max_rows()
        << " d=" << timeline.width() << " t=" << timeline.checkpoints.size()
        << " filters=" << timeline.schedule_tag();
    if (!timeline.filters.empty()) {
        out << " beta=" << timeline.filters.front().beta
            << " r_max=" << timeline.filters.front().r_max;
    }
    for (const auto &f : timeline.filters) {
        out << " " << f.tag() << "(gamma0=" << f.gamma0 << ",gamma=" << f.gamma << ")";
    }
    if (timeline.feature_seed) {
        out << " seed=" << *timeline.feature_seed;
    }
    out << "\n" << std::setprecision(17);
    for (const auto &cp : timeline.checkpoints) {
        for (Eigen::Index i = 0; i < cp.embedding.rows(); ++i) {
            out << cp.time << '\t' << i;
            for (Eigen::Index s = 0; s < cp.embedding.cols(); ++s) {
                out << '\t' << cp.embedding(i, s);
            }
            out << '\n';
        }
    }
}

} // namespace

void export_timeline(const EmbeddingTimeline &timeline, const std::filesystem::path &path,
                     ExportFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    if (format == ExportFormat::Tsv) {
        write_tsv(timeline, out);
        if (!out) {
            throw DataError("write failed: " + path.string());
        }
        return;
    }
    if (timeline.filters.empty()) {
        throw std::invalid_argument("timeline carries no filter metadata");
    }
    const bool single = format == ExportFormat::Binary32;
    const std::size_t n = timeline.max_rows();
    const std::size_t d = timeline.width();

    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, single ? 4 : 8);
    put<std::uint64_t>(out, n);
    put<std::uint64_t>(out, d);
    put<std::uint64_t>(out, timeline.checkpoints.size());
    put<double>(out, timeline.filters.front().beta);
    put<double>(out, timeline.filters.front().r_max);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(timeline.filters.size()));
    for (const auto &f : timeline.filters) {
        put<double>(out, f.gamma0);
        put<double>(out, f.gamma);
        const auto tag = f.tag();
        put<std::uint32_t>(out, static_cast<std::uint32_t>(tag.size()));
        out.write(tag.data(), static_cast<std::streamsize>(tag.size()));
    }
    put<std::uint8_t>(out, timeline.feature_seed ? 1 : 0);
    put<std::uint64_t>(out, timeline.feature_seed.value_or(0));
    for (const auto &cp : timeline.checkpoints) {
        put<std::int64_t>(out, cp.time);
        put<std::uint64_t>(out, static_cast<std::uint64_t>(cp.embedding.rows()));
    }
    for (const auto &cp : timeline.checkpoints) {
        if (static_cast<std::size_t>(cp.embedding.cols()) != d) {
            throw std::invalid_argument("checkpoints differ in width");
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t s = 0; s < d; ++s) {
                const double v = static_cast<Eigen::Index>(i) < cp.embedding.rows()
                                     ? cp.embedding(static_cast<Eigen::Index>(i),
                                                    static_cast<Eigen::Index>(s))
                                     : 0.0;
                if (single) {
                    put<float>(out, static_cast<float>(v));
                } else {
                    put<double>(out, v);
                }
            }
        }
    }
    if (!out) {
        throw DataError("write failed: " + path.string());
    }
}

EmbeddingTimeline import_timeline(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
        throw DataError(path.string() + " is not a dynaprop embedding file");
    }
    if (const auto version = get<std::uint32_t>(in); version != kVersion) {
        throw DataError("unsupported embedding file version " + std::to_string(version));
    }
    const auto scalar = get<std::uint32_t>(in);
    if (scalar != 4 && scalar != 8) {
        throw DataError("bad scalar width " + std::to_string(scalar));
    }
    const auto n = get<std::uint64_t>(in);
    const auto d = get<std::uint64_t>(in);
    const auto t = get<std::uint64_t>(in);
    const auto beta = get<double>(in);
    const auto r_max = get<double>(in);
    const auto k = get<std::uint32_t>(in);

    EmbeddingTimeline timeline;
    for (std::uint32_t f = 0; f < k; ++f) {
        FilterSchedule s;
        s.beta = beta;
        s.r_max = r_max;
        s.gamma0 = get<double>(in);
        s.gamma = get<double>(in);
        std::string tag(get<std::uint32_t>(in), '\0');
        in.read(tag.data(), static_cast<std::streamsize>(tag.size()));
        s.kind = tag == "ppr" ? FilterKind::Ppr
                 : tag == "highpass" ? FilterKind::HighPass
                                     : FilterKind::Custom;
        timeline.filters.push_back(s);
    }
    const bool has_seed = get<std::uint8_t>(in) != 0;
    const auto seed = get<std::uint64_t>(in);
    if (has_seed) {
        timeline.feature_seed = seed;
    }
    std::vector<std::uint64_t> rows(t);
    timeline.checkpoints.resize(t);
    for (std::uint64_t c = 0; c < t; ++c) {
        timeline.checkpoints[c].time = get<std::int64_t>(in);
        rows[c] = get<std::uint64_t>(in);
        if (rows[c] > n) {
            throw DataError("checkpoint row count exceeds header n");
        }
    }
    for (std::uint64_t c = 0; c < t; ++c) {
        Eigen::MatrixXd z(static_cast<Eigen::Index>(rows[c]), static_cast<Eigen::Index>(d));
        for (std::uint64_t i = 0; i < n; ++i) {
            for (std::uint64_t s = 0; s < d; ++s) {
                const double v = scalar == 4 ? static_cast<double>(get<float>(in)) : get<double>(in);
                if (i < rows[c]) {
                    z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = v;
                }
            }
        }
        timeline.checkpoints[c].embedding = std::move(z);
    }
    return timeline;
}

} // namespace dynaprop
