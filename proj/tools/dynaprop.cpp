// dynaprop command-line front end.
//
// Exit codes: 0 ok, 1 usage, 2 data error (including a failed verification),
// 3 push budget exhausted.

#include "dynaprop/config.hpp"
#include "dynaprop/embedding_engine.hpp"
#include "dynaprop/exact_oracle.hpp"
#include "dynaprop/io.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace dynaprop;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kBudget = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Options shared by the propagating subcommands.
struct CommonArgs {
    RunConfig config;
    std::string filter = "ppr";
    std::string graph;
    std::string features;
    std::size_t dim = 16;
    std::uint64_t seed = 0;
    std::size_t workers = 0;
    std::string events;
    std::string snapshots;
    std::size_t nodes = 0; // stream only: rows of random features
};

void add_common(CLI::App *cmd, CommonArgs &args) {
    cmd->add_option("--alpha", args.config.alpha, "teleport / filter parameter in (0,1)")
        ->capture_default_str();
    cmd->add_option("--beta", args.config.beta, "degree normalization exponent in [0,1]")
        ->capture_default_str();
    cmd->add_option("--rmax", args.config.r_max, "push threshold")->capture_default_str();
    cmd->add_option("--filter", args.filter, "ppr, highpass or both")
        ->check(CLI::IsMember({"ppr", "highpass", "both"}))
        ->capture_default_str();
    cmd->add_option("--graph", args.graph, "initial edge list (u v [w]); empty graph if omitted");
    cmd->add_option("--features", args.features, "feature matrix file (DPFEAT01)");
    cmd->add_option("--dim", args.dim, "random feature width when --features is absent")
        ->capture_default_str();
    cmd->add_option("--seed", args.seed, "random feature seed")->capture_default_str();
    cmd->add_option("--workers", args.workers,
                    "column workers (default: all cores, capped by DYNAPROP_WORKERS)");
    cmd->add_option("--stride", args.config.stride, "checkpoint every k-th batch")
        ->capture_default_str();
    cmd->add_option("--budget", args.config.work_budget, "push budget per column and phase")
        ->capture_default_str();
    cmd->add_flag("--eager", args.config.eager, "push after every batch instead of at checkpoints");
}

void finalize(CommonArgs &args) {
    args.config.filter = parse_filter_choice(args.filter);
    std::size_t workers = args.workers;
    if (workers == 0) {
        workers = std::max(1u, std::thread::hardware_concurrency());
    }
    args.config.workers = std::min(workers, workers_from_env(workers));
    args.config.validate();
    if (!args.events.empty() && !args.snapshots.empty()) {
        throw UsageError("--events and --snapshots are mutually exclusive");
    }
}

EngineOptions engine_options(const RunConfig &config) {
    EngineOptions options;
    options.workers = config.workers;
    options.eager = config.eager;
    options.push.work_budget = config.work_budget;
    return options;
}

WeightedDynamicGraph load_graph(const CommonArgs &args) {
    if (args.graph.empty()) {
        return WeightedDynamicGraph(0);
    }
    return WeightedDynamicGraph::from_edges(parse_edge_list(fs::path(args.graph)));
}

std::size_t max_node(std::span<const EventBatch> stream, std::size_t n) {
    for (const auto &b : stream) {
        for (const auto &ev : b.events) {
            n = std::max<std::size_t>(n, std::max(ev.u, ev.v) + std::size_t{1});
        }
    }
    return n;
}

std::size_t max_node(std::span<const Snapshot> snaps, std::size_t n) {
    for (const auto &s : snaps) {
        for (const auto &e : s.edges) {
            n = std::max<std::size_t>(n, std::max(e.u, e.v) + std::size_t{1});
        }
    }
    return n;
}

FeatureStore load_features(const CommonArgs &args, std::size_t nodes) {
    if (!args.features.empty()) {
        return read_features(fs::path(args.features));
    }
    if (args.dim == 0) {
        throw UsageError("--dim must be positive");
    }
    return FeatureStore::random(nodes, args.dim, args.seed);
}

struct Loaded {
    WeightedDynamicGraph graph;
    FeatureStore features;
    std::vector<EventBatch> stream;
    std::vector<Snapshot> snapshots;
};

Loaded load_inputs(const CommonArgs &args) {
    Loaded in;
    in.graph = load_graph(args);
    std::size_t nodes = in.graph.node_count();
    if (!args.events.empty()) {
        in.stream = parse_event_stream(fs::path(args.events));
        nodes = max_node(in.stream, nodes);
    }
    if (!args.snapshots.empty()) {
        in.snapshots = parse_snapshots(fs::path(args.snapshots));
        nodes = max_node(in.snapshots, nodes);
    }
    in.features = load_features(args, nodes);
    if (in.features.rows() < nodes) {
        throw DataError("features cover " + std::to_string(in.features.rows()) +
                        " nodes, inputs reference " + std::to_string(nodes));
    }
    return in;
}

// Initial checkpoint precedes every batch / snapshot.
Timestamp initial_time(const Loaded &in) {
    if (!in.stream.empty()) {
        return std::min<Timestamp>(0, in.stream.front().time - 1);
    }
    // snapshot k sits at time k + 1, G_0 at 0
    return 0;
}

TimelineRun run(const Loaded &in, const CommonArgs &args) {
    const auto filters = args.config.schedules();
    const CheckpointPolicy policy{args.config.stride};
    const auto options = engine_options(args.config);
    if (!in.snapshots.empty()) {
        auto snaps = in.snapshots;
        for (auto &s : snaps) {
            s.time += 1;
        }
        return run_timeline(in.graph, in.features, std::span<const Snapshot>(snaps), filters,
                            policy, options, 0);
    }
    return run_timeline(in.graph, in.features, std::span<const EventBatch>(in.stream), filters,
                        policy, options, initial_time(in));
}

std::string file_stem(const FilterSchedule &s) { return s.tag(); }

int budget_status(const ConvergenceReport &report) {
    if (!report.converged) {
        std::cerr << "dynaprop: push budget exhausted (" << report.remaining
                  << " queued entries left)\n";
        return kBudget;
    }
    return kOk;
}

// ------------------------------------------------------------- subcommands

struct OutArgs {
    std::string out = "emb";
    bool float32 = false;
    bool tsv = false;
};

void add_out(CLI::App *cmd, OutArgs &o) {
    cmd->add_option("--out", o.out, "output directory")->capture_default_str();
    cmd->add_flag("--float32", o.float32, "write 32-bit scalars");
    cmd->add_flag("--tsv", o.tsv, "also write a TSV debug dump per file");
}

void write_outputs(const std::vector<EmbeddingTimeline> &timelines, const OutArgs &o) {
    fs::create_directories(o.out);
    const auto format = o.float32 ? ExportFormat::Binary32 : ExportFormat::Binary64;
    auto write = [&](const EmbeddingTimeline &tl, const std::string &stem) {
        const auto path = fs::path(o.out) / (stem + ".dpemb");
        export_timeline(tl, path, format);
        std::cout << "wrote " << path.string() << " (" << tl.checkpoints.size()
                  << " checkpoints, n=" << tl.max_rows() << ", d=" << tl.width() << ")\n";
        if (o.tsv) {
            export_timeline(tl, fs::path(o.out) / (stem + ".tsv"), ExportFormat::Tsv);
        }
    };
    for (const auto &tl : timelines) {
        write(tl, file_stem(tl.filters.front()));
    }
    if (timelines.size() > 1) {
        write(concat_filters(timelines), "concat");
    }
}

int cmd_propagate(CommonArgs &args, const OutArgs &o) {
    finalize(args);
    const auto in = load_inputs(args);
    const auto result = run(in, args);
    write_outputs(result.timelines, o);
    std::cout << "pushes " << result.report.pushes << ", settled " << result.report.settled
              << "\n";
    return budget_status(result.report);
}

int cmd_stream(CommonArgs &args, const OutArgs &o) {
    finalize(args);
    auto graph = load_graph(args);
    if (args.features.empty() && args.nodes == 0) {
        // the stream is not read ahead, so random features need an explicit size
        throw UsageError("stream needs --features or --nodes");
    }
    auto features = load_features(args, std::max(args.nodes, graph.node_count()));
    std::ifstream file;
    std::istream *source = &std::cin;
    std::string name = "<stdin>";
    if (!args.events.empty() && args.events != "-") {
        file.open(args.events);
        if (!file) {
            throw DataError("cannot open " + args.events);
        }
        source = &file;
        name = args.events;
    }

    DynamicPropagator engine(std::move(graph), std::move(features), args.config.schedules(),
                             engine_options(args.config));
    ConvergenceReport total = engine.initialize(0);
    EventStreamReader reader(*source, name);
    std::size_t count = 0;
    bool first = true;
    while (auto batch = reader.next()) {
        if (first && batch->time <= 0) {
            throw DataError(name + ": stream timestamps must be positive");
        }
        first = false;
        ++count;
        const bool cp = count % args.config.stride == 0;
        const auto report = engine.apply_events(batch->time, batch->events, cp);
        total += report;
        std::cout << batch->time << '\t' << batch->events.size() << " events\t"
                  << engine.graph().node_count() << " nodes\t" << engine.graph().edge_count()
                  << " edges\t" << report.pushes << " pushes" << (cp ? "\tcheckpoint" : "")
                  << '\n';
    }
    if (count > 0 && count % args.config.stride != 0) {
        total += engine.checkpoint(*engine.last_time());
    }
    write_outputs(engine.timelines(), o);
    return budget_status(total);
}

int cmd_verify(CommonArgs &args, bool against_oracle, double scale) {
    finalize(args);
    const auto in = load_inputs(args);
    const auto filters = args.config.schedules();
    const auto result = run(in, args);

    // replay the graph alongside the checkpoints
    auto graph = in.graph;
    std::size_t step = 0;
    auto advance_to = [&](Timestamp t) {
        if (!in.snapshots.empty()) {
            while (step < in.snapshots.size() && in.snapshots[step].time + 1 <= t) {
                graph.apply_diff(diff_snapshots(graph, in.snapshots[step].edges));
                ++step;
            }
        } else {
            while (step < in.stream.size() && in.stream[step].time <= t) {
                graph.ensure_nodes(max_node(std::span(in.stream).subspan(step, 1),
                                            graph.node_count()));
                graph.apply_batch(in.stream[step].events);
                ++step;
            }
        }
    };

    bool ok = true;
    const auto &checkpoints = result.timelines.front().checkpoints;
    for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        advance_to(checkpoints[k].time);
        for (std::size_t f = 0; f < filters.size(); ++f) {
            const auto &z = result.timelines[f].checkpoints[k].embedding;
            const auto &s = filters[f];
            if (against_oracle) {
                const auto exact = dense_propagation(graph, s, in.features.matrix.topRows(z.rows()));
                const auto rep = verify_error_bound(z, exact, graph.degrees(), s, scale);
                std::printf("%s t=%lld %s max |err|/bound %.4f (node %zu, column %zu)\n",
                            rep.passed() ? "ok  " : "FAIL",
                            static_cast<long long>(checkpoints[k].time), s.tag().c_str(),
                            rep.max_violation_ratio, rep.node, rep.column);
                ok = ok && rep.passed();
            } else {
                // without the oracle: check convergence of a from-scratch push
                double worst = 0.0;
                for (Eigen::Index c = 0; c < z.cols(); ++c) {
                    auto st = init_state(graph, s,
                                         in.features.column(static_cast<std::size_t>(c))
                                             .first(static_cast<std::size_t>(z.rows())));
                    push_until_converged(graph, s, st);
                    const Eigen::MatrixXd scratch =
                        Eigen::Map<const Eigen::VectorXd>(st.estimate.data(), z.rows());
                    const auto rep =
                        verify_error_bound(z.col(c), scratch, graph.degrees(), s, 2.0 * scale);
                    worst = std::max(worst, rep.max_violation_ratio);
                }
                std::printf("%s t=%lld %s max |incremental-scratch|/(2 bound) %.4f\n",
                            worst <= 1.0 ? "ok  " : "FAIL",
                            static_cast<long long>(checkpoints[k].time), s.tag().c_str(), worst);
                ok = ok && worst <= 1.0;
            }
        }
    }
    std::printf("%s\n", ok ? "verification passed" : "verification FAILED");
    if (!ok) {
        return kData;
    }
    return budget_status(result.report);
}

int cmd_export(const std::string &input, const std::string &output, const std::string &format) {
    const auto tl = import_timeline(fs::path(input));
    const auto fmt = format == "tsv"   ? ExportFormat::Tsv
                     : format == "f32" ? ExportFormat::Binary32
                                       : ExportFormat::Binary64;
    export_timeline(tl, fs::path(output), fmt);
    std::cout << "wrote " << output << " (" << tl.checkpoints.size() << " checkpoints, "
              << tl.schedule_tag() << ")\n";
    return kOk;
}

int cmd_diff(const std::string &from, const std::string &to) {
    const auto prev = WeightedDynamicGraph::from_edges(parse_edge_list(fs::path(from)));
    const auto next = parse_edge_list(fs::path(to));
    const auto diff = diff_snapshots(prev, next);
    std::cout << "# nodes " << diff.nodes_before << " -> " << diff.nodes_after << ", "
              << diff.edges.size() << " edge changes, " << diff.affected.size()
              << " affected nodes\n";
    std::cout << "# u\tv\tweight_before\tweight_after\n";
    for (const auto &e : diff.edges) {
        std::cout << e.u << '\t' << e.v << '\t' << e.weight_before << '\t' << e.weight_after
                  << '\n';
    }
    std::cout << "# node\tdegree_before\tdegree_after\n";
    for (const auto &nd : diff.affected) {
        std::cout << nd.node << '\t' << nd.degree_before << '\t'
                  << nd.degree_before + nd.degree_delta << '\n';
    }
    return kOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"dynaprop: feature propagation over dynamic graphs"};
    app.require_subcommand(1);

    CommonArgs prop_args;
    OutArgs prop_out;
    auto *propagate = app.add_subcommand("propagate", "run a whole timeline and export embeddings");
    add_common(propagate, prop_args);
    add_out(propagate, prop_out);
    propagate->add_option("--events", prop_args.events, "event stream (t op u v w)");
    propagate->add_option("--snapshots", prop_args.snapshots, "directory of snapshot edge lists");

    CommonArgs stream_args;
    OutArgs stream_out;
    auto *stream = app.add_subcommand("stream", "consume events batch by batch (stdin by default)");
    add_common(stream, stream_args);
    add_out(stream, stream_out);
    stream->add_option("--events", stream_args.events, "event stream file, '-' for stdin");
    stream->add_option("--nodes", stream_args.nodes, "node capacity for random features");

    CommonArgs verify_args;
    bool against_oracle = false;
    double bound_scale = 1.0;
    auto *verify = app.add_subcommand("verify", "check checkpoints against the error bound");
    add_common(verify, verify_args);
    verify->add_option("--events", verify_args.events, "event stream (t op u v w)");
    verify->add_option("--snapshots", verify_args.snapshots, "directory of snapshot edge lists");
    verify->add_flag("--against-oracle", against_oracle,
                     "compare with the dense oracle (small graphs only)");
    verify->add_option("--bound-scale", bound_scale, "multiply the allowed error")
        ->capture_default_str();

    std::string export_in;
    std::string export_out;
    std::string export_format = "tsv";
    auto *exp = app.add_subcommand("export", "convert an embedding file");
    exp->add_option("input", export_in, "embedding file (.dpemb)")->required();
    exp->add_option("--out", export_out, "output file")->required();
    exp->add_option("--format", export_format, "tsv, f32 or f64")
        ->check(CLI::IsMember({"tsv", "f32", "f64"}))
        ->capture_default_str();

    std::string diff_from;
    std::string diff_to;
    auto *diff = app.add_subcommand("diff", "show the change between two snapshot edge lists");
    diff->add_option("from", diff_from, "earlier edge list")->required();
    diff->add_option("to", diff_to, "later edge list")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*propagate) {
            return cmd_propagate(prop_args, prop_out);
        }
        if (*stream) {
            return cmd_stream(stream_args, stream_out);
        }
        if (*verify) {
            return cmd_verify(verify_args, against_oracle, bound_scale);
        }
        if (*exp) {
            return cmd_export(export_in, export_out, export_format);
        }
        if (*diff) {
            return cmd_diff(diff_from, diff_to);
        }
    } catch (const ConfigError &e) {
        std::cerr << "dynaprop: " << e.what() << "\n";
        return kUsage;
    } catch (const UsageError &e) {
        std::cerr << "dynaprop: " << e.what() << "\n";
        return kUsage;
    } catch (const DataError &e) {
        std::cerr << "dynaprop: " << e.what() << "\n";
        return kData;
    } catch (const GraphError &e) {
        std::cerr << "dynaprop: " << e.what() << "\n";
        return kData;
    } catch (const std::length_error &e) {
        std::cerr << "dynaprop: " << e.what() << "\n";
        return kData;
    } catch (const fs::filesystem_error &e) {
        std::cerr << "dynaprop: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}
