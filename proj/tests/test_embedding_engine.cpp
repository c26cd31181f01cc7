#include "dynaprop/embedding_engine.hpp"
#include "dynaprop/exact_oracle.hpp"
#include "dynaprop/io.hpp"
#include "test_support.hpp"

#include "doctest.h"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>

using namespace dynaprop;

namespace {

std::filesystem::path temp_file(const std::string &name) {
    return std::filesystem::temp_directory_path() / ("dynaprop_test_" + name);
}

std::vector<EventBatch> random_stream(WeightedDynamicGraph graph, std::size_t batches,
                                      std::size_t per_batch, std::mt19937_64 &rng) {
    std::vector<EventBatch> stream;
    for (std::size_t b = 0; b < batches; ++b) {
        EventBatch batch{static_cast<Timestamp>(b + 1), {}};
        for (std::size_t e = 0; e < per_batch; ++e) {
            batch.events.push_back(testing::random_event(graph, 0.7, rng, batch.time));
            graph.apply_event(batch.events.back());
        }
        stream.push_back(std::move(batch));
    }
    return stream;
}

// Replays the stream on a copy and compares every checkpoint with the oracle.
void check_timeline(WeightedDynamicGraph graph, const FeatureStore &features,
                    std::span<const EventBatch> stream, const EmbeddingTimeline &timeline,
                    const FilterSchedule &s) {
    REQUIRE(timeline.checkpoints.size() == stream.size() + 1);
    for (std::size_t k = 0; k < timeline.checkpoints.size(); ++k) {
        if (k > 0) {
            graph.apply_batch(stream[k - 1].events);
        }
        const auto n = static_cast<Eigen::Index>(graph.node_count());
        const auto exact = dense_propagation(graph, s, features.matrix.topRows(n));
        const auto rep =
            verify_error_bound(timeline.checkpoints[k].embedding, exact, graph.degrees(), s);
        CHECK(rep.passed());
    }
}

} // namespace

TEST_CASE("empty stream gives the initial embedding only") {
    std::mt19937_64 rng(1);
    const auto g = testing::random_graph(20, 20, rng);
    const auto features = FeatureStore::random(20, 3, 42);
    const auto s = ppr_schedule(0.2, 0.5, 1e-7);
    const auto run = run_timeline(g, features, std::span<const EventBatch>{}, {s});
    REQUIRE(run.timelines.size() == 1);
    REQUIRE(run.timelines[0].checkpoints.size() == 1);
    CHECK(run.report.converged);
    const auto exact = dense_propagation(g, s, features.matrix);
    CHECK(verify_error_bound(run.timelines[0].checkpoints[0].embedding, exact, g.degrees(), s)
              .passed());
    CHECK_THROWS_AS(delta_sequence(run.timelines[0]), std::invalid_argument);
}

TEST_CASE("five-node event stream") {
    const auto stream =
        parse_event_stream(std::filesystem::path(DYNAPROP_TEST_DATA) / "example_events.tsv");
    REQUIRE(stream.size() == 5);
    const auto features = FeatureStore::random(5, 4, 7);
    const std::vector filters{ppr_schedule(0.2, 0.5, 1e-8), highpass_schedule(0.2, 0.5, 1e-8)};
    const auto run = run_timeline(WeightedDynamicGraph(5), features, stream, filters);
    REQUIRE(run.timelines.size() == 2);
    for (std::size_t f = 0; f < 2; ++f) {
        CHECK(run.timelines[f].checkpoints.size() == 6);
        check_timeline(WeightedDynamicGraph(5), features, stream, run.timelines[f], filters[f]);
    }
    // before any edge every node is isolated: Z_0 = gamma0 X exactly
    CHECK(run.timelines[0].checkpoints[0].embedding == 0.2 * features.matrix);
    CHECK(run.timelines[0].checkpoints.back().time == 5);
}

TEST_CASE("snapshot sequence matches the event stream") {
    const auto snapshots =
        parse_snapshots(std::filesystem::path(DYNAPROP_TEST_DATA) / "example_snapshots");
    REQUIRE(snapshots.size() == 5);
    // lexicographic position 0.. is the time; shift to 1..5 after the initial G_0
    std::vector<Snapshot> shifted = snapshots;
    for (auto &snap : shifted) {
        snap.time += 1;
    }
    const auto features = FeatureStore::random(5, 2, 3);
    const auto s = ppr_schedule(0.2, 0.5, 1e-8);
    const auto dtdg = run_timeline(WeightedDynamicGraph(5), features, shifted, {s});
    const auto stream =
        parse_event_stream(std::filesystem::path(DYNAPROP_TEST_DATA) / "example_events.tsv");
    const auto ctdg = run_timeline(WeightedDynamicGraph(5), features, stream, {s});
    REQUIRE(dtdg.timelines[0].checkpoints.size() == ctdg.timelines[0].checkpoints.size());
    auto g = WeightedDynamicGraph(5);
    for (std::size_t k = 0; k < ctdg.timelines[0].checkpoints.size(); ++k) {
        if (k > 0) {
            g.apply_batch(stream[k - 1].events);
        }
        CHECK(verify_error_bound(dtdg.timelines[0].checkpoints[k].embedding,
                                 ctdg.timelines[0].checkpoints[k].embedding, g.degrees(), s, 2.0)
                  .passed());
    }
    // the fourth snapshot no longer holds (v3, v4)
    const auto g4 = WeightedDynamicGraph::from_edges(snapshots[3].edges, 5);
    CHECK_FALSE(g4.has_edge(2, 3));
}

TEST_CASE("two snapshots") {
    const auto features = FeatureStore::random(3, 1, 5);
    const auto s = highpass_schedule(0.2, 0.5, 1e-9);
    const std::vector<Snapshot> snaps{{1, {{0, 1, 1.0}}}, {2, {{0, 1, 1.0}, {1, 2, 1.0}}}};
    const auto run = run_timeline(WeightedDynamicGraph(3), features, snaps, {s});
    REQUIRE(run.timelines[0].checkpoints.size() == 3);
    const auto g = WeightedDynamicGraph::from_edges(snaps[1].edges, 3);
    const auto exact = dense_propagation(g, s, features.matrix);
    CHECK(verify_error_bound(run.timelines[0].checkpoints[2].embedding, exact, g.degrees(), s)
              .passed());
}

TEST_CASE("property: random streams against the oracle, lazy and eager") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t n = 30 + rng() % 40;
        const auto g = testing::random_graph(n, n, rng);
        const auto stream = random_stream(g, 8, 6, rng);
        const auto features = FeatureStore::random(n, 3, 1000 + static_cast<std::uint64_t>(trial));
        const double beta = std::array{0.0, 0.5, 1.0}[trial % 3];
        const std::vector filters{ppr_schedule(0.2, beta, 1e-7), highpass_schedule(0.2, beta, 1e-7)};
        EngineOptions options;
        options.eager = trial % 2 == 0;
        const auto run = run_timeline(g, features, stream, filters, {}, options);
        CHECK(run.report.converged);
        for (std::size_t f = 0; f < filters.size(); ++f) {
            check_timeline(g, features, stream, run.timelines[f], filters[f]);
        }
    }
}

TEST_CASE("nodes appear on first use") {
    const auto features = FeatureStore::random(6, 2, 9);
    const auto s = ppr_schedule(0.2, 0.5, 1e-9);
    DynamicPropagator engine(WeightedDynamicGraph(2), features, {s});
    engine.initialize(0);
    const std::vector<GraphEvent> batch{{1, EventKind::AddEdge, 1, 4, 1.0}};
    engine.apply_events(1, batch, true);
    CHECK(engine.graph().node_count() == 5);
    const auto &cps = engine.timelines()[0].checkpoints;
    REQUIRE(cps.size() == 2);
    CHECK(cps[0].embedding.rows() == 2);
    CHECK(cps[1].embedding.rows() == 5);
    // node 3 is registered but isolated
    CHECK(cps[1].embedding(3, 1) == 0.2 * features.matrix(3, 1));

    const auto deltas = delta_sequence(engine.timelines()[0]);
    REQUIRE(deltas.deltas.size() == 1);
    CHECK(deltas.deltas[0].rows() == 5);
    CHECK(deltas.deltas[0](3, 0) == cps[1].embedding(3, 0));
    CHECK(deltas.deltas[0](0, 0) == cps[1].embedding(0, 0) - cps[0].embedding(0, 0));

    const std::vector<GraphEvent> too_far{{2, EventKind::AddEdge, 0, 6, 1.0}};
    CHECK_THROWS_AS(engine.apply_events(2, too_far, true), DataError);
}

TEST_CASE("engine input errors") {
    const auto features = FeatureStore::random(4, 1, 1);
    const auto s = ppr_schedule();
    CHECK_THROWS_AS(DynamicPropagator(WeightedDynamicGraph(5), features, {s}), DataError);
    CHECK_THROWS_AS(DynamicPropagator(WeightedDynamicGraph(2), features, {}), std::invalid_argument);

    DynamicPropagator engine(WeightedDynamicGraph(4), features, {s});
    engine.initialize(0);
    const std::vector<GraphEvent> ok{{3, EventKind::AddEdge, 0, 1, 1.0}};
    engine.apply_events(3, ok, false);
    CHECK_THROWS_AS(engine.apply_events(2, ok, false), DataError);
    CHECK_THROWS_AS(engine.apply_events(3, ok, false), DataError);
    const std::vector<GraphEvent> missing{{4, EventKind::DeleteEdge, 2, 3, 1.0}};
    CHECK_THROWS_AS(engine.apply_events(4, missing, false), DataError);
    CHECK(engine.graph().edge_count() == 1);

    const std::vector<EventBatch> stream{{1, ok}};
    CHECK_THROWS_AS(run_timeline(WeightedDynamicGraph(4), features, stream, {s}, {0}),
                    std::invalid_argument);
}

TEST_CASE("checkpoint stride") {
    std::mt19937_64 rng(3);
    const auto g = testing::random_graph(20, 10, rng);
    const auto stream = random_stream(g, 7, 3, rng);
    const auto features = FeatureStore::random(20, 1, 2);
    const auto run = run_timeline(g, features, stream, {ppr_schedule()}, {3});
    const auto &cps = run.timelines[0].checkpoints;
    REQUIRE(cps.size() == 4);
    CHECK(cps[1].time == 3);
    CHECK(cps[2].time == 6);
    CHECK(cps[3].time == 7);
}

TEST_CASE("concatenation and filter metadata") {
    std::mt19937_64 rng(8);
    const auto g = testing::random_graph(15, 10, rng);
    const auto stream = random_stream(g, 3, 2, rng);
    const auto features = FeatureStore::random(15, 3, 11);
    const std::vector filters{ppr_schedule(0.2, 0.5, 1e-6), highpass_schedule(0.2, 0.5, 1e-6)};
    const auto run = run_timeline(g, features, stream, filters);
    const auto both = concat_filters(run.timelines);
    CHECK(both.width() == 6);
    CHECK(both.schedule_tag() == "ppr+highpass");
    CHECK(both.feature_seed == 11u);
    for (std::size_t k = 0; k < both.checkpoints.size(); ++k) {
        CHECK(both.checkpoints[k].embedding.leftCols(3) == run.timelines[0].checkpoints[k].embedding);
        CHECK(both.checkpoints[k].embedding.rightCols(3) == run.timelines[1].checkpoints[k].embedding);
    }

    auto shorter = run.timelines[1];
    shorter.checkpoints.pop_back();
    const std::vector bad{run.timelines[0], shorter};
    CHECK_THROWS_AS(concat_filters(bad), DataError);
}

TEST_CASE("export round trip") {
    std::mt19937_64 rng(21);
    const auto g = testing::random_graph(12, 8, rng);
    auto stream = random_stream(g, 3, 2, rng);
    stream[1].events.push_back({2, EventKind::AddEdge, 3, 13, 1.0}); // grows to 14 nodes
    const auto features = FeatureStore::random(14, 2, 77);
    const auto run = run_timeline(g, features, stream, {ppr_schedule(0.2, 0.5, 1e-6)});
    const auto &tl = run.timelines[0];

    const auto bin = temp_file("rt64.dpemb");
    export_timeline(tl, bin);
    const auto back = import_timeline(bin);
    REQUIRE(back.checkpoints.size() == tl.checkpoints.size());
    for (std::size_t k = 0; k < tl.checkpoints.size(); ++k) {
        CHECK(back.checkpoints[k].time == tl.checkpoints[k].time);
        CHECK(back.checkpoints[k].embedding == tl.checkpoints[k].embedding);
    }
    CHECK(back.checkpoints[0].embedding.rows() == 12);
    CHECK(back.checkpoints.back().embedding.rows() == 14);
    CHECK(back.feature_seed == 77u);
    REQUIRE(back.filters.size() == 1);
    CHECK(back.filters[0].kind == FilterKind::Ppr);
    CHECK(back.filters[0].gamma == tl.filters[0].gamma);
    CHECK(back.filters[0].r_max == 1e-6);

    const auto f32 = temp_file("rt32.dpemb");
    export_timeline(tl, f32, ExportFormat::Binary32);
    const auto single = import_timeline(f32);
    for (std::size_t k = 0; k < tl.checkpoints.size(); ++k) {
        CHECK((single.checkpoints[k].embedding - tl.checkpoints[k].embedding)
                  .lpNorm<Eigen::Infinity>() <= 1e-6);
    }
    CHECK(std::filesystem::file_size(f32) < std::filesystem::file_size(bin));

    const auto tsv = temp_file("rt.tsv");
    export_timeline(tl, tsv, ExportFormat::Tsv);
    std::ifstream in(tsv);
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("# dynaprop embedding v1 n=14 d=2 t=4", 0) == 0);
    CHECK_THROWS_AS(import_timeline(tsv), DataError);

    {
        std::ofstream truncated(bin, std::ios::binary | std::ios::trunc);
        truncated.write("DPEMBED\0\1\0\0\0", 12);
    }
    CHECK_THROWS_AS(import_timeline(bin), DataError);
    std::filesystem::remove(bin);
    std::filesystem::remove(f32);
    std::filesystem::remove(tsv);
}

TEST_CASE("feature columns are independent") {
    std::mt19937_64 rng(5);
    const auto g = testing::random_graph(25, 25, rng);
    const auto stream = random_stream(g, 4, 4, rng);
    const auto features = FeatureStore::random(25, 4, 3);
    FeatureStore permuted = features;
    const std::array perm{2, 0, 3, 1};
    for (int s = 0; s < 4; ++s) {
        permuted.matrix.col(s) = features.matrix.col(perm[static_cast<std::size_t>(s)]);
    }
    const auto s = highpass_schedule();
    const auto a = run_timeline(g, features, stream, {s});
    const auto b = run_timeline(g, permuted, stream, {s});
    for (std::size_t k = 0; k < a.timelines[0].checkpoints.size(); ++k) {
        for (int c = 0; c < 4; ++c) {
            CHECK(b.timelines[0].checkpoints[k].embedding.col(c) ==
                  a.timelines[0].checkpoints[k].embedding.col(perm[static_cast<std::size_t>(c)]));
        }
    }
}

TEST_CASE("worker count does not change the result") {
    std::mt19937_64 rng(6);
    const auto g = testing::random_graph(60, 80, rng);
    const auto stream = random_stream(g, 5, 10, rng);
    const auto features = FeatureStore::random(60, 8, 4);
    const std::vector filters{ppr_schedule(), highpass_schedule()};
    EngineOptions one;
    EngineOptions four;
    four.workers = 4;
    const auto a = run_timeline(g, features, stream, filters, {}, one);
    const auto b = run_timeline(g, features, stream, filters, {}, four);
    for (std::size_t f = 0; f < 2; ++f) {
        for (std::size_t k = 0; k < a.timelines[f].checkpoints.size(); ++k) {
            CHECK(a.timelines[f].checkpoints[k].embedding == b.timelines[f].checkpoints[k].embedding);
        }
    }
}

TEST_CASE("parallel_for") {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), 7, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::count(hits.begin(), hits.end(), 1) == 100);

    std::atomic<int> calls{0};
    parallel_for(0, 4, [&](std::size_t) { ++calls; });
    CHECK(calls == 0);

    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](std::size_t i) {
                                     if (i == 5) {
                                         throw std::runtime_error("boom");
                                     }
                                 }),
                    std::runtime_error);
}

TEST_CASE("random features are reproducible") {
    const auto a = FeatureStore::random(10, 3, 123);
    const auto b = FeatureStore::random(10, 3, 123);
    const auto c = FeatureStore::random(10, 3, 124);
    CHECK(a.matrix == b.matrix);
    CHECK(a.matrix != c.matrix);
    CHECK(a.matrix.maxCoeff() < 0.5);
    CHECK(a.matrix.minCoeff() >= -0.5);
    CHECK_THROWS_AS((void)a.column(3), std::out_of_range);
}
