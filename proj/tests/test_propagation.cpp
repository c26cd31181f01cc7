#include "dynaprop/exact_oracle.hpp"
#include "dynaprop/propagation.hpp"
#include "test_support.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace dynaprop;

namespace {

WeightedDynamicGraph two_nodes() {
    WeightedDynamicGraph g(2);
    g.add_edge(0, 1, 1.0);
    return g;
}

} // namespace

TEST_CASE("init_state") {
    const auto g = two_nodes();
    const auto s = ppr_schedule(0.2, 0.5, 1e-6);

    const std::vector<double> zero{0.0, 0.0};
    auto st = init_state(g, s, zero);
    CHECK(st.frontier.empty());
    CHECK(push_until_converged(g, s, st).pushes == 0);

    const std::vector<double> e0{1.0, 0.0};
    st = init_state(g, s, e0);
    REQUIRE(st.frontier.size() == 1);
    CHECK(st.frontier.front() == 0);
    CHECK(st.residual[0] == 1.0);
    CHECK(st.estimate[0] == 0.0);

    const std::vector<double> small{1e-6, -1e-6};
    st = init_state(g, s, small);
    CHECK(st.frontier.empty());
    CHECK(is_converged(g, s, st));

    const std::vector<double> wrong{1.0};
    CHECK_THROWS_AS(init_state(g, s, wrong), std::invalid_argument);
}

TEST_CASE("push_node on a single edge") {
    const auto g = two_nodes();
    const auto s = ppr_schedule(0.2, 0.5, 1e-6);
    const std::vector<double> x{1.0, 0.0};
    auto st = init_state(g, s, x);
    push_node(g, s, st, 0);
    CHECK(st.estimate[0] == doctest::Approx(0.2));
    CHECK(st.estimate[1] == 0.0);
    CHECK(st.residual[0] == 0.0);
    CHECK(st.residual[1] == doctest::Approx(0.8));
}

TEST_CASE("push_node on a star center") {
    WeightedDynamicGraph g(4);
    for (NodeId leaf = 1; leaf <= 3; ++leaf) {
        g.add_edge(0, leaf, 1.0);
    }
    const auto s = ppr_schedule(0.2, 0.5, 1e-6);
    const std::vector<double> x{1.0, 0.0, 0.0, 0.0};
    auto st = init_state(g, s, x);
    push_node(g, s, st, 0);
    for (NodeId leaf = 1; leaf <= 3; ++leaf) {
        CHECK(st.residual[leaf] == doctest::Approx(s.gamma / std::sqrt(3.0)).epsilon(1e-14));
    }
}

TEST_CASE("push is an affine update at the pushed node") {
    std::mt19937_64 rng(3);
    const auto g = testing::random_graph(15, 20, rng);
    const auto s = highpass_schedule(0.3, 0.5, 1e-6);
    const auto x = testing::random_column(15, rng);
    auto st = init_state(g, s, x);
    const auto before = st;
    push_node(g, s, st, 4);
    // undo at node 4: restore its residual and subtract the estimate gain
    st.residual[4] = before.residual[4];
    st.estimate[4] -= s.gamma0 * before.residual[4];
    CHECK(st.estimate[4] == before.estimate[4]);
    CHECK(st.residual[4] == before.residual[4]);
}

TEST_CASE("push on a zero-degree node is rejected") {
    WeightedDynamicGraph g(3);
    g.add_edge(0, 1, 1.0);
    const auto s = ppr_schedule();
    const std::vector<double> x{0.0, 0.0, 1.0};
    auto st = init_state(g, s, x);
    CHECK(st.frontier.empty());
    CHECK_THROWS_AS(push_node(g, s, st, 2), std::invalid_argument);
}

TEST_CASE("converged values on a single edge") {
    const auto g = two_nodes();
    const std::vector<double> x{1.0, 0.0};

    // pi = 0.2 sum 0.8^k P^k e0 with P = [[0,1],[1,0]]: even k -> node 0
    const double low0 = 0.2 / (1.0 - 0.64);
    const double low1 = 0.2 * 0.8 / (1.0 - 0.64);
    auto ppr = ppr_schedule(0.2, 0.5, 1e-9);
    auto st = init_state(g, ppr, x);
    const auto rep = push_until_converged(g, ppr, st);
    CHECK(rep.converged);
    CHECK(std::abs(st.estimate[0] - 5.0 / 9.0) < 1e-8);
    CHECK(std::abs(st.estimate[1] - 4.0 / 9.0) < 1e-8);
    CHECK(low0 == doctest::Approx(5.0 / 9.0));
    CHECK(low1 == doctest::Approx(4.0 / 9.0));

    auto hp = highpass_schedule(0.2, 0.5, 1e-9);
    st = init_state(g, hp, x);
    push_until_converged(g, hp, st);
    CHECK(std::abs(st.estimate[0] - 0.2 / 0.36) < 1e-8);
    CHECK(std::abs(st.estimate[1] - 0.2 * -0.8 / 0.36) < 1e-8);

    // threshold above every |x(i)| / d(i)^(1-beta): nothing moves
    auto loose = ppr_schedule(0.2, 0.5, 1.0);
    st = init_state(g, loose, x);
    CHECK(push_until_converged(g, loose, st).pushes == 0);
    CHECK(st.estimate[0] == 0.0);
}

TEST_CASE("isolated nodes are settled exactly") {
    WeightedDynamicGraph g(3);
    g.add_edge(0, 1, 1.0);
    const auto s = ppr_schedule(0.2, 0.5, 1e-8);
    const std::vector<double> x{0.5, -0.25, 0.75};
    auto st = init_state(g, s, x);
    const auto rep = push_until_converged(g, s, st);
    CHECK(rep.settled == 1);
    CHECK(st.estimate[2] == s.gamma0 * 0.75);
    CHECK(st.residual[2] == 0.0);
    CHECK(verify_invariant(g, s, st, x) < 1e-15);
}

TEST_CASE("work budget exhaustion is reported") {
    std::mt19937_64 rng(11);
    const auto g = testing::random_graph(40, 60, rng);
    const auto s = ppr_schedule(0.2, 0.5, 1e-10);
    const auto x = testing::random_column(40, rng);
    auto st = init_state(g, s, x);
    const auto rep = push_until_converged(g, s, st, {5, FrontierOrder::Fifo});
    CHECK_FALSE(rep.converged);
    CHECK(rep.pushes == 5);
    CHECK(rep.remaining > 0);
    CHECK(verify_invariant(g, s, st, x) < 1e-12);
    // resuming finishes the job
    CHECK(push_until_converged(g, s, st).converged);
    CHECK(is_converged(g, s, st));
}

TEST_CASE("property: invariant after init, every push, and convergence") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 24; ++trial) {
        const std::size_t n = 5 + rng() % 196;
        const auto g = testing::random_graph(n, n + rng() % (2 * n), rng);
        const double beta = std::array{0.0, 0.5, 1.0}[trial % 3];
        const auto s = trial % 2 ? highpass_schedule(0.2, beta, 1e-6) : ppr_schedule(0.2, beta, 1e-6);
        const auto x = testing::random_column(n, rng);
        const double scale = testing::inf_norm(x);
        auto st = init_state(g, s, x);
        CHECK(verify_invariant(g, s, st, x) == 0.0);

        for (int k = 0; k < 50 && !st.frontier.empty(); ++k) {
            const NodeId node = st.frontier.front();
            st.frontier.pop_front();
            st.in_frontier[node] = 0;
            push_node(g, s, st, node);
            CHECK(verify_invariant(g, s, st, x) <= 1e-12 * scale);
        }
        const auto rep = push_until_converged(g, s, st);
        CHECK(rep.converged);
        CHECK(is_converged(g, s, st));
        CHECK(verify_invariant(g, s, st, x) <= 1e-9 * scale);
    }
}

TEST_CASE("property: converged estimates are within the error bound of the oracle") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 18; ++trial) {
        const std::size_t n = 10 + rng() % 91;
        const std::size_t d = 1 + rng() % 8;
        const auto g = testing::random_graph(n, n, rng);
        const double beta = std::array{0.0, 0.5, 1.0}[trial % 3];
        const auto s = trial % 2 ? highpass_schedule(0.2, beta, 1e-5) : ppr_schedule(0.2, beta, 1e-5);
        Eigen::MatrixXd x = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(n),
                                                    static_cast<Eigen::Index>(d));
        Eigen::MatrixXd approx(x.rows(), x.cols());
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            std::span<const double> col(x.col(c).data(), n);
            auto st = init_state(g, s, col);
            push_until_converged(g, s, st);
            for (std::size_t i = 0; i < n; ++i) {
                approx(static_cast<Eigen::Index>(i), c) = st.estimate[i];
            }
        }
        const auto exact = dense_propagation(g, s, x);
        const auto rep = verify_error_bound(approx, exact, g.degrees(), s);
        CHECK(rep.passed());
    }
}

TEST_CASE("property: FIFO and LIFO both meet the bound") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t n = 60;
        const auto g = testing::random_graph(n, 90, rng);
        const auto s = trial % 2 ? highpass_schedule(0.2, 0.5, 1e-6) : ppr_schedule(0.2, 0.5, 1e-6);
        const auto x = testing::random_column(n, rng);
        const auto exact = dense_propagation(g, s, testing::to_matrix(x));
        for (auto order : {FrontierOrder::Fifo, FrontierOrder::Lifo}) {
            auto st = init_state(g, s, x);
            CHECK(push_until_converged(g, s, st, {kDefaultWorkBudget, order}).converged);
            const auto rep =
                verify_error_bound(testing::to_matrix(st.estimate), exact, g.degrees(), s);
            CHECK(rep.passed());
        }
    }
}

TEST_CASE("property: halving r_max never increases the normalized error") {
    std::mt19937_64 rng(17);
    const std::size_t n = 80;
    const auto g = testing::random_graph(n, 120, rng);
    const auto x = testing::random_column(n, rng);
    for (double beta : {0.0, 0.5, 1.0}) {
        const auto ref = ppr_schedule(0.2, beta, 1e-6);
        const auto exact = dense_propagation(g, ref, testing::to_matrix(x), 1e-15);
        double previous = std::numeric_limits<double>::infinity();
        for (double r_max = 1e-2; r_max >= 1e-6; r_max /= 2.0) {
            const auto s = ppr_schedule(0.2, beta, r_max);
            auto st = init_state(g, s, x);
            push_until_converged(g, s, st);
            double worst = 0.0;
            for (NodeId i = 0; i < n; ++i) {
                worst = std::max(worst, std::abs(st.estimate[i] - exact(i, 0)) /
                                            std::pow(g.degree(i), 1.0 - beta));
            }
            CHECK(worst <= previous);
            previous = worst;
        }
    }
}
