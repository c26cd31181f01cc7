#include "dynaprop/exact_oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dynaprop {

namespace {

// With |gamma| < 1 the terms decay geometrically; this only trips on a
// pathologically slow schedule.
constexpr int kMaxTerms = 1'000'000;

} // namespace

Eigen::MatrixXd propagation_matrix(const WeightedDynamicGraph &graph, double beta) {
    const auto n = static_cast<Eigen::Index>(graph.node_count());
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    const auto &deg = graph.degrees();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (deg[i] == 0.0) {
            continue;
        }
        for (const auto &nb : graph.neighbors(static_cast<NodeId>(i))) {
            p(i, nb.id) = nb.weight / (std::pow(deg[i], beta) * std::pow(deg[nb.id], 1.0 - beta));
        }
    }
    return p;
}

Eigen::MatrixXd dense_propagation(const WeightedDynamicGraph &graph,
                                  const FilterSchedule &schedule, const Eigen::MatrixXd &features,
                                  double tail_tol) {
    if (graph.node_count() > kOracleMaxNodes) {
        throw std::length_error("dense oracle limited to " + std::to_string(kOracleMaxNodes) +
                                " nodes, graph has " + std::to_string(graph.node_count()));
    }
    if (static_cast<std::size_t>(features.rows()) != graph.node_count()) {
        throw std::invalid_argument("feature matrix rows do not match node count");
    }
    if (!(tail_tol > 0.0)) {
        throw std::invalid_argument("tail tolerance must be positive");
    }

    const Eigen::MatrixXd p = propagation_matrix(graph, schedule.beta);
    Eigen::MatrixXd term = schedule.gamma0 * features;
    Eigen::MatrixXd sum = term;
    for (int k = 1; k < kMaxTerms; ++k) {
        term = schedule.gamma * (p * term);
        if (term.size() == 0 || term.lpNorm<Eigen::Infinity>() < tail_tol) {
            sum += term;
            return sum;
        }
        sum += term;
    }
    throw std::runtime_error("power series did not reach the tail tolerance");
}

Eigen::MatrixXd dense_propagation(const WeightedDynamicGraph &graph,
                                  const FilterSchedule &schedule, const Eigen::MatrixXd &features) {
    return dense_propagation(graph, schedule, features, schedule.r_max * 1e-3);
}

BoundReport verify_error_bound(const Eigen::MatrixXd &approx, const Eigen::MatrixXd &exact,
                               std::span<const double> degrees, const FilterSchedule &schedule,
                               double bound_scale) {
    if (approx.rows() != exact.rows() || approx.cols() != exact.cols() ||
        static_cast<std::size_t>(approx.rows()) != degrees.size()) {
        throw std::invalid_argument("verify_error_bound: shape mismatch");
    }
    BoundReport report;
    for (Eigen::Index i = 0; i < approx.rows(); ++i) {
        const double bound = bound_scale * error_bound(schedule, degrees[i]);
        for (Eigen::Index s = 0; s < approx.cols(); ++s) {
            const double diff = std::abs(approx(i, s) - exact(i, s));
            double ratio = 0.0;
            if (diff > 0.0) {
                ratio = bound > 0.0 ? diff / bound : std::numeric_limits<double>::infinity();
            }
            if (ratio > report.max_violation_ratio) {
                report.max_violation_ratio = ratio;
                report.node = static_cast<std::size_t>(i);
                report.column = static_cast<std::size_t>(s);
            }
        }
    }
    return report;
}

} // namespace dynaprop
