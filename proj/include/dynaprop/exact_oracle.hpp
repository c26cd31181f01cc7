#pragma once

#include "dynaprop/filter_schedule.hpp"
#include "dynaprop/graph_store.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>

namespace dynaprop {

inline constexpr std::size_t kOracleMaxNodes = 5000;

/// Dense reference for pi = sum_k gamma0 gamma^k P^k X with
/// P = D^-beta A D^(beta-1). Rows and columns of P for zero-degree nodes
/// are zero. Terms are accumulated until the infinity norm of the next term
/// drops below `tail_tol`.
///
/// Throws std::length_error above kOracleMaxNodes and std::invalid_argument
/// on shape mismatch.
Eigen::MatrixXd dense_propagation(const WeightedDynamicGraph &graph,
                                  const FilterSchedule &schedule, const Eigen::MatrixXd &features,
                                  double tail_tol);

/// Default truncation: r_max * 1e-3.
Eigen::MatrixXd dense_propagation(const WeightedDynamicGraph &graph,
                                  const FilterSchedule &schedule, const Eigen::MatrixXd &features);

/// Dense P for the current graph.
Eigen::MatrixXd propagation_matrix(const WeightedDynamicGraph &graph, double beta);

struct BoundReport {
    double max_violation_ratio = 0.0;
    std::size_t node = 0;
    std::size_t column = 0;

    [[nodiscard]] bool passed() const noexcept { return max_violation_ratio <= 1.0; }
};

/// |approx - exact| / error_bound(schedule, d(i)) maximised over all entries.
/// A zero bound with any nonzero difference yields +inf.
BoundReport verify_error_bound(const Eigen::MatrixXd &approx, const Eigen::MatrixXd &exact,
                               std::span<const double> degrees, const FilterSchedule &schedule,
                               double bound_scale = 1.0);

} // namespace dynaprop
