#pragma once

#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dmsort {

/// Rows are tracks, columns detections. Forbidden cells hold kGated.
using CostMatrix = Eigen::MatrixXd;

inline constexpr double kGated = std::numeric_limits<double>::infinity();

inline bool is_gated(double c) { return c == kGated; }

struct Assignment {
    std::vector<std::pair<int, int>> matches;  // (row, col), ascending by row
    std::vector<int> unmatched_rows;
    std::vector<int> unmatched_cols;
};

/// Rectangular linear assignment. Among matchings that use only non-gated
/// cells, picks one of maximum size and, among those, of minimum total cost.
/// Throws std::invalid_argument on NaN or negative-infinite cells.
Assignment solve(const CostMatrix& c);

/// Sum of the matched cells, accumulated in row order.
double total_cost(const CostMatrix& c, const Assignment& a);

}  // namespace dmsort
