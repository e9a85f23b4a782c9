#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mfchaos {

struct AssignmentResult {
  std::vector<std::size_t> column_of_row;
  double total_cost = 0.0;
};

/// Minimum-cost perfect matching for a dense n x n row-major cost matrix
/// (Hungarian method with potentials, O(n^3)).
AssignmentResult solve_assignment(std::span<const double> cost, std::size_t n);

}  // namespace mfchaos
