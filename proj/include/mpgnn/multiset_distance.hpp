#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mpgnn/matrix.hpp"

namespace mpgnn {

/// Bottleneck assignment value of a square cost matrix: the minimum over
/// perfect matchings of the largest matched cost. Solved exactly by binary
/// searching the sorted distinct costs and testing each threshold with an
/// augmenting-path matching.
double bottleneck_assignment(const Matrix& cost);

/// Distance between equal-size multisets of vectors under the sup norm:
/// min over pairings of the largest pairwise sup-norm gap.
double multiset_distance(const std::vector<std::vector<double>>& m1,
                         const std::vector<std::vector<double>>& m2);

/// Same for multisets of (vector, scalar) pairs under
/// |y - y'|_inf + |t - t'|.
double multiset_distance_pairs(const std::vector<std::pair<std::vector<double>, double>>& m1,
                               const std::vector<std::pair<std::vector<double>, double>>& m2);

}  // namespace mpgnn
