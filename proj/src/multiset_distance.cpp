#include "mpgnn/multiset_distance.hpp"

#include <algorithm>
#include <stdexcept>

namespace mpgnn {

namespace {

/// Kuhn augmenting-path matching on the bipartite graph of pairs whose cost
/// does not exceed the threshold. Returns true iff a perfect matching exists.
class ThresholdMatcher {
  public:
    explicit ThresholdMatcher(const Matrix& cost) : cost_(cost), n_(cost.rows()) {}

    bool feasible(double threshold) {
        match_right_.assign(n_, kUnmatched);
        for (std::size_t i = 0; i < n_; ++i) {
            visited_.assign(n_, false);
            if (!augment(i, threshold)) return false;
        }
        return true;
    }

  private:
    static constexpr std::size_t kUnmatched = static_cast<std::size_t>(-1);

    bool augment(std::size_t i, double threshold) {
        for (std::size_t j = 0; j < n_; ++j) {
            if (visited_[j] || cost_(i, j) > threshold) continue;
            visited_[j] = true;
            if (match_right_[j] == kUnmatched || augment(match_right_[j], threshold)) {
                match_right_[j] = i;
                return true;
            }
        }
        return false;
    }

    const Matrix& cost_;
    std::size_t n_;
    std::vector<std::size_t> match_right_;
    std::vector<bool> visited_;
};

}  // namespace

double bottleneck_assignment(const Matrix& cost) {
    if (cost.rows() == 0 || cost.rows() != cost.cols())
        throw std::invalid_argument("bottleneck_assignment: square nonempty matrix required");
    const std::size_t n = cost.rows();
    std::vector<double> values(cost.data(), cost.data() + n * n);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());

    ThresholdMatcher matcher(cost);
    std::size_t lo = 0, hi = values.size() - 1;
    if (matcher.feasible(values[lo])) return values[lo];
    // invariant: values[lo] infeasible, values[hi] feasible
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (matcher.feasible(values[mid])) hi = mid;
        else lo = mid;
    }
    return values[hi];
}

double multiset_distance(const std::vector<std::vector<double>>& m1,
                         const std::vector<std::vector<double>>& m2) {
    if (m1.empty() || m1.size() != m2.size())
        throw std::invalid_argument("multiset_distance: equal nonzero sizes required");
    const std::size_t n = m1.size();
    Matrix cost(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cost(i, j) = linf_diff(m1[i], m2[j]);
    return bottleneck_assignment(cost);
}

double multiset_distance_pairs(const std::vector<std::pair<std::vector<double>, double>>& m1,
                               const std::vector<std::pair<std::vector<double>, double>>& m2) {
    if (m1.empty() || m1.size() != m2.size())
        throw std::invalid_argument("multiset_distance_pairs: equal nonzero sizes required");
    const std::size_t n = m1.size();
    Matrix cost(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            cost(i, j) =
                linf_diff(m1[i].first, m2[j].first) + std::abs(m1[i].second - m2[j].second);
    return bottleneck_assignment(cost);
}

}  // namespace mpgnn
