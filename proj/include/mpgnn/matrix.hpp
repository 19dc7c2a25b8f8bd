#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace mpgnn {

/// Dense row-major matrix of doubles. Rows are exposed as spans; this is the
/// common currency for latent positions (n x d), weight matrices (n x n) and
/// signals (n x d_l).
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

  private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

inline double linf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double linf_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("linf_diff: size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) m = std::max(m, linf_diff(a.row(i), b.row(i)));
    return m;
}

/// Pairwise (cascade) summation of `count` vector-valued terms of dimension
/// `dim` into `out`. `term(k, dst)` must overwrite dst[0..dim) with the k-th
/// term. The summation tree depends only on `count`, so for a fixed term
/// order the result is reproducible, and reordering terms perturbs the sum
/// by at most O(log n) ulps of the total.
template <class TermFn>
void pairwise_sum(std::size_t count, std::size_t dim, double* out, TermFn&& term) {
    std::fill(out, out + dim, 0.0);
    if (count == 0 || dim == 0) return;
    const int max_levels = std::bit_width(count) + 1;
    std::vector<double> partials(static_cast<std::size_t>(max_levels) * dim, 0.0);
    std::vector<double> cur(dim);
    std::uint64_t occupied = 0;
    for (std::size_t k = 0; k < count; ++k) {
        term(k, cur.data());
        int level = 0;
        while (occupied & (1ull << level)) {
            const double* p = partials.data() + static_cast<std::size_t>(level) * dim;
            for (std::size_t d = 0; d < dim; ++d) cur[d] += p[d];
            occupied &= ~(1ull << level);
            ++level;
        }
        std::copy(cur.begin(), cur.end(),
                  partials.begin() + static_cast<std::size_t>(level) * dim);
        occupied |= (1ull << level);
    }
    for (int level = 0; level < max_levels; ++level) {
        if (occupied & (1ull << level)) {
            const double* p = partials.data() + static_cast<std::size_t>(level) * dim;
            for (std::size_t d = 0; d < dim; ++d) out[d] += p[d];
        }
    }
}

}  // namespace mpgnn
