#pragma once

#include <algorithm>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "mpgnn/matrix.hpp"
#include "mpgnn/message_passing.hpp"

namespace mpgnn::detail {

/// Combines weighted messages over a neighbor index range. `weight(k)` and
/// `message(k)` address the k-th neighbor. Shared by the discrete forward
/// pass and the quadrature evaluation of the limit, so that a graph whose
/// nodes coincide with the quadrature nodes reproduces the limit tables
/// arithmetic-identically. Sums go through pairwise_sum, making the result
/// stable under neighbor reordering; ratio families share one summation
/// tree between numerator and denominator.
template <class WeightFn, class MessageFn>
void combine(AggKind kind, std::size_t count, std::size_t dim, WeightFn&& weight,
             MessageFn&& message, std::span<double> out, bool* degenerate) {
    switch (kind) {
        case AggKind::MeanConv: {
            pairwise_sum(count, dim, out.data(), [&](std::size_t k, double* dst) {
                const double w = weight(k);
                const double* m = message(k);
                for (std::size_t d = 0; d < dim; ++d) dst[d] = w * m[d];
            });
            const double inv = 1.0 / static_cast<double>(count);
            for (std::size_t d = 0; d < dim; ++d) out[d] *= inv;
            return;
        }
        case AggKind::DegreeNormalized:
        case AggKind::Attention: {
            std::vector<double> acc(dim + 1);
            pairwise_sum(count, dim + 1, acc.data(), [&](std::size_t k, double* dst) {
                const double w = weight(k);
                const double* m = message(k);
                for (std::size_t d = 0; d < dim; ++d) dst[d] = w * m[d];
                dst[dim] = w;
            });
            if (!(acc[dim] > 0.0)) {
                *degenerate = true;
                return;
            }
            const double inv = 1.0 / acc[dim];
            for (std::size_t d = 0; d < dim; ++d) out[d] = acc[d] * inv;
            return;
        }
        case AggKind::MaxConv: {
            for (std::size_t d = 0; d < dim; ++d)
                out[d] = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < count; ++k) {
                const double w = weight(k);
                const double* m = message(k);
                for (std::size_t d = 0; d < dim; ++d) out[d] = std::max(out[d], w * m[d]);
            }
            return;
        }
        case AggKind::Custom:
            throw std::logic_error("combine: custom aggregations use their own evaluator");
    }
}

}  // namespace mpgnn::detail
