#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "mpgnn/matrix.hpp"
#include "mpgnn/rng.hpp"

namespace mpgnn {

/// Axis-aligned box in R^d that carries the latent positions.
struct LatentSpace {
    std::vector<double> lo, hi;

    LatentSpace(std::vector<double> lower, std::vector<double> upper);

    static LatentSpace unit_box(std::size_t dim);

    std::size_t dim() const { return lo.size(); }
    bool contains(std::span<const double> x, double tol = 0.0) const;
    /// Corner with all coordinates at their maximum.
    std::vector<double> top_corner() const { return hi; }
};

/// Uniform-on-box sampler, deterministic in (seed, n).
struct LatentSampler {
    std::uint64_t seed = 0;
};

/// Symmetric connectivity kernel with values in [0,1]. `lower_bound` and
/// `lipschitz` are declared metadata; honesty is checkable by sampling.
/// The Lipschitz constant is with respect to the sup norm on each argument:
/// |W(x,y) - W(x',y')| <= lipschitz * (|x-x'|_inf + |y-y'|_inf).
struct Kernel {
    enum class Kind { Constant, FlooredGaussian, Custom };

    Kind kind = Kind::Constant;
    double c = 1.0;                              // Constant value
    double alpha = 0.0;                          // FlooredGaussian floor
    double inv_sigma2 = 1.0;                     // FlooredGaussian 1/sigma^2
    double lower_bound = 0.0;
    double lipschitz = 0.0;
    std::function<double(std::span<const double>, std::span<const double>)> custom_fn;

    double operator()(std::span<const double> x, std::span<const double> y) const {
        switch (kind) {
            case Kind::Constant:
                return c;
            case Kind::FlooredGaussian: {
                double r2 = 0.0;
                for (std::size_t k = 0; k < x.size(); ++k) {
                    const double d = x[k] - y[k];
                    r2 += d * d;
                }
                return alpha + (1.0 - alpha) * std::exp(-r2 * inv_sigma2);
            }
            case Kind::Custom:
                return custom_fn(x, y);
        }
        return 0.0;
    }

    bool is_constant() const { return kind == Kind::Constant; }

    static Kernel constant(double value);
    /// W(x,y) = alpha + (1-alpha) exp(-|x-y|_2^2 / sigma^2). The floor keeps
    /// the kernel bounded away from zero so ratio aggregations stay defined.
    static Kernel floored_gaussian(double alpha, double sigma, std::size_t dim);
    static Kernel custom(std::function<double(std::span<const double>, std::span<const double>)> fn,
                         double lower_bound, double lipschitz);
};

/// Graph input signal generator f : X -> R^{d0}, with regularity metadata.
struct InputMap {
    enum class Kind { Linear, Constant, Custom };

    Kind kind = Kind::Constant;
    std::vector<double> coeffs;  // Linear: a; Constant: the value v
    std::size_t out_dim = 1;
    double lipschitz = 0.0;
    double sup_bound = 0.0;
    bool monotone_nondecreasing = false;
    std::function<void(std::span<const double>, std::span<double>)> custom_fn;

    void apply(std::span<const double> x, std::span<double> out) const;

    /// x -> <a, x>, scalar output. Metadata is computed on the given box.
    static InputMap linear(std::vector<double> a, const LatentSpace& space);
    static InputMap constant(std::vector<double> v);
    /// Linear map with a ~ Uniform[0,1]^d, the experimental default.
    static InputMap random_linear(const LatentSpace& space, std::uint64_t seed);
    static InputMap custom(std::function<void(std::span<const double>, std::span<double>)> fn,
                           std::size_t out_dim, double lipschitz, double sup_bound);
};

/// Fully connected weighted graph sampled from a latent position model.
/// The diagonal W(X_i, X_i) is stored but aggregations never consume it:
/// the neighborhood of node i is {j != i} unless self-inclusion is
/// requested explicitly.
struct SampledGraph {
    Matrix latents;  // n x d
    Matrix weights;  // n x n, exactly symmetric

    std::size_t size() const { return latents.rows(); }
};

/// Draws n i.i.d. latent positions; deterministic in (seed, n).
Matrix sample_latents(const LatentSampler& sampler, const LatentSpace& space, std::size_t n);

/// Materializes the symmetric weight matrix w_ij = W(x_i, x_j).
/// Throws if the kernel leaves [0,1] on any sampled pair.
SampledGraph build_graph(const Matrix& latents, const Kernel& kernel);

/// Sampling operator: row i of the result is f(x_i).
Matrix sample_signal(const InputMap& f, const Matrix& latents);

/// Relabels nodes: latents'[i] = latents[sigma^-1(i)] and
/// weights'[i][j] = weights[sigma^-1(i)][sigma^-1(j)].
/// `sigma[i]` is the image of i; throws if not a permutation.
SampledGraph permute_graph(const SampledGraph& g, const std::vector<std::size_t>& sigma);

/// Applies the same relabeling to a signal: row i of the result is
/// Z[sigma^-1(i)].
Matrix permute_signal(const Matrix& z, const std::vector<std::size_t>& sigma);

std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& sigma);
std::vector<std::size_t> compose_permutations(const std::vector<std::size_t>& sigma,
                                              const std::vector<std::size_t>& tau);
std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed);

/// CSV dump: upper-triangle edges `i,j,w` plus sidecar latents `i,x_1..x_d`.
void write_graph_csv(const SampledGraph& g, std::ostream& edges, std::ostream& latents);

}  // namespace mpgnn
