#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mpgnn/matrix.hpp"
#include "mpgnn/random_graph.hpp"

namespace mpgnn {

double stable_sigmoid(double x);

/// Per-layer message map psi : R^{d_in} -> R^{d_out}.
struct MessageMap {
    enum class Kind { Identity, AffineSigmoid };

    Kind kind = Kind::Identity;
    Matrix weights;             // d_out x d_in (AffineSigmoid)
    std::vector<double> bias;   // d_out, zero when empty
    std::size_t dim = 0;        // Identity dimension

    std::size_t in_dim() const { return kind == Kind::Identity ? dim : weights.cols(); }
    std::size_t out_dim() const { return kind == Kind::Identity ? dim : weights.rows(); }

    void apply(std::span<const double> in, std::span<double> out) const;

    /// Upper bound on the sup-norm Lipschitz constant: 1 for the identity,
    /// (1/4) * max absolute row sum for sigmoid(Wx + b).
    double lipschitz_bound() const;

    /// Upper bound on |psi|_inf; sigmoid outputs lie in (0,1).
    /// For the identity this is unbounded and callers must supply their own.
    double sup_bound() const;

    static MessageMap identity(std::size_t dim);
    static MessageMap affine_sigmoid(Matrix weights, std::vector<double> bias = {});
    /// Square sigmoid layer with i.i.d. Uniform[0,1] weights and zero bias,
    /// the experimental default.
    static MessageMap random_sigmoid(std::size_t out_dim, std::size_t in_dim, std::uint64_t seed);
};

/// Edge coefficient c(z_i, z_j, w) for attention-style aggregation, with
/// declared bounds alpha_c < c < beta_c and a Lipschitz constant
/// |c(u) - c(u')| <= lambda_c (|z_i - z_i'|_inf + |z_j - z_j'|_inf + |w - w'|).
struct CoefficientMap {
    enum class Kind { SigmoidScore, Custom };

    Kind kind = Kind::SigmoidScore;
    std::vector<double> a, b;  // score = <a, z_i> + <b, z_j> + gamma * w
    double gamma = 0.0;
    double eps = 0.1;          // additive floor
    double alpha_c = 0.0, beta_c = 1.0, lambda_c = 0.0;
    std::function<double(std::span<const double>, std::span<const double>, double)> custom_fn;

    double operator()(std::span<const double> zi, std::span<const double> zj, double w) const;

    /// c = eps + sigmoid(<a,z_i> + <b,z_j> + gamma*w); the floor makes the
    /// lower bound alpha_c = eps hold by construction.
    static CoefficientMap sigmoid_score(std::vector<double> a, std::vector<double> b, double gamma,
                                        double eps = 0.1);
    static CoefficientMap random(std::size_t dim, std::uint64_t seed, double eps = 0.1);
    static CoefficientMap custom(
        std::function<double(std::span<const double>, std::span<const double>, double)> fn,
        double alpha_c, double beta_c, double lambda_c);
};

enum class AggKind { MeanConv, DegreeNormalized, Attention, MaxConv, Custom };

std::string agg_kind_name(AggKind k);
AggKind agg_kind_from_name(const std::string& name);

/// One (state, weight) pair from a neighborhood multiset.
struct Neighbor {
    std::span<const double> state;
    double weight = 0.0;
};

/// A message-passing layer: an aggregation family plus its message map and,
/// for attention, a coefficient map. Custom carries a caller-supplied
/// multiset evaluator with explicit dimensions and no regularity metadata.
struct Aggregation {
    using CustomFn =
        std::function<void(std::span<const double>, std::span<const Neighbor>, std::span<double>)>;

    AggKind kind = AggKind::MeanConv;
    MessageMap psi;
    std::optional<CoefficientMap> coeff;
    CustomFn custom_fn;
    std::size_t custom_in = 0, custom_out = 0;

    std::size_t in_dim() const { return kind == AggKind::Custom ? custom_in : psi.in_dim(); }
    std::size_t out_dim() const { return kind == AggKind::Custom ? custom_out : psi.out_dim(); }

    static Aggregation mean(MessageMap psi);
    static Aggregation degree_normalized(MessageMap psi);
    static Aggregation attention(MessageMap psi, CoefficientMap coeff);
    static Aggregation max(MessageMap psi);
    static Aggregation custom(CustomFn fn, std::size_t in_dim, std::size_t out_dim);
};

/// Applies one aggregation to a node state and its neighborhood multiset:
///   MeanConv:          (1/|N|) sum_j w_j psi(z_j)
///   DegreeNormalized:  sum_j w_j psi(z_j) / sum_k w_k
///   Attention:         sum_j c(z,z_j,w_j) psi(z_j) / sum_k c(z,z_k,w_k)
///   MaxConv:           coordinate-wise max_j w_j psi(z_j)
/// The result is independent of neighbor order (up to summation roundoff).
std::vector<double> aggregate(const Aggregation& agg, std::span<const double> z_self,
                              std::span<const Neighbor> neighbors);

enum class ReadoutKind { None, Mean, Max };

/// An ordered stack of aggregation layers with an optional readout.
struct Network {
    std::vector<Aggregation> layers;
    ReadoutKind readout = ReadoutKind::None;

    std::size_t depth() const { return layers.size(); }
    /// d_0 .. d_L; for an empty network this is empty.
    std::vector<std::size_t> widths() const;
    void validate() const;

    /// L square sigmoid layers of width `d` over a d0-dimensional input,
    /// with Uniform[0,1] weights; layer l is seeded from (seed, l).
    static Network experiment_net(std::size_t layers, std::size_t d0, std::size_t d, AggKind kind,
                                  std::uint64_t seed);
};

/// Runs all layers node-wise; the neighborhood of node i is {j != i}, or all
/// j when `include_self` is set (used by the continuum-consistency checks).
Matrix forward_equivariant(const Network& net, const SampledGraph& g, const Matrix& z,
                           bool include_self = false);

/// Equivariant pass followed by the readout pooling.
std::vector<double> forward_invariant(const Network& net, const SampledGraph& g, const Matrix& z,
                                      bool include_self = false);

std::vector<double> apply_readout(ReadoutKind kind, const Matrix& z);

/// JSON network description {widths, layers:[{agg, psi, coeff?}], readout};
/// weights survive a round trip bit-exactly. Custom layers are not
/// serializable.
std::string network_to_json(const Network& net);
Network network_from_json(const std::string& text);

}  // namespace mpgnn
