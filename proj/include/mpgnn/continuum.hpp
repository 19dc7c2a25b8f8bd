#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "mpgnn/matrix.hpp"
#include "mpgnn/message_passing.hpp"
#include "mpgnn/random_graph.hpp"

namespace mpgnn {

/// Reference nodes used to discretize the latent-measure integrals and
/// suprema of the limit network.
struct QuadratureSet {
    enum class Provenance { MonteCarlo, Lattice };

    Matrix nodes;  // M x d
    Provenance tag = Provenance::MonteCarlo;

    std::size_t size() const { return nodes.rows(); }
};

/// M i.i.d. draws from the latent distribution with a dedicated seed.
QuadratureSet make_monte_carlo_quadrature(const LatentSpace& space, std::size_t m,
                                          std::uint64_t seed);

/// Tensor lattice with endpoint-inclusive, evenly spaced points per axis;
/// the per-axis count is reduced until the total fits `max_total`. Endpoint
/// inclusion makes lattice maxima approach suprema from below and attain
/// them at box corners.
QuadratureSet make_lattice_quadrature(const LatentSpace& space, std::size_t points_per_axis = 101,
                                      std::size_t max_total = 1000000);

/// Function values on the quadrature nodes at some layer.
struct ContinuousSignal {
    Matrix values;  // M x d_l
    std::size_t layer = 0;
};

/// Values of the limit network at query points, with a per-point standard
/// error estimated from independent quadrature replicates (zero for a
/// single replicate or a deterministic lattice).
struct LimitEstimate {
    Matrix values;               // Q x d_L
    std::vector<double> stderr_;  // per query point, max over components

    double max_stderr() const;
};

/// One limit layer evaluated at query points, given the node values of the
/// input signal:
///   MeanConv:          (1/M) sum_m W(x, y_m) psi(f(y_m))
///   DegreeNormalized:  sum_m W(x,y_m) psi(f(y_m)) / sum_m W(x,y_m)
///   Attention:         same ratio with c(f(x), f(y_m), W(x, y_m)) weights
///   MaxConv:           coordinate-wise max_m W(x,y_m) psi(f(y_m))
/// Attention needs the input signal at the queries themselves
/// (`f_at_queries`).
Matrix limit_layer(const Aggregation& agg, const Kernel& kernel, const QuadratureSet& quad,
                   const ContinuousSignal& f, const Matrix& queries,
                   const Matrix* f_at_queries = nullptr);

/// How the limit is discretized: node source, node count and replicate
/// count. Lattices are deterministic, so they always use one replicate.
struct QuadratureSpec {
    enum class Kind { Auto, MonteCarlo, Lattice };

    Kind kind = Kind::Auto;
    std::size_t size = 100000;          // Monte Carlo node count
    std::size_t points_per_axis = 101;  // lattice resolution
    std::size_t replicates = 8;
    std::size_t max_nodes = 1u << 20;   // refinement cap per replicate

    /// Lattice for d <= 3, Monte Carlo above.
    QuadratureSpec resolved(std::size_t dim) const;
};

/// Evaluates the limit network. Tables of layer values at the quadrature
/// nodes are built once per replicate (L*M^2 kernel evaluations) and reused
/// for every query batch.
class LimitEvaluator {
  public:
    LimitEvaluator(Network net, InputMap f0, Kernel kernel, LatentSpace space, QuadratureSpec spec,
                   std::uint64_t seed);

    LimitEstimate evaluate(const Matrix& queries) const;

    /// Doubles the node budget (Monte Carlo) or roughly doubles the per-axis
    /// resolution (lattice) and rebuilds the tables. Returns false when the
    /// node cap would be exceeded.
    bool refine();

    std::size_t nodes_per_replicate() const;
    std::size_t replicates() const { return tables_.size(); }

    /// Layer-value table of one replicate; table 0 is the input signal at
    /// the nodes. Exposed for the discrete-consistency checks.
    const Matrix& node_table(std::size_t replicate, std::size_t layer) const;
    const QuadratureSet& quadrature(std::size_t replicate) const { return quads_[replicate]; }

  private:
    void build();

    Network net_;
    InputMap f0_;
    Kernel kernel_;
    LatentSpace space_;
    QuadratureSpec spec_;
    std::uint64_t seed_;
    std::vector<QuadratureSet> quads_;
    std::vector<std::vector<Matrix>> tables_;  // [replicate][layer 0..L-1]
};

/// One-call evaluation of the limit at query points.
LimitEstimate forward_limit(const Network& net, const InputMap& f0, const Kernel& kernel,
                            const LatentSpace& space, const QuadratureSpec& spec,
                            const Matrix& queries, std::uint64_t seed);

/// Exact limit of a max-aggregation network under a constant kernel with
/// nonnegative message weights and a coordinatewise nondecreasing input:
/// every supremum is attained at the top corner of the box, so the limit is
/// the constant obtained by pushing the corner value through the layers.
/// Throws if the monotonicity preconditions do not hold.
std::vector<double> closed_form_max_limit(const Network& net, const InputMap& f0,
                                          const Kernel& kernel, const LatentSpace& space);

/// Continuum readout: average (Mean) or coordinate-wise maximum (Max) of the
/// node values.
std::vector<double> limit_readout(ReadoutKind kind, const ContinuousSignal& f);

/// Maximum absolute error between a discrete signal and the limit sampled at
/// the same nodes: max_i |z_i - f(x_i)|_inf.
double mae(const Matrix& z, const Matrix& f_at_latents);

/// CSV dump `query_index,x_1..x_d,v_1..v_dL,stderr`.
void write_limit_csv(std::ostream& os, const Matrix& queries, const LimitEstimate& est);

}  // namespace mpgnn
