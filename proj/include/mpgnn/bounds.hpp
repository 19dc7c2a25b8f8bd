#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpgnn/message_passing.hpp"
#include "mpgnn/random_graph.hpp"

namespace mpgnn {

/// Thrown when a requested confidence level lies below the admissible window
/// of the max-aggregation concentration results. Carries the smallest rho
/// for which the bound is stated.
struct ValidityWindowError : std::runtime_error {
    double min_rho;
    explicit ValidityWindowError(double min_rho_)
        : std::runtime_error("confidence level below the validity window (min rho = " +
                             std::to_string(min_rho_) + ")"),
          min_rho(min_rho_) {}
};

/// Deviation bound for a vector-valued function of independent variables
/// with per-coordinate bounded differences c_i:
///   sqrt( (1/2) sum c_i^2 * ln(2 d / rho) ),
/// exceeded with probability at most rho. The log term is clamped at zero,
/// so rho >= 2d yields the trivial bound 0.
double mcdiarmid_bound(std::span<const double> c, std::size_t out_dim, double rho);

/// Per-layer regularity constants of a network and its surroundings.
struct RegularityConstants {
    std::vector<double> mu_F;      // layer 1..L
    std::vector<double> lambda_F;  // layer 1..L, strictly positive
    double lambda_R = 1.0;         // readout Lipschitz constant (mean/max: 1)
    std::vector<double> lambda_psi, psi_sup;
    double lambda_W = 0.0, alpha = 0.0, beta = 1.0;
    double lambda_f = 0.0, f_sup = 0.0;
    double lambda_c = 0.0;
};

/// Inputs of the bounded-differences convergence bound.
struct McDiarmidInputs {
    std::vector<double> D;            // bounded difference per layer, at size n
    std::vector<double> a;            // expectation gap a_{n-1} per layer
    double b_n = 0.0;                 // readout expectation gap
    double C_n = 0.0;                 // readout bounded difference
    std::size_t n = 0;                // graph size
    std::vector<std::size_t> widths;  // d_1 .. d_L
    double rho = 0.1;
};

struct BoundBreakdown {
    double total_equivariant = 0.0;
    double total_invariant = 0.0;
    std::vector<double> per_layer;  // equivariant per-layer terms
    double readout_term = 0.0;      // extra term entering only the invariant total
    double min_rho = 0.0;           // smallest admissible rho at this n (0 when unrestricted)
};

/// High-probability deviation between a network on an n-node sampled graph
/// and its limit, for aggregations with sharp bounded differences.
/// Equivariant:  sum_l A^{(l,L)} [ D^{(l)} sqrt( n/2 ln(2^{L+2-l} n d_l / rho) ) + a^{(l)} ]
/// with A^{(l,L)} = prod_{k>l} (mu_F^{(k)} + lambda_F^{(k)}).
/// Invariant: lambda_R * equivariant(rho/2) + C_n sqrt( n/2 ln(4 d_L / rho) ) + b_n.
BoundBreakdown mcdiarmid_network_bounds(const McDiarmidInputs& in,
                                        const RegularityConstants& reg);

/// Ball-covering property of the latent distribution: every ball of radius
/// r <= r0 centered in the support has P-measure >= kappa * vol(ball).
struct VolumeRetention {
    double r0 = 1.0;
    double kappa = 1.0;
    std::size_t dim = 1;

    /// The unit hypercube retains (1, 1/2^d).
    static VolumeRetention hypercube(std::size_t d);
};

/// Deviation of a max of n i.i.d. evaluations of a lambda_g-Lipschitz map
/// from its supremum: (lambda_g / 2) * ( ln(d'/rho) / (n kappa) )^{1/d},
/// valid for rho >= exp(-n kappa r0^d 2^d); below that window a
/// ValidityWindowError carrying the minimum admissible rho is thrown.
double max_concentration_bound(double lambda_g, std::size_t out_dim, const VolumeRetention& vr,
                               std::size_t n, double rho);

/// Inputs of the max-aggregation convergence bound.
struct MaxBoundInputs {
    std::vector<double> lambda_psi;    // layer 1..L
    std::vector<double> psi_comp_sup;  // |psi^{(l)} o f^{(l-1)}|_inf per layer
    double lambda_f0 = 0.0;
    double lambda_W = 0.0;
    VolumeRetention vr;
    std::size_t n = 0;
    std::vector<std::size_t> widths;  // d_1 .. d_L
    double rho = 0.1;
};

/// Lipschitz constants of the limit functions, layer by layer:
/// lambda_{f^{(l+1)}} = lambda_psi^{(l+1)} lambda_{f^{(l)}}
///                      + |psi^{(l+1)} o f^{(l)}|_inf * lambda_W.
/// Returns lambda_{f^{(1)}} .. lambda_{f^{(L)}}.
std::vector<double> lipschitz_cascade(const MaxBoundInputs& in);

/// High-probability deviation for max aggregation.
/// Equivariant: sum_l B^{(l,L)} (lambda_{f^{(l)}}/2)
///                    ( ln(2^{L+1-l} n d_l / rho) / (n kappa) )^{1/d}
/// with B^{(l,L)} = prod_{k>l} lambda_psi^{(k)}; valid for
/// rho >= 2^{L-1} n exp(-n kappa r0^d 2^d).
/// Invariant: equivariant(rho/2) plus the readout concentration term
/// (lambda_{f^{(L)}}/2) ( ln(2 d_L / rho) / (n kappa) )^{1/d}; its window is
/// twice the equivariant one.
BoundBreakdown max_network_bounds(const MaxBoundInputs& in);

/// Smallest rho admitted by the equivariant max bound at size n.
double max_bound_min_rho(std::size_t n, std::size_t layers, const VolumeRetention& vr);

enum class ExpectationGapTag { Zero, OneOverSqrtN };

struct ExampleParams {
    double lambda_psi = 0.0;
    double psi_sup = 1.0;
    double alpha = 0.0;   // kernel (or coefficient) lower bound
    double beta = 1.0;    // coefficient upper bound
    double lambda_c = 0.0;
    double f_sup = 0.0;   // sup norm of the layer input signal
    std::size_t n = 2;
};

struct ExampleConstants {
    double mu_F = 0.0;
    double lambda_F = 0.0;
    double D_n = 0.0;
    ExpectationGapTag a_n_tag = ExpectationGapTag::Zero;
};

/// Closed-form regularity constants and bounded-difference envelopes of the
/// built-in aggregation families:
///   MeanConv:          mu=0, lambda=max(l_psi,|psi|), D=2|psi|/(n-1), a=0
///   DegreeNormalized:  mu=0, lambda=max(l_psi,2|psi|)/a^2,
///                      D=(2 l_psi |f| + 4|psi|)/((n-1) a^2)
///   Attention:         mu=2 b |psi| l_c / a^2,
///                      lambda=b max(b l_psi, 2|psi| l_c)/a^2,
///                      D=(2 l_psi |f| b + 4 |psi| b)/((n-1) a^2)
/// MaxConv has no sharp bounded differences and throws.
ExampleConstants example_constants(AggKind kind, const ExampleParams& p);

/// Numeric envelope for the expectation gap a_n of the ratio families
/// (zero for MeanConv). Derived from the variance of bounded averages:
/// degnorm:  |psi| (2 d_l + 1) / (2 a^2 sqrt(n));
/// attention: beta |psi| (2 d_l + 1) / (2 a^2 sqrt(n)).
double expectation_gap_envelope(AggKind kind, const ExampleParams& p, std::size_t out_dim,
                                std::size_t n);

/// Lower bound on the worst-case single-coordinate output swing of an
/// aggregation over n-1 neighbors drawn from the model. Combines random
/// perturbation trials with a clustered search that places the background
/// neighbors at an extreme of the integrand; every reported value is
/// witnessed by an actual pair of inputs differing in one coordinate, and
/// the estimate is monotone in `trials`.
double estimate_bounded_difference(const Aggregation& agg, const Kernel& kernel, const InputMap& f,
                                   const LatentSpace& space, std::size_t n, std::size_t trials,
                                   std::uint64_t seed);

struct LemmaReport {
    bool passed = true;
    std::size_t instances = 0;
    std::string failure;  // description of the first counterexample
};

/// Randomized battery for the max-related inequalities:
///  (i)   |max_i a_i|_inf <= max_i |a_i|_inf
///  (ii)  |max_i a_i - max_i b_i|_inf <= max_i |a_i - b_i|_inf
///  (iii) empirical difference quotients of x -> max over a grid of a
///        Lipschitz g(x, .) stay within lambda_g (1 + 1e-6).
LemmaReport lemma_checks(std::size_t instances = 10000, std::uint64_t seed = 20240901);

/// Bound inputs filled from an actual network, for the mean-family path.
/// `input_sup` is the sup norm of the network input signal. Expectation
/// gaps use the closed forms (zero for MeanConv, envelopes otherwise).
void mean_family_bound_inputs(const Network& net, const Kernel& kernel, double input_sup,
                              std::size_t n, double rho, McDiarmidInputs* inputs,
                              RegularityConstants* reg);

/// Bound inputs filled from an actual network, for the max path.
MaxBoundInputs max_family_bound_inputs(const Network& net, const Kernel& kernel,
                                       const InputMap& f0, const VolumeRetention& vr,
                                       std::size_t n, double rho);

/// JSON report {inputs, per_layer_terms, total_equivariant, total_invariant,
/// validity:{ok, min_rho}} for either bound path.
std::string bound_report_json(const McDiarmidInputs& in, const RegularityConstants& reg);
std::string bound_report_json(const MaxBoundInputs& in);

}  // namespace mpgnn
