#include "mpgnn/random_graph.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace mpgnn {

namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

}  // namespace

LatentSpace::LatentSpace(std::vector<double> lower, std::vector<double> upper)
    : lo(std::move(lower)), hi(std::move(upper)) {
    if (lo.empty() || lo.size() != hi.size())
        throw std::invalid_argument("LatentSpace: dimension must be >= 1 with matching bounds");
    for (std::size_t k = 0; k < lo.size(); ++k) {
        if (!std::isfinite(lo[k]) || !std::isfinite(hi[k]) || !(lo[k] < hi[k]))
            throw std::invalid_argument("LatentSpace: bounds must be finite with lo < hi");
    }
}

LatentSpace LatentSpace::unit_box(std::size_t dim) {
    return LatentSpace(std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0));
}

bool LatentSpace::contains(std::span<const double> x, double tol) const {
    if (x.size() != dim()) return false;
    for (std::size_t k = 0; k < dim(); ++k)
        if (x[k] < lo[k] - tol || x[k] > hi[k] + tol) return false;
    return true;
}

Kernel Kernel::constant(double value) {
    if (value < 0.0 || value > 1.0)
        throw std::invalid_argument("Kernel::constant: value must lie in [0,1]");
    Kernel k;
    k.kind = Kind::Constant;
    k.c = value;
    k.lower_bound = value;
    k.lipschitz = 0.0;
    return k;
}

Kernel Kernel::floored_gaussian(double alpha, double sigma, std::size_t dim) {
    if (alpha < 0.0 || alpha >= 1.0) throw std::invalid_argument("floored_gaussian: alpha in [0,1)");
    if (sigma <= 0.0) throw std::invalid_argument("floored_gaussian: sigma > 0");
    Kernel k;
    k.kind = Kind::FlooredGaussian;
    k.alpha = alpha;
    k.inv_sigma2 = 1.0 / (sigma * sigma);
    k.lower_bound = alpha;
    // exp(-r^2/s^2) has slope at most sqrt(2)/(s e^{1/2}) in r, and the
    // Euclidean distance moves by at most sqrt(d) per unit sup-norm change.
    k.lipschitz = (1.0 - alpha) * std::sqrt(2.0 * static_cast<double>(dim)) *
                  std::exp(-0.5) / sigma;
    return k;
}

Kernel Kernel::custom(std::function<double(std::span<const double>, std::span<const double>)> fn,
                      double lower_bound, double lipschitz) {
    Kernel k;
    k.kind = Kind::Custom;
    k.custom_fn = std::move(fn);
    k.lower_bound = lower_bound;
    k.lipschitz = lipschitz;
    return k;
}

void InputMap::apply(std::span<const double> x, std::span<double> out) const {
    switch (kind) {
        case Kind::Linear: {
            double acc = 0.0;
            for (std::size_t k = 0; k < coeffs.size(); ++k) acc += coeffs[k] * x[k];
            out[0] = acc;
            return;
        }
        case Kind::Constant:
            std::copy(coeffs.begin(), coeffs.end(), out.begin());
            return;
        case Kind::Custom:
            custom_fn(x, out);
            return;
    }
}

InputMap InputMap::linear(std::vector<double> a, const LatentSpace& space) {
    if (a.size() != space.dim()) throw std::invalid_argument("InputMap::linear: size mismatch");
    InputMap f;
    f.kind = Kind::Linear;
    f.out_dim = 1;
    f.lipschitz = 0.0;
    f.sup_bound = 0.0;
    f.monotone_nondecreasing = true;
    for (std::size_t k = 0; k < a.size(); ++k) {
        f.lipschitz += std::abs(a[k]);
        f.sup_bound += std::max(std::abs(a[k] * space.lo[k]), std::abs(a[k] * space.hi[k]));
        if (a[k] < 0.0) f.monotone_nondecreasing = false;
    }
    f.coeffs = std::move(a);
    return f;
}

InputMap InputMap::constant(std::vector<double> v) {
    InputMap f;
    f.kind = Kind::Constant;
    f.out_dim = v.size();
    f.lipschitz = 0.0;
    f.sup_bound = linf_norm(v);
    f.monotone_nondecreasing = true;
    f.coeffs = std::move(v);
    return f;
}

InputMap InputMap::random_linear(const LatentSpace& space, std::uint64_t seed) {
    SplitMix64 g(seed);
    std::vector<double> a(space.dim());
    for (double& x : a) x = g.uniform01();
    return linear(std::move(a), space);
}

InputMap InputMap::custom(std::function<void(std::span<const double>, std::span<double>)> fn,
                          std::size_t out_dim, double lipschitz, double sup_bound) {
    InputMap f;
    f.kind = Kind::Custom;
    f.custom_fn = std::move(fn);
    f.out_dim = out_dim;
    f.lipschitz = lipschitz;
    f.sup_bound = sup_bound;
    f.monotone_nondecreasing = false;
    return f;
}

Matrix sample_latents(const LatentSampler& sampler, const LatentSpace& space, std::size_t n) {
    if (n == 0) throw std::invalid_argument("sample_latents: empty graph (n = 0)");
    const std::size_t d = space.dim();
    Matrix x(n, d);
    SplitMix64 g(sampler.seed);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) x(i, k) = g.uniform(space.lo[k], space.hi[k]);
    return x;
}

SampledGraph build_graph(const Matrix& latents, const Kernel& kernel) {
    const std::size_t n = latents.rows();
    if (n == 0) throw std::invalid_argument("build_graph: no latents");
    SampledGraph g;
    g.latents = latents;
    g.weights = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double w = kernel(latents.row(i), latents.row(j));
            if (!(w >= 0.0 && w <= 1.0))
                throw std::runtime_error("build_graph: kernel value outside [0,1]");
            g.weights(i, j) = w;
            g.weights(j, i) = w;
        }
    }
    return g;
}

Matrix sample_signal(const InputMap& f, const Matrix& latents) {
    Matrix z(latents.rows(), f.out_dim);
    for (std::size_t i = 0; i < latents.rows(); ++i) f.apply(latents.row(i), z.row(i));
    return z;
}

namespace {

void check_permutation(const std::vector<std::size_t>& sigma, std::size_t n) {
    if (sigma.size() != n) throw std::invalid_argument("permutation: size mismatch");
    std::vector<bool> seen(n, false);
    for (std::size_t v : sigma) {
        if (v >= n || seen[v]) throw std::invalid_argument("permutation: not a bijection");
        seen[v] = true;
    }
}

}  // namespace

SampledGraph permute_graph(const SampledGraph& g, const std::vector<std::size_t>& sigma) {
    const std::size_t n = g.size();
    check_permutation(sigma, n);
    const auto inv = invert_permutation(sigma);
    SampledGraph out;
    out.latents = Matrix(n, g.latents.cols());
    out.weights = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto src = g.latents.row(inv[i]);
        std::copy(src.begin(), src.end(), out.latents.row(i).begin());
        for (std::size_t j = 0; j < n; ++j) out.weights(i, j) = g.weights(inv[i], inv[j]);
    }
    return out;
}

Matrix permute_signal(const Matrix& z, const std::vector<std::size_t>& sigma) {
    check_permutation(sigma, z.rows());
    const auto inv = invert_permutation(sigma);
    Matrix out(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const auto src = z.row(inv[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& sigma) {
    std::vector<std::size_t> inv(sigma.size());
    for (std::size_t i = 0; i < sigma.size(); ++i) inv[sigma[i]] = i;
    return inv;
}

std::vector<std::size_t> compose_permutations(const std::vector<std::size_t>& sigma,
                                              const std::vector<std::size_t>& tau) {
    if (sigma.size() != tau.size()) throw std::invalid_argument("compose: size mismatch");
    std::vector<std::size_t> out(sigma.size());
    for (std::size_t i = 0; i < sigma.size(); ++i) out[i] = sigma[tau[i]];
    return out;
}

std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    SplitMix64 g(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[g.below(i)]);
    return p;
}

void write_graph_csv(const SampledGraph& g, std::ostream& edges, std::ostream& latents) {
    const std::size_t n = g.size();
    const std::size_t d = g.latents.cols();
    std::string line;
    edges << "i,j,w\n";
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            line.clear();
            line += std::to_string(i);
            line += ',';
            line += std::to_string(j);
            line += ',';
            append_double(line, g.weights(i, j));
            line += '\n';
            edges << line;
        }
    }
    latents << "i";
    for (std::size_t k = 1; k <= d; ++k) latents << ",x_" << k;
    latents << "\n";
    for (std::size_t i = 0; i < n; ++i) {
        line = std::to_string(i);
        for (std::size_t k = 0; k < d; ++k) {
            line += ',';
            append_double(line, g.latents(i, k));
        }
        line += '\n';
        latents << line;
    }
}

}  // namespace mpgnn
