#include "mpgnn/message_passing.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include <json.hpp>

#include "mpgnn/detail/aggregate_combine.hpp"

namespace mpgnn {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void MessageMap::apply(std::span<const double> in, std::span<double> out) const {
    if (kind == Kind::Identity) {
        std::copy(in.begin(), in.end(), out.begin());
        return;
    }
    const std::size_t r = weights.rows(), c = weights.cols();
    for (std::size_t i = 0; i < r; ++i) {
        double acc = bias.empty() ? 0.0 : bias[i];
        const auto row = weights.row(i);
        for (std::size_t j = 0; j < c; ++j) acc += row[j] * in[j];
        out[i] = stable_sigmoid(acc);
    }
}

double MessageMap::lipschitz_bound() const {
    if (kind == Kind::Identity) return 1.0;
    double max_row = 0.0;
    for (std::size_t i = 0; i < weights.rows(); ++i) {
        double s = 0.0;
        for (double w : weights.row(i)) s += std::abs(w);
        max_row = std::max(max_row, s);
    }
    return 0.25 * max_row;  // sup sigma' = 1/4
}

double MessageMap::sup_bound() const {
    if (kind == Kind::Identity) return std::numeric_limits<double>::infinity();
    return 1.0;
}

MessageMap MessageMap::identity(std::size_t dim) {
    MessageMap m;
    m.kind = Kind::Identity;
    m.dim = dim;
    return m;
}

MessageMap MessageMap::affine_sigmoid(Matrix weights, std::vector<double> bias) {
    if (weights.rows() == 0 || weights.cols() == 0)
        throw std::invalid_argument("affine_sigmoid: empty weight matrix");
    if (!bias.empty() && bias.size() != weights.rows())
        throw std::invalid_argument("affine_sigmoid: bias size mismatch");
    MessageMap m;
    m.kind = Kind::AffineSigmoid;
    m.weights = std::move(weights);
    m.bias = std::move(bias);
    return m;
}

MessageMap MessageMap::random_sigmoid(std::size_t out_dim, std::size_t in_dim,
                                      std::uint64_t seed) {
    Matrix w(out_dim, in_dim);
    SplitMix64 g(seed);
    for (std::size_t i = 0; i < out_dim; ++i)
        for (std::size_t j = 0; j < in_dim; ++j) w(i, j) = g.uniform01();
    return affine_sigmoid(std::move(w));
}

double CoefficientMap::operator()(std::span<const double> zi, std::span<const double> zj,
                                  double w) const {
    if (kind == Kind::Custom) return custom_fn(zi, zj, w);
    double s = gamma * w;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * zi[k];
    for (std::size_t k = 0; k < b.size(); ++k) s += b[k] * zj[k];
    return eps + stable_sigmoid(s);
}

CoefficientMap CoefficientMap::sigmoid_score(std::vector<double> a, std::vector<double> b,
                                             double gamma, double eps) {
    if (a.size() != b.size()) throw std::invalid_argument("sigmoid_score: size mismatch");
    CoefficientMap c;
    c.kind = Kind::SigmoidScore;
    double l1a = 0.0, l1b = 0.0;
    for (double v : a) l1a += std::abs(v);
    for (double v : b) l1b += std::abs(v);
    c.lambda_c = 0.25 * std::max({l1a, l1b, std::abs(gamma)});
    c.alpha_c = eps;
    c.beta_c = eps + 1.0;
    c.a = std::move(a);
    c.b = std::move(b);
    c.gamma = gamma;
    c.eps = eps;
    return c;
}

CoefficientMap CoefficientMap::random(std::size_t dim, std::uint64_t seed, double eps) {
    SplitMix64 g(seed);
    std::vector<double> a(dim), b(dim);
    for (double& v : a) v = g.uniform01();
    for (double& v : b) v = g.uniform01();
    return sigmoid_score(std::move(a), std::move(b), g.uniform01(), eps);
}

CoefficientMap CoefficientMap::custom(
    std::function<double(std::span<const double>, std::span<const double>, double)> fn,
    double alpha_c, double beta_c, double lambda_c) {
    CoefficientMap c;
    c.kind = Kind::Custom;
    c.custom_fn = std::move(fn);
    c.alpha_c = alpha_c;
    c.beta_c = beta_c;
    c.lambda_c = lambda_c;
    return c;
}

std::string agg_kind_name(AggKind k) {
    switch (k) {
        case AggKind::MeanConv: return "mean";
        case AggKind::DegreeNormalized: return "degnorm";
        case AggKind::Attention: return "attn";
        case AggKind::MaxConv: return "max";
        case AggKind::Custom: return "custom";
    }
    return "?";
}

AggKind agg_kind_from_name(const std::string& name) {
    if (name == "mean") return AggKind::MeanConv;
    if (name == "degnorm") return AggKind::DegreeNormalized;
    if (name == "attn") return AggKind::Attention;
    if (name == "max") return AggKind::MaxConv;
    if (name == "custom") return AggKind::Custom;
    throw std::invalid_argument("unknown aggregation: " + name);
}

Aggregation Aggregation::mean(MessageMap psi) {
    Aggregation a;
    a.kind = AggKind::MeanConv;
    a.psi = std::move(psi);
    return a;
}

Aggregation Aggregation::degree_normalized(MessageMap psi) {
    Aggregation a;
    a.kind = AggKind::DegreeNormalized;
    a.psi = std::move(psi);
    return a;
}

Aggregation Aggregation::attention(MessageMap psi, CoefficientMap coeff) {
    Aggregation a;
    a.kind = AggKind::Attention;
    a.psi = std::move(psi);
    a.coeff = std::move(coeff);
    return a;
}

Aggregation Aggregation::max(MessageMap psi) {
    Aggregation a;
    a.kind = AggKind::MaxConv;
    a.psi = std::move(psi);
    return a;
}

Aggregation Aggregation::custom(CustomFn fn, std::size_t in_dim, std::size_t out_dim) {
    Aggregation a;
    a.kind = AggKind::Custom;
    a.custom_fn = std::move(fn);
    a.custom_in = in_dim;
    a.custom_out = out_dim;
    return a;
}

using detail::combine;

std::vector<double> aggregate(const Aggregation& agg, std::span<const double> z_self,
                              std::span<const Neighbor> neighbors) {
    if (neighbors.empty()) throw std::invalid_argument("aggregate: empty neighborhood");
    const std::size_t dim = agg.out_dim();
    std::vector<double> out(dim);
    if (agg.kind == AggKind::Custom) {
        agg.custom_fn(z_self, neighbors, out);
        return out;
    }
    for (const Neighbor& nb : neighbors)
        if (nb.state.size() != agg.in_dim())
            throw std::invalid_argument("aggregate: neighbor width mismatch");

    Matrix messages(neighbors.size(), dim);
    for (std::size_t k = 0; k < neighbors.size(); ++k)
        agg.psi.apply(neighbors[k].state, messages.row(k));

    bool degenerate = false;
    const bool attn = agg.kind == AggKind::Attention;
    if (attn && !agg.coeff) throw std::invalid_argument("aggregate: attention without coefficients");
    combine(
        agg.kind, neighbors.size(), dim,
        [&](std::size_t k) {
            return attn ? (*agg.coeff)(z_self, neighbors[k].state, neighbors[k].weight)
                        : neighbors[k].weight;
        },
        [&](std::size_t k) { return messages.row(k).data(); }, out, &degenerate);
    if (degenerate) throw std::runtime_error("aggregate: degenerate degree (zero weight sum)");
    return out;
}

std::vector<std::size_t> Network::widths() const {
    std::vector<std::size_t> w;
    if (layers.empty()) return w;
    w.push_back(layers.front().in_dim());
    for (const auto& layer : layers) w.push_back(layer.out_dim());
    return w;
}

void Network::validate() const {
    for (std::size_t l = 1; l < layers.size(); ++l)
        if (layers[l].in_dim() != layers[l - 1].out_dim())
            throw std::invalid_argument("Network: adjacent layer widths are incompatible");
}

Network Network::experiment_net(std::size_t layers, std::size_t d0, std::size_t d, AggKind kind,
                                std::uint64_t seed) {
    Network net;
    std::size_t in = d0;
    for (std::size_t l = 0; l < layers; ++l) {
        MessageMap psi =
            MessageMap::random_sigmoid(d, in, derive_seed(seed, stream::kNetLayer, l));
        switch (kind) {
            case AggKind::MeanConv: net.layers.push_back(Aggregation::mean(std::move(psi))); break;
            case AggKind::DegreeNormalized:
                net.layers.push_back(Aggregation::degree_normalized(std::move(psi)));
                break;
            case AggKind::Attention:
                net.layers.push_back(Aggregation::attention(
                    std::move(psi),
                    CoefficientMap::random(in, derive_seed(seed, stream::kCoefficient, l))));
                break;
            case AggKind::MaxConv: net.layers.push_back(Aggregation::max(std::move(psi))); break;
            case AggKind::Custom: throw std::invalid_argument("experiment_net: custom unsupported");
        }
        in = d;
    }
    net.readout = kind == AggKind::MaxConv ? ReadoutKind::Max : ReadoutKind::Mean;
    return net;
}

namespace {

/// One layer over the whole graph. Messages are computed once per node and
/// reused across neighborhoods; per-node combination is data-parallel.
Matrix forward_layer(const Aggregation& agg, const Matrix& weights, const Matrix& z,
                     bool include_self) {
    const std::size_t n = z.rows();
    const std::size_t dim = agg.out_dim();
    Matrix out(n, dim);

    if (agg.kind == AggKind::Custom) {
        std::vector<Neighbor> nbs;
        std::vector<std::span<const double>> rows(n);
        for (std::size_t j = 0; j < n; ++j) rows[j] = z.row(j);
        for (std::size_t i = 0; i < n; ++i) {
            nbs.clear();
            for (std::size_t j = 0; j < n; ++j)
                if (include_self || j != i) nbs.push_back({rows[j], weights(i, j)});
            agg.custom_fn(z.row(i), nbs, out.row(i));
        }
        return out;
    }

    Matrix messages(n, dim);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(n); ++j)
        agg.psi.apply(z.row(static_cast<std::size_t>(j)), messages.row(static_cast<std::size_t>(j)));

    const std::size_t count = include_self ? n : n - 1;
    if (count == 0) throw std::invalid_argument("forward: empty neighborhood (n = 1)");
    const bool attn = agg.kind == AggKind::Attention;
    std::atomic<bool> degenerate{false};

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        const auto wrow = weights.row(i);
        const auto zi = z.row(i);
        auto index = [&](std::size_t k) { return include_self ? k : (k < i ? k : k + 1); };
        bool bad = false;
        combine(
            agg.kind, count, dim,
            [&](std::size_t k) {
                const std::size_t j = index(k);
                return attn ? (*agg.coeff)(zi, z.row(j), wrow[j]) : wrow[j];
            },
            [&](std::size_t k) { return messages.row(index(k)).data(); }, out.row(i), &bad);
        if (bad) degenerate.store(true, std::memory_order_relaxed);
    }
    if (degenerate.load())
        throw std::runtime_error("forward: degenerate degree (zero weight sum)");
    return out;
}

}  // namespace

Matrix forward_equivariant(const Network& net, const SampledGraph& g, const Matrix& z,
                           bool include_self) {
    net.validate();
    if (z.rows() != g.size()) throw std::invalid_argument("forward: signal row count != node count");
    if (!net.layers.empty() && z.cols() != net.layers.front().in_dim())
        throw std::invalid_argument("forward: signal width != input width");
    Matrix cur = z;
    for (const auto& layer : net.layers) cur = forward_layer(layer, g.weights, cur, include_self);
    return cur;
}

std::vector<double> apply_readout(ReadoutKind kind, const Matrix& z) {
    if (kind == ReadoutKind::None)
        throw std::invalid_argument("readout: no readout configured");
    if (z.rows() == 0) throw std::invalid_argument("readout: empty signal");
    const std::size_t dim = z.cols();
    std::vector<double> out(dim);
    if (kind == ReadoutKind::Mean) {
        pairwise_sum(z.rows(), dim, out.data(), [&](std::size_t i, double* dst) {
            const auto row = z.row(i);
            std::copy(row.begin(), row.end(), dst);
        });
        const double inv = 1.0 / static_cast<double>(z.rows());
        for (double& v : out) v *= inv;
    } else {
        for (std::size_t d = 0; d < dim; ++d) out[d] = z(0, d);
        for (std::size_t i = 1; i < z.rows(); ++i)
            for (std::size_t d = 0; d < dim; ++d) out[d] = std::max(out[d], z(i, d));
    }
    return out;
}

std::vector<double> forward_invariant(const Network& net, const SampledGraph& g, const Matrix& z,
                                      bool include_self) {
    return apply_readout(net.readout, forward_equivariant(net, g, z, include_self));
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (double v : m.row(i)) row.push_back(v);
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const std::size_t rows = j.size();
    if (rows == 0) return {};
    const std::size_t cols = j.at(0).size();
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (j.at(i).size() != cols) throw std::invalid_argument("network json: ragged matrix");
        for (std::size_t k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
    }
    return m;
}

std::string readout_name(ReadoutKind k) {
    switch (k) {
        case ReadoutKind::None: return "none";
        case ReadoutKind::Mean: return "mean";
        case ReadoutKind::Max: return "max";
    }
    return "?";
}

}  // namespace

std::string network_to_json(const Network& net) {
    nlohmann::json j;
    auto widths = net.widths();
    j["widths"] = widths;
    j["readout"] = readout_name(net.readout);
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : net.layers) {
        if (layer.kind == AggKind::Custom)
            throw std::invalid_argument("network_to_json: custom layers are not serializable");
        nlohmann::json lj;
        lj["agg"] = agg_kind_name(layer.kind);
        nlohmann::json psi;
        psi["kind"] = layer.psi.kind == MessageMap::Kind::Identity ? "identity" : "affine_sigmoid";
        if (layer.psi.kind == MessageMap::Kind::Identity) {
            psi["dim"] = layer.psi.dim;
        } else {
            psi["weights"] = matrix_to_json(layer.psi.weights);
            psi["bias"] = layer.psi.bias;
        }
        lj["psi"] = std::move(psi);
        if (layer.coeff) {
            const auto& c = *layer.coeff;
            if (c.kind == CoefficientMap::Kind::Custom)
                throw std::invalid_argument("network_to_json: custom coefficients");
            lj["coeff"] = {{"a", c.a}, {"b", c.b}, {"gamma", c.gamma}, {"eps", c.eps}};
        }
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    return j.dump();
}

Network network_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    Network net;
    std::string readout = j.at("readout").get<std::string>();
    if (readout == "none") net.readout = ReadoutKind::None;
    else if (readout == "mean") net.readout = ReadoutKind::Mean;
    else if (readout == "max") net.readout = ReadoutKind::Max;
    else throw std::invalid_argument("network json: unknown readout " + readout);

    for (const auto& lj : j.at("layers")) {
        const AggKind kind = agg_kind_from_name(lj.at("agg").get<std::string>());
        const auto& pj = lj.at("psi");
        MessageMap psi;
        if (pj.at("kind") == "identity") {
            psi = MessageMap::identity(pj.at("dim").get<std::size_t>());
        } else {
            psi = MessageMap::affine_sigmoid(matrix_from_json(pj.at("weights")),
                                             pj.at("bias").get<std::vector<double>>());
        }
        switch (kind) {
            case AggKind::MeanConv: net.layers.push_back(Aggregation::mean(std::move(psi))); break;
            case AggKind::DegreeNormalized:
                net.layers.push_back(Aggregation::degree_normalized(std::move(psi)));
                break;
            case AggKind::MaxConv: net.layers.push_back(Aggregation::max(std::move(psi))); break;
            case AggKind::Attention: {
                const auto& cj = lj.at("coeff");
                auto coeff = CoefficientMap::sigmoid_score(
                    cj.at("a").get<std::vector<double>>(), cj.at("b").get<std::vector<double>>(),
                    cj.at("gamma").get<double>(), cj.at("eps").get<double>());
                net.layers.push_back(Aggregation::attention(std::move(psi), std::move(coeff)));
                break;
            }
            case AggKind::Custom:
                throw std::invalid_argument("network json: custom layers are not serializable");
        }
    }
    net.validate();
    const auto widths = j.at("widths").get<std::vector<std::size_t>>();
    if (widths != net.widths()) throw std::invalid_argument("network json: widths mismatch");
    return net;
}

}  // namespace mpgnn
