#include "mpgnn/continuum.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "mpgnn/detail/aggregate_combine.hpp"

namespace mpgnn {

QuadratureSet make_monte_carlo_quadrature(const LatentSpace& space, std::size_t m,
                                          std::uint64_t seed) {
    if (m < 2) throw std::invalid_argument("quadrature: m must be >= 2");
    QuadratureSet q;
    q.nodes = sample_latents(LatentSampler{seed}, space, m);
    q.tag = QuadratureSet::Provenance::MonteCarlo;
    return q;
}

QuadratureSet make_lattice_quadrature(const LatentSpace& space, std::size_t points_per_axis,
                                      std::size_t max_total) {
    const std::size_t d = space.dim();
    if (points_per_axis < 2) throw std::invalid_argument("lattice: need >= 2 points per axis");
    auto total_of = [&](std::size_t k) -> std::size_t {
        std::size_t t = 1;
        for (std::size_t a = 0; a < d; ++a) {
            if (t > max_total / k) return max_total + 1;  // would overflow the cap
            t *= k;
        }
        return t;
    };
    std::size_t k = points_per_axis;
    while (k > 2 && total_of(k) > max_total) --k;
    if (total_of(k) > max_total)
        throw std::invalid_argument("lattice: cap too small for 2 points per axis");

    const std::size_t total = total_of(k);
    QuadratureSet q;
    q.tag = QuadratureSet::Provenance::Lattice;
    q.nodes = Matrix(total, d);
    std::vector<std::size_t> digit(d, 0);
    for (std::size_t idx = 0; idx < total; ++idx) {
        for (std::size_t a = 0; a < d; ++a) {
            const double t = static_cast<double>(digit[a]) / static_cast<double>(k - 1);
            q.nodes(idx, a) = space.lo[a] + (space.hi[a] - space.lo[a]) * t;
        }
        for (std::size_t a = d; a-- > 0;) {
            if (++digit[a] < k) break;
            digit[a] = 0;
        }
    }
    return q;
}

double LimitEstimate::max_stderr() const {
    double m = 0.0;
    for (double s : stderr_) m = std::max(m, s);
    return m;
}

Matrix limit_layer(const Aggregation& agg, const Kernel& kernel, const QuadratureSet& quad,
                   const ContinuousSignal& f, const Matrix& queries,
                   const Matrix* f_at_queries) {
    if (agg.kind == AggKind::Custom)
        throw std::invalid_argument("limit_layer: custom aggregations have no declared limit");
    const std::size_t m = quad.size();
    if (m == 0) throw std::invalid_argument("limit_layer: empty quadrature");
    if (f.values.rows() != m) throw std::invalid_argument("limit_layer: node values size mismatch");
    if (f.values.cols() != agg.in_dim())
        throw std::invalid_argument("limit_layer: signal width mismatch");
    const bool attn = agg.kind == AggKind::Attention;
    if (attn && !agg.coeff)
        throw std::invalid_argument("limit_layer: attention without coefficients");
    if (attn && (!f_at_queries || f_at_queries->rows() != queries.rows() ||
                 f_at_queries->cols() != agg.in_dim()))
        throw std::invalid_argument("limit_layer: attention needs the signal at the queries");

    const std::size_t dim = agg.out_dim();
    Matrix messages(m, dim);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(m); ++j)
        agg.psi.apply(f.values.row(static_cast<std::size_t>(j)),
                      messages.row(static_cast<std::size_t>(j)));

    Matrix out(queries.rows(), dim);
    std::atomic<bool> degenerate{false};
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t qq = 0; qq < static_cast<std::ptrdiff_t>(queries.rows()); ++qq) {
        const std::size_t qi = static_cast<std::size_t>(qq);
        const auto x = queries.row(qi);
        bool bad = false;
        combine(
            agg.kind, m, dim,
            [&](std::size_t k) {
                const double w = kernel(x, quad.nodes.row(k));
                return attn ? (*agg.coeff)(f_at_queries->row(qi), f.values.row(k), w) : w;
            },
            [&](std::size_t k) { return messages.row(k).data(); }, out.row(qi), &bad);
        if (bad) degenerate.store(true, std::memory_order_relaxed);
    }
    if (degenerate.load())
        throw std::runtime_error("limit_layer: degenerate denominator (zero weight integral)");
    return out;
}

QuadratureSpec QuadratureSpec::resolved(std::size_t dim) const {
    QuadratureSpec s = *this;
    if (s.kind == Kind::Auto)
        s.kind = dim <= 3 ? Kind::Lattice : Kind::MonteCarlo;
    if (s.kind == Kind::Lattice) s.replicates = 1;
    if (s.replicates == 0) s.replicates = 1;
    return s;
}

LimitEvaluator::LimitEvaluator(Network net, InputMap f0, Kernel kernel, LatentSpace space,
                               QuadratureSpec spec, std::uint64_t seed)
    : net_(std::move(net)),
      f0_(std::move(f0)),
      kernel_(std::move(kernel)),
      space_(std::move(space)),
      spec_(spec.resolved(space_.dim())),
      seed_(seed) {
    net_.validate();
    if (!net_.layers.empty() && net_.layers.front().in_dim() != f0_.out_dim)
        throw std::invalid_argument("LimitEvaluator: input map width mismatch");
    build();
}

void LimitEvaluator::build() {
    quads_.clear();
    tables_.clear();
    const std::size_t reps = spec_.replicates;
    for (std::size_t r = 0; r < reps; ++r) {
        QuadratureSet quad =
            spec_.kind == QuadratureSpec::Kind::Lattice
                ? make_lattice_quadrature(space_, spec_.points_per_axis, spec_.max_nodes)
                : make_monte_carlo_quadrature(space_, spec_.size,
                                              derive_seed(seed_, stream::kQuadrature, r));
        std::vector<Matrix> tables;
        tables.push_back(sample_signal(f0_, quad.nodes));
        // f^(1) .. f^(L-1) at the nodes; the last layer is applied per query.
        for (std::size_t l = 0; l + 1 < net_.depth(); ++l) {
            ContinuousSignal sig{tables.back(), l};
            tables.push_back(
                limit_layer(net_.layers[l], kernel_, quad, sig, quad.nodes, &tables.back()));
        }
        quads_.push_back(std::move(quad));
        tables_.push_back(std::move(tables));
    }
}

std::size_t LimitEvaluator::nodes_per_replicate() const {
    return quads_.empty() ? 0 : quads_.front().size();
}

const Matrix& LimitEvaluator::node_table(std::size_t replicate, std::size_t layer) const {
    return tables_.at(replicate).at(layer);
}

bool LimitEvaluator::refine() {
    if (spec_.kind == QuadratureSpec::Kind::Lattice) {
        const std::size_t next = 2 * spec_.points_per_axis - 1;
        const std::size_t before = nodes_per_replicate();
        QuadratureSpec trial = spec_;
        trial.points_per_axis = next;
        if (make_lattice_quadrature(space_, next, spec_.max_nodes).size() <= before) return false;
        spec_ = trial;
    } else {
        if (spec_.size * 2 > spec_.max_nodes) return false;
        spec_.size *= 2;
    }
    build();
    return true;
}

LimitEstimate LimitEvaluator::evaluate(const Matrix& queries) const {
    const std::size_t q = queries.rows();
    const std::size_t out_dim = net_.layers.empty() ? f0_.out_dim : net_.layers.back().out_dim();
    LimitEstimate est;
    est.values = Matrix(q, out_dim);
    est.stderr_.assign(q, 0.0);
    if (q == 0) return est;

    if (net_.layers.empty()) {
        est.values = sample_signal(f0_, queries);
        return est;
    }

    bool needs_propagation = false;
    for (const auto& layer : net_.layers)
        if (layer.kind == AggKind::Attention) needs_propagation = true;

    const std::size_t reps = tables_.size();
    std::vector<Matrix> per_rep(reps);
    for (std::size_t r = 0; r < reps; ++r) {
        const auto& quad = quads_[r];
        const auto& tables = tables_[r];
        if (needs_propagation) {
            // Attention reads the signal at the query itself, so queries are
            // carried through every layer alongside the node tables.
            Matrix at_queries = sample_signal(f0_, queries);
            for (std::size_t l = 0; l < net_.depth(); ++l) {
                ContinuousSignal sig{tables[l], l};
                at_queries =
                    limit_layer(net_.layers[l], kernel_, quad, sig, queries, &at_queries);
            }
            per_rep[r] = std::move(at_queries);
        } else {
            ContinuousSignal sig{tables.back(), net_.depth() - 1};
            per_rep[r] = limit_layer(net_.layers.back(), kernel_, quad, sig, queries, nullptr);
        }
    }

    for (std::size_t i = 0; i < q; ++i) {
        for (std::size_t d = 0; d < out_dim; ++d) {
            double acc = 0.0;
            for (std::size_t r = 0; r < reps; ++r) acc += per_rep[r](i, d);
            est.values(i, d) = acc / static_cast<double>(reps);
        }
        if (reps > 1) {
            double worst = 0.0;
            for (std::size_t d = 0; d < out_dim; ++d) {
                double ss = 0.0;
                for (std::size_t r = 0; r < reps; ++r) {
                    const double dev = per_rep[r](i, d) - est.values(i, d);
                    ss += dev * dev;
                }
                const double var = ss / static_cast<double>(reps - 1);
                worst = std::max(worst, std::sqrt(var / static_cast<double>(reps)));
            }
            est.stderr_[i] = worst;
        }
    }
    return est;
}

LimitEstimate forward_limit(const Network& net, const InputMap& f0, const Kernel& kernel,
                            const LatentSpace& space, const QuadratureSpec& spec,
                            const Matrix& queries, std::uint64_t seed) {
    return LimitEvaluator(net, f0, kernel, space, spec, seed).evaluate(queries);
}

std::vector<double> closed_form_max_limit(const Network& net, const InputMap& f0,
                                          const Kernel& kernel, const LatentSpace& space) {
    if (!kernel.is_constant() || kernel.c < 0.0)
        throw std::invalid_argument("closed_form_max_limit: kernel must be a nonnegative constant");
    if (!f0.monotone_nondecreasing)
        throw std::invalid_argument("closed_form_max_limit: input map must be nondecreasing");
    for (const auto& layer : net.layers) {
        if (layer.kind != AggKind::MaxConv)
            throw std::invalid_argument("closed_form_max_limit: all layers must be max");
        if (layer.psi.kind == MessageMap::Kind::AffineSigmoid) {
            for (std::size_t i = 0; i < layer.psi.weights.rows(); ++i)
                for (double w : layer.psi.weights.row(i))
                    if (w < 0.0)
                        throw std::invalid_argument(
                            "closed_form_max_limit: message weights must be nonnegative");
        }
    }
    net.validate();
    const auto corner = space.top_corner();
    std::vector<double> v(f0.out_dim);
    f0.apply(corner, v);
    for (const auto& layer : net.layers) {
        std::vector<double> next(layer.out_dim());
        layer.psi.apply(v, next);
        for (double& x : next) x *= kernel.c;
        v = std::move(next);
    }
    return v;
}

std::vector<double> limit_readout(ReadoutKind kind, const ContinuousSignal& f) {
    return apply_readout(kind, f.values);
}

double mae(const Matrix& z, const Matrix& f_at_latents) {
    if (!z.same_shape(f_at_latents)) throw std::invalid_argument("mae: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i)
        m = std::max(m, linf_diff(z.row(i), f_at_latents.row(i)));
    return m;
}

void write_limit_csv(std::ostream& os, const Matrix& queries, const LimitEstimate& est) {
    if (queries.rows() != est.values.rows())
        throw std::invalid_argument("write_limit_csv: query/value size mismatch");
    std::string line = "query_index";
    for (std::size_t k = 1; k <= queries.cols(); ++k) line += ",x_" + std::to_string(k);
    for (std::size_t k = 1; k <= est.values.cols(); ++k) line += ",v_" + std::to_string(k);
    line += ",stderr\n";
    os << line;
    char buf[32];
    auto append = [&](double v) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        line.append(buf, ptr);
    };
    for (std::size_t i = 0; i < queries.rows(); ++i) {
        line = std::to_string(i);
        for (double x : queries.row(i)) {
            line += ',';
            append(x);
        }
        for (double v : est.values.row(i)) {
            line += ',';
            append(v);
        }
        line += ',';
        append(est.stderr_[i]);
        line += '\n';
        os << line;
    }
}

}  // namespace mpgnn
