#include "mpgnn/bounds.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace mpgnn {

double mcdiarmid_bound(std::span<const double> c, std::size_t out_dim, double rho) {
    if (rho <= 0.0) throw std::invalid_argument("mcdiarmid_bound: rho must be positive");
    if (out_dim == 0) throw std::invalid_argument("mcdiarmid_bound: out_dim must be positive");
    double sum_sq = 0.0;
    for (double ci : c) {
        if (ci < 0.0) throw std::invalid_argument("mcdiarmid_bound: negative bounded difference");
        sum_sq += ci * ci;
    }
    const double log_term = std::max(0.0, std::log(2.0 * static_cast<double>(out_dim) / rho));
    return std::sqrt(0.5 * sum_sq * log_term);
}

BoundBreakdown mcdiarmid_network_bounds(const McDiarmidInputs& in,
                                        const RegularityConstants& reg) {
    const std::size_t L = in.D.size();
    if (L == 0) throw std::invalid_argument("mcdiarmid_network_bounds: no layers");
    if (in.a.size() != L || in.widths.size() != L || reg.mu_F.size() != L ||
        reg.lambda_F.size() != L)
        throw std::invalid_argument("mcdiarmid_network_bounds: per-layer size mismatch");
    if (!(in.rho > 0.0 && in.rho <= 1.0))
        throw std::invalid_argument("mcdiarmid_network_bounds: rho must lie in (0,1]");
    const double n = static_cast<double>(in.n);

    auto equivariant = [&](double rho, std::vector<double>* terms) {
        // prefactor A^{(l,L)} accumulated from the top layer downwards
        std::vector<double> prefix(L, 1.0);
        for (std::size_t l = L - 1; l-- > 0;)
            prefix[l] = prefix[l + 1] * (reg.mu_F[l + 1] + reg.lambda_F[l + 1]);
        double total = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            const double exponent = static_cast<double>(L + 2 - (l + 1));
            const double log_arg =
                std::exp2(exponent) * n * static_cast<double>(in.widths[l]) / rho;
            const double dev = in.D[l] * std::sqrt(0.5 * n * std::max(0.0, std::log(log_arg)));
            const double term = prefix[l] * (dev + in.a[l]);
            if (terms) terms->push_back(term);
            total += term;
        }
        return total;
    };

    BoundBreakdown out;
    out.total_equivariant = equivariant(in.rho, &out.per_layer);
    const double readout_dev =
        in.C_n * std::sqrt(0.5 * n *
                           std::max(0.0, std::log(4.0 * static_cast<double>(in.widths.back()) /
                                                  in.rho)));
    out.readout_term = readout_dev + in.b_n;
    out.total_invariant = reg.lambda_R * equivariant(in.rho / 2.0, nullptr) + out.readout_term;
    out.min_rho = 0.0;
    return out;
}

VolumeRetention VolumeRetention::hypercube(std::size_t d) {
    if (d == 0) throw std::invalid_argument("VolumeRetention: dimension must be >= 1");
    return {1.0, std::exp2(-static_cast<double>(d)), d};
}

namespace {

double lemma_min_rho(std::size_t n, const VolumeRetention& vr) {
    const double d = static_cast<double>(vr.dim);
    return std::exp(-static_cast<double>(n) * vr.kappa * std::pow(vr.r0, d) * std::exp2(d));
}

}  // namespace

double max_concentration_bound(double lambda_g, std::size_t out_dim, const VolumeRetention& vr,
                               std::size_t n, double rho) {
    if (lambda_g < 0.0) throw std::invalid_argument("max_concentration_bound: negative Lipschitz");
    if (!(rho > 0.0 && rho < 1.0))
        throw std::invalid_argument("max_concentration_bound: rho must lie in (0,1)");
    const double min_rho = lemma_min_rho(n, vr);
    if (rho < min_rho) throw ValidityWindowError(min_rho);
    const double d = static_cast<double>(vr.dim);
    const double inner =
        std::log(static_cast<double>(out_dim) / rho) / (static_cast<double>(n) * vr.kappa);
    return 0.5 * lambda_g * std::pow(inner, 1.0 / d);
}

std::vector<double> lipschitz_cascade(const MaxBoundInputs& in) {
    const std::size_t L = in.lambda_psi.size();
    if (in.psi_comp_sup.size() != L)
        throw std::invalid_argument("lipschitz_cascade: per-layer size mismatch");
    std::vector<double> lam(L);
    double prev = in.lambda_f0;
    for (std::size_t l = 0; l < L; ++l) {
        lam[l] = in.lambda_psi[l] * prev + in.psi_comp_sup[l] * in.lambda_W;
        prev = lam[l];
    }
    return lam;
}

double max_bound_min_rho(std::size_t n, std::size_t layers, const VolumeRetention& vr) {
    return std::exp2(static_cast<double>(layers) - 1.0) * static_cast<double>(n) *
           lemma_min_rho(n, vr);
}

BoundBreakdown max_network_bounds(const MaxBoundInputs& in) {
    const std::size_t L = in.lambda_psi.size();
    if (L == 0) throw std::invalid_argument("max_network_bounds: no layers");
    if (in.widths.size() != L)
        throw std::invalid_argument("max_network_bounds: per-layer size mismatch");
    if (!(in.rho > 0.0 && in.rho < 1.0))
        throw std::invalid_argument("max_network_bounds: rho must lie in (0,1)");
    const double min_rho = max_bound_min_rho(in.n, L, in.vr);
    if (in.rho < min_rho) throw ValidityWindowError(min_rho);

    const std::vector<double> lam_f = lipschitz_cascade(in);
    const double n = static_cast<double>(in.n);
    const double d = static_cast<double>(in.vr.dim);

    auto equivariant = [&](double rho, std::vector<double>* terms) {
        std::vector<double> prefix(L, 1.0);  // B^{(l,L)}
        for (std::size_t l = L - 1; l-- > 0;) prefix[l] = prefix[l + 1] * in.lambda_psi[l + 1];
        double total = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            const double exponent = static_cast<double>(L + 1 - (l + 1));
            const double log_arg =
                std::exp2(exponent) * n * static_cast<double>(in.widths[l]) / rho;
            const double inner = std::max(0.0, std::log(log_arg)) / (n * in.vr.kappa);
            const double term = prefix[l] * 0.5 * lam_f[l] * std::pow(inner, 1.0 / d);
            if (terms) terms->push_back(term);
            total += term;
        }
        return total;
    };

    BoundBreakdown out;
    out.min_rho = min_rho;
    out.total_equivariant = equivariant(in.rho, &out.per_layer);
    // The invariant split evaluates the equivariant part at rho/2, so its
    // window is twice as wide; report but do not fail when only the
    // invariant side is out of range.
    const double inner_r =
        std::max(0.0, std::log(2.0 * static_cast<double>(in.widths.back()) / in.rho)) /
        (n * in.vr.kappa);
    out.readout_term = 0.5 * lam_f.back() * std::pow(inner_r, 1.0 / d);
    if (in.rho / 2.0 >= min_rho) {
        out.total_invariant = equivariant(in.rho / 2.0, nullptr) + out.readout_term;
    } else {
        out.total_invariant = std::numeric_limits<double>::infinity();
    }
    return out;
}

ExampleConstants example_constants(AggKind kind, const ExampleParams& p) {
    if (p.n < 2) throw std::invalid_argument("example_constants: n must be >= 2");
    const double nm1 = static_cast<double>(p.n - 1);
    ExampleConstants out;
    switch (kind) {
        case AggKind::MeanConv:
            out.mu_F = 0.0;
            out.lambda_F = std::max(p.lambda_psi, p.psi_sup);
            out.D_n = 2.0 * p.psi_sup / nm1;
            out.a_n_tag = ExpectationGapTag::Zero;
            return out;
        case AggKind::DegreeNormalized:
            if (!(p.alpha > 0.0))
                throw std::invalid_argument("example_constants: degnorm needs alpha > 0");
            out.mu_F = 0.0;
            out.lambda_F = std::max(p.lambda_psi, 2.0 * p.psi_sup) / (p.alpha * p.alpha);
            out.D_n = (2.0 * p.lambda_psi * p.f_sup + 4.0 * p.psi_sup) / (nm1 * p.alpha * p.alpha);
            out.a_n_tag = ExpectationGapTag::OneOverSqrtN;
            return out;
        case AggKind::Attention:
            if (!(p.alpha > 0.0) || !(p.beta >= p.alpha))
                throw std::invalid_argument("example_constants: attention needs 0 < alpha <= beta");
            out.mu_F = 2.0 * p.beta * p.psi_sup * p.lambda_c / (p.alpha * p.alpha);
            out.lambda_F = p.beta * std::max(p.beta * p.lambda_psi, 2.0 * p.psi_sup * p.lambda_c) /
                           (p.alpha * p.alpha);
            out.D_n = (2.0 * p.lambda_psi * p.f_sup * p.beta + 4.0 * p.psi_sup * p.beta) /
                      (nm1 * p.alpha * p.alpha);
            out.a_n_tag = ExpectationGapTag::OneOverSqrtN;
            return out;
        case AggKind::MaxConv:
            throw std::invalid_argument(
                "example_constants: max aggregation has no sharp bounded differences");
        case AggKind::Custom:
            throw std::invalid_argument("example_constants: no constants for custom aggregations");
    }
    return out;
}

double expectation_gap_envelope(AggKind kind, const ExampleParams& p, std::size_t out_dim,
                                std::size_t n) {
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    const double dl = static_cast<double>(out_dim);
    switch (kind) {
        case AggKind::MeanConv:
            return 0.0;
        case AggKind::DegreeNormalized:
            return p.psi_sup * (2.0 * dl + 1.0) / (2.0 * p.alpha * p.alpha * sqrt_n);
        case AggKind::Attention:
            return p.beta * p.psi_sup * (2.0 * dl + 1.0) / (2.0 * p.alpha * p.alpha * sqrt_n);
        default:
            throw std::invalid_argument("expectation_gap_envelope: unsupported aggregation");
    }
}

namespace {

struct BoundedDiffProbe {
    const Aggregation& agg;
    const Kernel& kernel;
    const InputMap& f;
    std::size_t n;

    /// Output of the (n-1)-neighbor aggregation around anchor x1, with
    /// neighbor latents supplied explicitly.
    std::vector<double> eval(std::span<const double> x1,
                             const std::vector<std::span<const double>>& latents,
                             Matrix& state_buf) const {
        std::vector<Neighbor> nbs(latents.size());
        for (std::size_t k = 0; k < latents.size(); ++k) {
            f.apply(latents[k], state_buf.row(k));
            nbs[k] = {state_buf.row(k), kernel(x1, latents[k])};
        }
        std::vector<double> self(f.out_dim);
        Matrix self_buf(1, f.out_dim);
        f.apply(x1, self_buf.row(0));
        return aggregate(agg, self_buf.row(0), nbs);
    }
};

}  // namespace

double estimate_bounded_difference(const Aggregation& agg, const Kernel& kernel, const InputMap& f,
                                   const LatentSpace& space, std::size_t n, std::size_t trials,
                                   std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("estimate_bounded_difference: n must be >= 2");
    const std::size_t m = n - 1;  // neighbor count
    BoundedDiffProbe probe{agg, kernel, f, n};
    Matrix state_buf(m, f.out_dim);
    double best = 0.0;

    auto record = [&](std::span<const double> x1, std::vector<std::span<const double>>& lats,
                      std::size_t j, std::span<const double> replacement) {
        const std::vector<double> base = probe.eval(x1, lats, state_buf);
        const std::span<const double> saved = lats[j];
        lats[j] = replacement;
        const std::vector<double> perturbed = probe.eval(x1, lats, state_buf);
        lats[j] = saved;
        best = std::max(best, linf_diff(base, perturbed));
    };

    // Random phase: i.i.d. bases, one coordinate resampled. The perturbed
    // index is either uniform or the argmax contributor of output
    // coordinate 0, which is the one that matters for max aggregation.
    const std::size_t random_trials = trials / 2;
    LatentSampler ls;
    for (std::size_t t = 0; t < random_trials; ++t) {
        ls.seed = derive_seed(seed, stream::kEstimator, 1, t);
        const Matrix pts = sample_latents(ls, space, n + 1);
        std::vector<std::span<const double>> lats(m);
        for (std::size_t k = 0; k < m; ++k) lats[k] = pts.row(k + 1);
        const std::span<const double> x1 = pts.row(0);
        const std::span<const double> fresh = pts.row(n);

        SplitMix64 pick(derive_seed(seed, stream::kEstimator, 2, t));
        record(x1, lats, pick.below(m), fresh);
        if (agg.kind != AggKind::Custom) {
            // argmax contributor of coordinate 0
            std::size_t jstar = 0;
            double vstar = -std::numeric_limits<double>::infinity();
            Matrix msg(1, agg.out_dim());
            Matrix st(1, f.out_dim);
            for (std::size_t k = 0; k < m; ++k) {
                f.apply(lats[k], st.row(0));
                agg.psi.apply(st.row(0), msg.row(0));
                const double v = kernel(x1, lats[k]) * msg(0, 0);
                if (v > vstar) {
                    vstar = v;
                    jstar = k;
                }
            }
            record(x1, lats, jstar, fresh);
        }
    }

    // Clustered phase: all background neighbors sit at one pool point while
    // the perturbed coordinate moves between integrand extremes. This is
    // what exposes order-one swings of the max aggregation.
    const std::size_t pool_size = std::clamp<std::size_t>(trials / 4, 16, 1024);
    ls.seed = derive_seed(seed, stream::kEstimator, 3);
    const Matrix pool = sample_latents(ls, space, pool_size + 4);
    if (agg.kind != AggKind::Custom) {
        Matrix st(1, f.out_dim);
        Matrix msg(pool_size, agg.out_dim());
        for (std::size_t a = 0; a < 4; ++a) {
            const std::span<const double> x1 = pool.row(pool_size + a);
            for (std::size_t k = 0; k < pool_size; ++k) {
                f.apply(pool.row(k), st.row(0));
                agg.psi.apply(st.row(0), msg.row(k));
                const double w = kernel(x1, pool.row(k));
                for (std::size_t dcol = 0; dcol < msg.cols(); ++dcol) msg(k, dcol) *= w;
            }
            for (std::size_t dcol = 0; dcol < msg.cols(); ++dcol) {
                std::size_t kmin = 0, kmax = 0;
                for (std::size_t k = 1; k < pool_size; ++k) {
                    if (msg(k, dcol) < msg(kmin, dcol)) kmin = k;
                    if (msg(k, dcol) > msg(kmax, dcol)) kmax = k;
                }
                std::vector<std::span<const double>> lats(m, pool.row(kmin));
                lats[0] = pool.row(kmax);
                record(x1, lats, 0, pool.row(kmin));
            }
        }
    }
    return best;
}

namespace {

bool lemma_fail(LemmaReport* report, const std::string& what) {
    report->passed = false;
    report->failure = what;
    return false;
}

}  // namespace

LemmaReport lemma_checks(std::size_t instances, std::uint64_t seed) {
    LemmaReport report;
    report.instances = instances;
    SplitMix64 g(derive_seed(seed, stream::kSuite, 90));
    for (std::size_t t = 0; t < instances && report.passed; ++t) {
        const std::size_t count = 1 + g.below(8);
        const std::size_t dim = 1 + g.below(6);
        Matrix a(count, dim), b(count, dim);
        for (std::size_t i = 0; i < count; ++i)
            for (std::size_t k = 0; k < dim; ++k) {
                a(i, k) = g.uniform(-1.0, 1.0);
                b(i, k) = g.uniform(-1.0, 1.0);
            }
        std::vector<double> max_a(dim, -std::numeric_limits<double>::infinity());
        std::vector<double> max_b(dim, -std::numeric_limits<double>::infinity());
        double max_norm_a = 0.0, max_gap = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            for (std::size_t k = 0; k < dim; ++k) {
                max_a[k] = std::max(max_a[k], a(i, k));
                max_b[k] = std::max(max_b[k], b(i, k));
            }
            max_norm_a = std::max(max_norm_a, linf_norm(a.row(i)));
            max_gap = std::max(max_gap, linf_diff(a.row(i), b.row(i)));
        }
        if (linf_norm(max_a) > max_norm_a + 1e-15)
            lemma_fail(&report, "(i) |max a|_inf exceeded max |a_i|_inf");
        else if (linf_diff(max_a, max_b) > max_gap + 1e-15)
            lemma_fail(&report, "(ii) |max a - max b|_inf exceeded max |a_i - b_i|_inf");
    }

    // (iii) x -> max over a grid of g(x, y) with g(x,y) = A sin(a x + b y + phi)
    SplitMix64 h(derive_seed(seed, stream::kSuite, 91));
    const std::size_t grid = 101;
    for (std::size_t t = 0; t < instances && report.passed; ++t) {
        const double amp = h.uniform(-2.0, 2.0);
        const double fa = h.uniform(-4.0, 4.0);
        const double fb = h.uniform(-4.0, 4.0);
        const double phase = h.uniform(0.0, 6.283185307179586);
        const double lambda_g = std::abs(amp * fa);
        auto sup_over_grid = [&](double x) {
            double m = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < grid; ++k) {
                const double y = static_cast<double>(k) / static_cast<double>(grid - 1);
                m = std::max(m, amp * std::sin(fa * x + fb * y + phase));
            }
            return m;
        };
        const double x1 = h.uniform01();
        double x2 = h.uniform01();
        if (std::abs(x1 - x2) < 1e-3) x2 = x1 + (x2 >= x1 ? 1e-3 : -1e-3);
        const double quotient = std::abs(sup_over_grid(x1) - sup_over_grid(x2)) / std::abs(x1 - x2);
        if (quotient > lambda_g * (1.0 + 1e-6))
            lemma_fail(&report, "(iii) sup difference quotient exceeded lambda_g");
    }
    return report;
}

void mean_family_bound_inputs(const Network& net, const Kernel& kernel, double input_sup,
                              std::size_t n, double rho, McDiarmidInputs* inputs,
                              RegularityConstants* reg) {
    const std::size_t L = net.depth();
    if (L == 0) throw std::invalid_argument("mean_family_bound_inputs: empty network");
    *inputs = McDiarmidInputs{};
    *reg = RegularityConstants{};
    inputs->n = n;
    inputs->rho = rho;
    reg->alpha = kernel.lower_bound;
    reg->lambda_W = kernel.lipschitz;
    double layer_input_sup = input_sup;
    for (std::size_t l = 0; l < L; ++l) {
        const Aggregation& layer = net.layers[l];
        ExampleParams p;
        p.lambda_psi = layer.psi.lipschitz_bound();
        p.psi_sup = layer.psi.sup_bound();
        if (!std::isfinite(p.psi_sup))
            throw std::invalid_argument("mean_family_bound_inputs: unbounded message map");
        p.f_sup = layer_input_sup;
        p.n = n;
        if (layer.kind == AggKind::Attention) {
            if (!layer.coeff) throw std::invalid_argument("attention layer without coefficients");
            p.alpha = layer.coeff->alpha_c;
            p.beta = layer.coeff->beta_c;
            p.lambda_c = layer.coeff->lambda_c;
        } else {
            p.alpha = kernel.lower_bound;
            p.beta = 1.0;
        }
        const ExampleConstants ec = example_constants(layer.kind, p);
        inputs->D.push_back(ec.D_n);
        inputs->a.push_back(ec.a_n_tag == ExpectationGapTag::Zero
                                ? 0.0
                                : expectation_gap_envelope(layer.kind, p, layer.out_dim(),
                                                           n > 1 ? n - 1 : 1));
        inputs->widths.push_back(layer.out_dim());
        reg->mu_F.push_back(ec.mu_F);
        reg->lambda_F.push_back(ec.lambda_F);
        reg->lambda_psi.push_back(p.lambda_psi);
        reg->psi_sup.push_back(p.psi_sup);
        layer_input_sup = p.psi_sup;
    }
    reg->lambda_R = 1.0;
    reg->f_sup = input_sup;
    inputs->b_n = 0.0;
    // Mean readout over n samples moves by at most 2 |f^{(L)}|_inf / n when
    // one latent is resampled.
    inputs->C_n = 2.0 * layer_input_sup / static_cast<double>(n);
}

MaxBoundInputs max_family_bound_inputs(const Network& net, const Kernel& kernel,
                                       const InputMap& f0, const VolumeRetention& vr,
                                       std::size_t n, double rho) {
    MaxBoundInputs in;
    in.vr = vr;
    in.n = n;
    in.rho = rho;
    in.lambda_f0 = f0.lipschitz;
    in.lambda_W = kernel.lipschitz;
    for (const Aggregation& layer : net.layers) {
        if (layer.kind != AggKind::MaxConv)
            throw std::invalid_argument("max_family_bound_inputs: network is not max-aggregated");
        in.lambda_psi.push_back(layer.psi.lipschitz_bound());
        const double sup = layer.psi.sup_bound();
        in.psi_comp_sup.push_back(std::isfinite(sup) ? sup : f0.sup_bound);
        in.widths.push_back(layer.out_dim());
    }
    return in;
}

namespace {

nlohmann::json breakdown_json(const BoundBreakdown& b) {
    return {{"per_layer_terms", b.per_layer},
            {"readout_term", b.readout_term},
            {"total_equivariant", b.total_equivariant},
            {"total_invariant", b.total_invariant},
            {"validity", {{"ok", true}, {"min_rho", b.min_rho}}}};
}

nlohmann::json invalid_json(const ValidityWindowError& e) {
    return {{"validity", {{"ok", false}, {"min_rho", e.min_rho}}}};
}

}  // namespace

std::string bound_report_json(const McDiarmidInputs& in, const RegularityConstants& reg) {
    nlohmann::json j;
    j["path"] = "mcdiarmid";
    j["inputs"] = {{"n", in.n},     {"rho", in.rho},      {"D", in.D},
                   {"a", in.a},     {"b_n", in.b_n},      {"C_n", in.C_n},
                   {"widths", in.widths}, {"mu_F", reg.mu_F}, {"lambda_F", reg.lambda_F},
                   {"lambda_R", reg.lambda_R}};
    try {
        j.update(breakdown_json(mcdiarmid_network_bounds(in, reg)));
    } catch (const ValidityWindowError& e) {
        j.update(invalid_json(e));
    }
    return j.dump(2);
}

std::string bound_report_json(const MaxBoundInputs& in) {
    nlohmann::json j;
    j["path"] = "max";
    j["inputs"] = {{"n", in.n},
                   {"rho", in.rho},
                   {"lambda_psi", in.lambda_psi},
                   {"psi_comp_sup", in.psi_comp_sup},
                   {"lambda_f0", in.lambda_f0},
                   {"lambda_W", in.lambda_W},
                   {"widths", in.widths},
                   {"volume_retention", {{"r0", in.vr.r0}, {"kappa", in.vr.kappa}, {"dim", in.vr.dim}}}};
    j["lipschitz_cascade"] = lipschitz_cascade(in);
    try {
        j.update(breakdown_json(max_network_bounds(in)));
    } catch (const ValidityWindowError& e) {
        j.update(invalid_json(e));
    }
    return j.dump(2);
}

}  // namespace mpgnn
