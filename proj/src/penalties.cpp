#include "dlab/penalties.hpp"

#include "dlab/error.hpp"

#include <cmath>

namespace dlab {

std::string_view penalty_label(PenaltyVariant v) {
    switch (v) {
    case PenaltyVariant::None: return "none";
    case PenaltyVariant::DraganSq: return "dragan_sq";
    case PenaltyVariant::DraganHinge: return "dragan_hinge";
    case PenaltyVariant::DraganEq1: return "dragan_eq1";
    case PenaltyVariant::CoupledGp: return "coupled_gp";
    }
    return "?";
}

PenaltyVariant parse_penalty(std::string_view label) {
    for (auto v : {PenaltyVariant::None, PenaltyVariant::DraganSq, PenaltyVariant::DraganHinge,
                   PenaltyVariant::DraganEq1, PenaltyVariant::CoupledGp})
        if (penalty_label(v) == label) return v;
    throw ValidationError("unknown penalty variant '" + std::string(label) + "'");
}

std::string_view penalty_target_label(PenaltyTarget t) { return t == PenaltyTarget::Logit ? "logit" : "output"; }

PenaltyTarget parse_penalty_target(std::string_view label) {
    if (label == "logit") return PenaltyTarget::Logit;
    if (label == "output") return PenaltyTarget::Output;
    throw ValidationError("unknown penalty target '" + std::string(label) + "'");
}

void PenaltyConfig::validate() const {
    if (!std::isfinite(lambda) || lambda < 0.0) throw ValidationError("penalty.lambda must be finite and >= 0");
    if (!std::isfinite(k) || k < 0.0) throw ValidationError("penalty.k must be finite and >= 0");
    if (!std::isfinite(c) || c <= 0.0) throw ValidationError("penalty.c must be finite and > 0");
}

Node input_gradients(const MlpNodes& d, const Tensor& points, Graph& graph, PenaltyTarget target) {
    if (d.mlp->output_dim() != 1) throw ShapeError("shape error: penalty needs a scalar-output discriminator");
    Node x = graph.constant(points);
    // Rows are independent, so the gradient of the batch sum is the stack of
    // per-example input gradients.
    Node out = sum(mlp_forward(d, x, target == PenaltyTarget::Output));
    return grad(out, x, /*create_graph=*/true);
}

namespace {

Node norm_target_penalty(Node g, double target, double lambda) {
    Node norms = l2norm(g, kNormEps);
    return lambda * mean(square(norms - target));
}

Node finite_rows(Node g) { return check_finite(g, "non-finite penalty"); }

}  // namespace

Node dragan_penalty(const MlpNodes& d, const Tensor& x_real, const PenaltyConfig& cfg, Graph& graph, Rng& rng) {
    cfg.validate();
    if (x_real.rows() == 0) throw ValidationError("dragan_penalty: empty real batch");
    const double sd = std::sqrt(cfg.c);
    Tensor perturbed = x_real;
    for (Eigen::Index r = 0; r < perturbed.rows(); ++r)
        for (Eigen::Index c = 0; c < perturbed.cols(); ++c) perturbed(r, c) += rng.normal(0.0, sd);

    Node g = finite_rows(input_gradients(d, perturbed, graph, cfg.target));
    switch (cfg.variant) {
    case PenaltyVariant::DraganSq: return cfg.lambda * mean(sum_to(square(g), {g.shape().rows, 1}));
    case PenaltyVariant::DraganHinge:
        return cfg.lambda * mean(max0(sum_to(square(g), {g.shape().rows, 1}) - cfg.k));
    case PenaltyVariant::DraganEq1: return norm_target_penalty(g, cfg.k, cfg.lambda);
    default: throw ValidationError("dragan_penalty: variant must be dragan_sq, dragan_hinge or dragan_eq1");
    }
}

Node coupled_penalty(const MlpNodes& d, const Tensor& x_real, const Tensor& x_fake, double lambda, Graph& graph,
                     Rng& rng, PenaltyTarget target) {
    if (x_real.rows() == 0) throw ValidationError("coupled_penalty: empty real batch");
    if (x_real.rows() != x_fake.rows() || x_real.cols() != x_fake.cols())
        throw ShapeError("shape error: coupled_penalty needs equally shaped real and fake batches");
    if (!std::isfinite(lambda) || lambda < 0.0) throw ValidationError("penalty.lambda must be finite and >= 0");
    Tensor mixed(x_real.rows(), x_real.cols());
    for (Eigen::Index r = 0; r < mixed.rows(); ++r) {
        const double eps = rng.uniform();
        mixed.row(r) = eps * x_real.row(r) + (1.0 - eps) * x_fake.row(r);
    }
    Node g = finite_rows(input_gradients(d, mixed, graph, target));
    return norm_target_penalty(g, 1.0, lambda);
}

Node make_penalty(const MlpNodes& d, const Tensor& x_real, const Tensor& x_fake, const PenaltyConfig& cfg,
                  Graph& graph, Rng& rng) {
    switch (cfg.variant) {
    case PenaltyVariant::None: return graph.scalar(0.0);
    case PenaltyVariant::CoupledGp: return coupled_penalty(d, x_real, x_fake, cfg.lambda, graph, rng, cfg.target);
    default: return dragan_penalty(d, x_real, cfg, graph, rng);
    }
}

}  // namespace dlab
