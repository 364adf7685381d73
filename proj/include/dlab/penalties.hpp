#pragma once

#include "dlab/diffgraph.hpp"
#include "dlab/nets.hpp"
#include "dlab/rng.hpp"

#include <string>
#include <string_view>

namespace dlab {

enum class PenaltyVariant { None, DraganSq, DraganHinge, DraganEq1, CoupledGp };

// Which scalar the input gradient is taken of: the pre-activation score of
// D's last layer, or D's full output including its head.
enum class PenaltyTarget { Logit, Output };

std::string_view penalty_label(PenaltyVariant v);
PenaltyVariant parse_penalty(std::string_view label);
std::string_view penalty_target_label(PenaltyTarget t);
PenaltyTarget parse_penalty_target(std::string_view label);

struct PenaltyConfig {
    PenaltyVariant variant = PenaltyVariant::None;
    double lambda = 10.0;
    double k = 1.0;   // target gradient norm; unused by dragan_sq, 1 for coupled_gp
    double c = 10.0;  // perturbation covariance scale: delta ~ N(0, c I)
    PenaltyTarget target = PenaltyTarget::Logit;

    void validate() const;
};

// Norm stabilizer used whenever a gradient norm feeds a penalty.
inline constexpr double kNormEps = 1e-12;

// Local penalty around real samples. Draws delta ~ N(0, c I) per example,
// differentiates D at x + delta w.r.t. its input (keeping that gradient in the
// graph), and returns
//   dragan_sq:    lambda * mean(|g|^2)
//   dragan_hinge: lambda * mean(max(0, |g|^2 - k))
//   dragan_eq1:   lambda * mean((|g| - k)^2)
// The node depends on D's parameter nodes, so it can be added to d_loss and
// differentiated again.
Node dragan_penalty(const MlpNodes& d, const Tensor& x_real, const PenaltyConfig& cfg, Graph& graph, Rng& rng);

// Coupled (WGAN-GP) penalty on x_hat = eps x_real + (1 - eps) x_fake with
// eps ~ U(0,1) per pair: lambda * mean((|grad D(x_hat)| - 1)^2).
Node coupled_penalty(const MlpNodes& d, const Tensor& x_real, const Tensor& x_fake, double lambda, Graph& graph,
                     Rng& rng, PenaltyTarget target = PenaltyTarget::Logit);

// Dispatch on cfg.variant; None yields a constant zero.
Node make_penalty(const MlpNodes& d, const Tensor& x_real, const Tensor& x_fake, const PenaltyConfig& cfg,
                  Graph& graph, Rng& rng);

// Per-example input gradients of D at the rows of `points`, as graph nodes
// (create_graph semantics). Identical targets for identity heads.
Node input_gradients(const MlpNodes& d, const Tensor& points, Graph& graph,
                     PenaltyTarget target = PenaltyTarget::Logit);

}  // namespace dlab
