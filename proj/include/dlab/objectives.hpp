#pragma once

#include "dlab/diffgraph.hpp"
#include "dlab/nets.hpp"

#include <string>
#include <string_view>

namespace dlab {

enum class Divergence { ForwardKl, ReverseKl, PearsonChi2, SquaredHellinger, TotalVariation };

struct ObjectiveKind {
    enum class Variant { Vanilla, Wgan, Fgan };
    Variant variant = Variant::Vanilla;
    Divergence divergence = Divergence::ForwardKl;  // used when variant == Fgan

    // Labels: vanilla, wgan, forward_kl, reverse_kl, pearson_chi2,
    // squared_hellinger, total_variation.
    static ObjectiveKind parse(std::string_view label);
    std::string label() const;

    bool operator==(const ObjectiveKind&) const = default;
};

std::string_view divergence_label(Divergence d);

// The discriminator minimizes d_loss, the generator minimizes g_loss.
struct LossPair {
    Node d_loss;
    Node g_loss;
};

// d_loss = -mean(log d_real) - mean(log(1 - d_fake)); g_loss = -d_loss.
// Inputs are clamped sigmoid outputs; anything outside (0,1) surfaces as a
// DomainError during evaluation. With non_saturating, g_loss = -mean(log d_fake).
LossPair vanilla_losses(Node d_real, Node d_fake, bool non_saturating = false);

// d_loss = mean(d_fake) - mean(d_real); g_loss = -mean(d_fake).
LossPair wgan_losses(Node d_real, Node d_fake);

// Output activation g_f and convex conjugate f* of each divergence.
Node fgan_activation(Divergence kind, Node t);
Node fgan_conjugate(Divergence kind, Node u);

// objective = mean(g_f(t_real)) - mean(f*(g_f(t_fake)));
// d_loss = -objective, g_loss = objective (zero-sum). With non_saturating,
// g_loss = -mean(g_f(t_fake)).
LossPair fgan_losses(Divergence kind, Node t_real, Node t_fake, bool non_saturating = false);

LossPair make_losses(const ObjectiveKind& kind, Node d_real, Node d_fake, bool non_saturating = false);

// Discriminator output head the objective expects.
Activation discriminator_head(const ObjectiveKind& kind);

}  // namespace dlab
