#include "dlab/objectives.hpp"

#include "dlab/error.hpp"

namespace dlab {

std::string_view divergence_label(Divergence d) {
    switch (d) {
    case Divergence::ForwardKl: return "forward_kl";
    case Divergence::ReverseKl: return "reverse_kl";
    case Divergence::PearsonChi2: return "pearson_chi2";
    case Divergence::SquaredHellinger: return "squared_hellinger";
    case Divergence::TotalVariation: return "total_variation";
    }
    return "?";
}

ObjectiveKind ObjectiveKind::parse(std::string_view label) {
    if (label == "vanilla") return {Variant::Vanilla, Divergence::ForwardKl};
    if (label == "wgan") return {Variant::Wgan, Divergence::ForwardKl};
    for (auto d : {Divergence::ForwardKl, Divergence::ReverseKl, Divergence::PearsonChi2,
                   Divergence::SquaredHellinger, Divergence::TotalVariation})
        if (divergence_label(d) == label) return {Variant::Fgan, d};
    throw ValidationError("unknown objective '" + std::string(label) + "'");
}

std::string ObjectiveKind::label() const {
    switch (variant) {
    case Variant::Vanilla: return "vanilla";
    case Variant::Wgan: return "wgan";
    case Variant::Fgan: return std::string(divergence_label(divergence));
    }
    return "?";
}

namespace {

void check_batches(Node a, Node b) {
    if (a.shape().cols != 1 || b.shape().cols != 1)
        throw ShapeError("shape error: discriminator outputs must be n x 1 columns");
}

}  // namespace

LossPair vanilla_losses(Node d_real, Node d_fake, bool non_saturating) {
    check_batches(d_real, d_fake);
    Node d_loss = -mean(log(d_real)) - mean(log(-d_fake + 1.0));
    Node g_loss = non_saturating ? -mean(log(d_fake)) : -d_loss;
    return {d_loss, g_loss};
}

LossPair wgan_losses(Node d_real, Node d_fake) {
    check_batches(d_real, d_fake);
    return {mean(d_fake) - mean(d_real), -mean(d_fake)};
}

Node fgan_activation(Divergence kind, Node t) {
    switch (kind) {
    case Divergence::ForwardKl: return t;
    case Divergence::ReverseKl: return -exp(-t);
    case Divergence::PearsonChi2: return t;
    case Divergence::SquaredHellinger: return -exp(-t) + 1.0;
    case Divergence::TotalVariation: return 0.5 * tanh(t);
    }
    throw ValidationError("unknown divergence");
}

Node fgan_conjugate(Divergence kind, Node u) {
    switch (kind) {
    case Divergence::ForwardKl: return exp(u - 1.0);
    case Divergence::ReverseKl: return -log(-u) - 1.0;
    case Divergence::PearsonChi2: return 0.25 * square(u) + u;
    case Divergence::SquaredHellinger: return u / (-u + 1.0);
    case Divergence::TotalVariation: return u;
    }
    throw ValidationError("unknown divergence");
}

LossPair fgan_losses(Divergence kind, Node t_real, Node t_fake, bool non_saturating) {
    check_batches(t_real, t_fake);
    Node objective = mean(fgan_activation(kind, t_real)) - mean(fgan_conjugate(kind, fgan_activation(kind, t_fake)));
    Node d_loss = -objective;
    Node g_loss = non_saturating ? -mean(fgan_activation(kind, t_fake)) : -d_loss;
    return {d_loss, g_loss};
}

LossPair make_losses(const ObjectiveKind& kind, Node d_real, Node d_fake, bool non_saturating) {
    switch (kind.variant) {
    case ObjectiveKind::Variant::Vanilla: return vanilla_losses(d_real, d_fake, non_saturating);
    case ObjectiveKind::Variant::Wgan: return wgan_losses(d_real, d_fake);
    case ObjectiveKind::Variant::Fgan: return fgan_losses(kind.divergence, d_real, d_fake, non_saturating);
    }
    throw ValidationError("unknown objective variant");
}

Activation discriminator_head(const ObjectiveKind& kind) {
    return kind.variant == ObjectiveKind::Variant::Vanilla ? Activation::Sigmoid : Activation::Identity;
}

}  // namespace dlab
