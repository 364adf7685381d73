#include "dlab/error.hpp"
#include "dlab/objectives.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace dlab;

namespace {

Tensor col(std::vector<double> v) {
    Tensor t(static_cast<Eigen::Index>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) t(static_cast<Eigen::Index>(i), 0) = v[i];
    return t;
}

struct Evaluated {
    double d_loss;
    double g_loss;
};

template <class F>
Evaluated run(F make, const Tensor& real, const Tensor& fake) {
    Graph g;
    const LossPair p = make(g.constant(real), g.constant(fake));
    const Values v = eval_forward(g);
    return {v.scalar(p.d_loss), v.scalar(p.g_loss)};
}

// Conjugate pairs written out independently of the library.
double ref_activation(Divergence d, double t) {
    switch (d) {
    case Divergence::ForwardKl: return t;
    case Divergence::ReverseKl: return -std::exp(-t);
    case Divergence::PearsonChi2: return t;
    case Divergence::SquaredHellinger: return 1.0 - std::exp(-t);
    case Divergence::TotalVariation: return 0.5 * std::tanh(t);
    }
    return 0.0;
}

double ref_conjugate(Divergence d, double u) {
    switch (d) {
    case Divergence::ForwardKl: return std::exp(u - 1.0);
    case Divergence::ReverseKl: return -1.0 - std::log(-u);
    case Divergence::PearsonChi2: return u * u / 4.0 + u;
    case Divergence::SquaredHellinger: return u / (1.0 - u);
    case Divergence::TotalVariation: return u;
    }
    return 0.0;
}

const Divergence kAll[] = {Divergence::ForwardKl, Divergence::ReverseKl, Divergence::PearsonChi2,
                           Divergence::SquaredHellinger, Divergence::TotalVariation};

double fgan_objective(Divergence d, double t_real, double t_fake) {
    const auto e = run([d](Node r, Node f) { return fgan_losses(d, r, f); }, col({t_real}), col({t_fake}));
    return -e.d_loss;
}

}  // namespace

TEST_CASE("labels round trip") {
    for (const char* l :
         {"vanilla", "wgan", "forward_kl", "reverse_kl", "pearson_chi2", "squared_hellinger", "total_variation"})
        CHECK(ObjectiveKind::parse(l).label() == l);
    CHECK_THROWS_AS(ObjectiveKind::parse("jensen_shannon"), ValidationError);
    CHECK(discriminator_head(ObjectiveKind::parse("vanilla")) == Activation::Sigmoid);
    CHECK(discriminator_head(ObjectiveKind::parse("wgan")) == Activation::Identity);
    CHECK(discriminator_head(ObjectiveKind::parse("reverse_kl")) == Activation::Identity);
}

TEST_CASE("vanilla losses") {
    auto vanilla = [](Node r, Node f) { return vanilla_losses(r, f); };
    const Evaluated half = run(vanilla, col({0.5, 0.5, 0.5}), col({0.5, 0.5}));
    CHECK(half.d_loss == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
    CHECK(half.d_loss == doctest::Approx(1.3863).epsilon(1e-4));

    const double eps = 1e-7;
    const Evaluated perfect = run(vanilla, col({1 - eps, 1 - eps}), col({eps, eps}));
    CHECK(perfect.d_loss >= 0.0);
    CHECK(perfect.d_loss <= 1e-6);

    const std::vector<double> r{0.9, 0.3, 0.65, 0.01}, f{0.2, 0.999, 0.4};
    double ref = 0.0;
    for (double v : r) ref -= std::log(v) / r.size();
    for (double v : f) ref -= std::log(1.0 - v) / f.size();
    const Evaluated mixed = run(vanilla, col(r), col(f));
    CHECK(mixed.d_loss == doctest::Approx(ref).epsilon(1e-14));
    CHECK(mixed.d_loss + mixed.g_loss == 0.0);
}

TEST_CASE("vanilla generator loss is the negated discriminator loss node") {
    Graph g;
    const LossPair p = vanilla_losses(g.constant(col({0.7})), g.constant(col({0.2})));
    const NodeRecord& rec = g.record(p.g_loss);
    CHECK(rec.op == Op::Neg);
    CHECK(rec.parents[0] == p.d_loss.id());
}

TEST_CASE("vanilla non-saturating generator loss") {
    const Evaluated e =
        run([](Node r, Node f) { return vanilla_losses(r, f, true); }, col({0.7, 0.8}), col({0.2, 0.4}));
    CHECK(e.g_loss == doctest::Approx(-(std::log(0.2) + std::log(0.4)) / 2.0).epsilon(1e-15));
}

TEST_CASE("vanilla domain guard") {
    auto vanilla = [](Node r, Node f) { return vanilla_losses(r, f); };
    CHECK_THROWS_AS(run(vanilla, col({0.0}), col({0.5})), DomainError);
    CHECK_THROWS_AS(run(vanilla, col({0.5}), col({1.0})), DomainError);
    CHECK_THROWS_AS(run(vanilla, col({-0.1}), col({0.5})), DomainError);
}

TEST_CASE("vanilla gradient sanity: more confidence on real data lowers the loss") {
    Graph g;
    Node real = g.variable(col({0.3, 0.6, 0.95}));
    Node fake = g.constant(col({0.4, 0.1}));
    const LossPair p = vanilla_losses(real, fake);
    Node d = grad(p.d_loss, real, false);
    const Tensor v = eval_forward(g)[d];
    CHECK((v.array() < 0.0).all());
}

TEST_CASE("wgan losses") {
    auto wgan = [](Node r, Node f) { return wgan_losses(r, f); };
    CHECK(std::abs(run(wgan, col({0.7, 0.7}), col({0.7, 0.7, 0.7})).d_loss) <= 1e-15);
    const Evaluated e = run(wgan, col({1.0, 1.0}), col({0.0, 0.0}));
    CHECK(e.d_loss == -1.0);
    CHECK(e.g_loss == -0.0);
    const std::vector<double> r{1.5, -2.0, 0.25}, f{3.0, 0.5};
    const Evaluated m = run(wgan, col(r), col(f));
    CHECK(m.d_loss == doctest::Approx((3.0 + 0.5) / 2.0 - (1.5 - 2.0 + 0.25) / 3.0).epsilon(1e-15));
    CHECK(m.g_loss == doctest::Approx(-(3.0 + 0.5) / 2.0).epsilon(1e-15));
}

TEST_CASE("fgan worked examples") {
    CHECK(fgan_objective(Divergence::ForwardKl, 1.0, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(fgan_objective(Divergence::TotalVariation, 0.0, 0.0) == 0.0);
}

TEST_CASE("fgan matches the reference conjugate pairs") {
    const std::vector<double> r{-0.4, 0.3, 1.1}, f{0.2, -1.3};
    for (Divergence d : kAll) {
        CAPTURE(divergence_label(d));
        double ref = 0.0;
        for (double t : r) ref += ref_activation(d, t) / r.size();
        for (double t : f) ref -= ref_conjugate(d, ref_activation(d, t)) / f.size();
        const Evaluated e = run([d](Node a, Node b) { return fgan_losses(d, a, b); }, col(r), col(f));
        CHECK(-e.d_loss == doctest::Approx(ref).epsilon(1e-13));
        // Zero-sum: d_loss + generator objective vanishes.
        CHECK(std::abs(e.d_loss + e.g_loss) <= 1e-12);
    }
}

// Grid search over constant discriminator outputs: with identical real and
// fake distributions no output beats D_f(P || P) = 0, while distinguishable
// inputs admit a strictly positive objective.
TEST_CASE("fgan grid-search property") {
    std::vector<double> grid;
    for (int i = 0; i <= 400; ++i) grid.push_back(-5.0 + 10.0 * i / 400.0);
    for (Divergence d : kAll) {
        CAPTURE(divergence_label(d));
        double best_matched = -1e300;
        for (double t : grid) best_matched = std::max(best_matched, fgan_objective(d, t, t));
        CHECK(best_matched <= 1e-12);
        CHECK(best_matched >= -1e-3);
        double best_mismatched = -1e300;
        for (double tr : grid)
            for (double tf : {-3.0, -1.0, 0.0, 1.0, 3.0}) best_mismatched = std::max(best_mismatched, fgan_objective(d, tr, tf));
        CHECK(best_matched <= best_mismatched);
        CHECK(best_mismatched > 0.1);
    }
}

TEST_CASE("fgan non-saturating generator loss") {
    const Evaluated e = run([](Node a, Node b) { return fgan_losses(Divergence::PearsonChi2, a, b, true); },
                            col({0.5}), col({0.25, 0.75}));
    CHECK(e.g_loss == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("losses require column batches") {
    Graph g;
    CHECK_THROWS_AS(vanilla_losses(g.constant(Tensor::Constant(2, 2, 0.5)), g.constant(col({0.5}))), ShapeError);
    CHECK_THROWS_AS(wgan_losses(g.constant(col({0.5})), g.constant(Tensor::Zero(1, 3))), ShapeError);
}

TEST_CASE("all losses finite inside the guarded domain") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor r(8, 1), f(8, 1);
        for (Eigen::Index i = 0; i < 8; ++i) {
            r(i) = rng.uniform(-4.0, 4.0);
            f(i) = rng.uniform(-4.0, 4.0);
        }
        for (Divergence d : kAll) {
            const Evaluated e = run([d](Node a, Node b) { return fgan_losses(d, a, b); }, r, f);
            CHECK(std::isfinite(e.d_loss));
            CHECK(std::isfinite(e.g_loss));
        }
    }
}
