#include "dlab/error.hpp"
#include "dlab/gradcheck.hpp"
#include "dlab/penalties.hpp"

#include <doctest.h>

#include <cmath>

using namespace dlab;

namespace {

// D(x) = w . x + b with an identity head.
Mlp linear_d(std::vector<double> w, double b = 0.0, Activation head = Activation::Identity) {
    Mlp m;
    const int n = static_cast<int>(w.size());
    m.layer_sizes = {n, 1};
    m.weights = {Tensor(1, n)};
    for (int i = 0; i < n; ++i) m.weights[0](0, i) = w[static_cast<std::size_t>(i)];
    m.biases = {Eigen::VectorXd::Constant(1, b)};
    m.output_activation = head;
    return m;
}

Mlp random_d(Rng& rng, Activation head = Activation::Identity) {
    ArchSpec s{"mlp", 2, {8, 6}, Activation::Tanh, head, 2, 1};
    Mlp m = mlp_init(s, InitScheme::Xavier, rng);
    for (auto& b : m.biases)
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.3 * rng.normal();
    return m;
}

Tensor random_batch(Rng& rng, Eigen::Index n, Eigen::Index d = 2) {
    Tensor t(n, d);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
    return t;
}

PenaltyConfig config(PenaltyVariant v, double lambda = 10.0, double k = 1.0, double c = 10.0) {
    PenaltyConfig p;
    p.variant = v;
    p.lambda = lambda;
    p.k = k;
    p.c = c;
    return p;
}

double penalty_value(const Mlp& d, const Tensor& real, const Tensor& fake, const PenaltyConfig& cfg,
                     std::uint64_t seed) {
    Graph g;
    Rng rng(seed);
    const MlpNodes nodes = bind_variables(g, d);
    const Node p = make_penalty(nodes, real, fake, cfg, g, rng);
    return eval_forward(g).scalar(p);
}

const PenaltyVariant kDragan[] = {PenaltyVariant::DraganSq, PenaltyVariant::DraganHinge, PenaltyVariant::DraganEq1};

}  // namespace

TEST_CASE("labels") {
    for (auto v : {PenaltyVariant::None, PenaltyVariant::DraganSq, PenaltyVariant::DraganHinge,
                   PenaltyVariant::DraganEq1, PenaltyVariant::CoupledGp})
        CHECK(parse_penalty(penalty_label(v)) == v);
    CHECK_THROWS_AS(parse_penalty("gp"), ValidationError);
    CHECK(parse_penalty_target("logit") == PenaltyTarget::Logit);
    CHECK(parse_penalty_target("output") == PenaltyTarget::Output);
    CHECK_THROWS_AS(parse_penalty_target("probability"), ValidationError);
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS(config(PenaltyVariant::DraganEq1, -1.0).validate(), ValidationError);
    CHECK_THROWS_AS(config(PenaltyVariant::DraganEq1, 10.0, 1.0, 0.0).validate(), ValidationError);
    CHECK_THROWS_AS(config(PenaltyVariant::DraganEq1, NAN).validate(), ValidationError);
    CHECK_NOTHROW(config(PenaltyVariant::DraganEq1).validate());
}

TEST_CASE("worked examples on constant and linear discriminators") {
    Rng rng(1);
    const Tensor real = random_batch(rng, 16), fake = random_batch(rng, 16);
    const Mlp zero = linear_d({0.0, 0.0}, 0.4);
    // The norm stabilizer moves |g| from 0 to 1e-6.
    CHECK(penalty_value(zero, real, fake, config(PenaltyVariant::DraganEq1), 3) == doctest::Approx(10.0).epsilon(1e-5));
    CHECK(penalty_value(zero, real, fake, config(PenaltyVariant::CoupledGp), 3) == doctest::Approx(10.0).epsilon(1e-5));

    const Mlp unit = linear_d({0.6, 0.8});
    CHECK(std::abs(penalty_value(unit, real, fake, config(PenaltyVariant::DraganEq1), 3)) <= 1e-10);
    CHECK(std::abs(penalty_value(unit, real, fake, config(PenaltyVariant::CoupledGp), 3)) <= 1e-10);

    const Mlp three = linear_d({3.0, 0.0});
    CHECK(penalty_value(three, real, fake, config(PenaltyVariant::DraganHinge), 3) == doctest::Approx(80.0).epsilon(1e-12));
    CHECK(penalty_value(three, real, fake, config(PenaltyVariant::DraganSq), 3) == doctest::Approx(90.0).epsilon(1e-12));
    // Below the hinge threshold nothing is charged.
    CHECK(penalty_value(unit, real, fake, config(PenaltyVariant::DraganHinge, 10.0, 2.0), 3) == 0.0);

    CHECK(penalty_value(three, real, fake, config(PenaltyVariant::None), 3) == 0.0);
}

TEST_CASE("default configuration") {
    const PenaltyConfig p;
    CHECK(p.lambda == 10.0);
    CHECK(p.k == 1.0);
    CHECK(p.c == 10.0);
    CHECK(p.target == PenaltyTarget::Logit);
}

TEST_CASE("penalty target selects the differentiated scalar") {
    Rng rng(2);
    const Tensor real = random_batch(rng, 32), fake = random_batch(rng, 32);
    PenaltyConfig cfg = config(PenaltyVariant::DraganSq, 1.0, 1.0, 0.5);
    const Mlp sig = linear_d({2.0, -1.0}, 0.3, Activation::Sigmoid);
    cfg.target = PenaltyTarget::Logit;
    CHECK(penalty_value(sig, real, fake, cfg, 4) == doctest::Approx(5.0).epsilon(1e-12));
    cfg.target = PenaltyTarget::Output;
    const double through_head = penalty_value(sig, real, fake, cfg, 4);
    // sigma' <= 1/4, so the squared norm shrinks by at least 16x.
    CHECK(through_head > 0.0);
    CHECK(through_head <= 5.0 / 16.0 + 1e-12);

    // Identity heads make the two targets coincide exactly.
    const Mlp d = random_d(rng);
    cfg.target = PenaltyTarget::Logit;
    const double a = penalty_value(d, real, fake, cfg, 7);
    cfg.target = PenaltyTarget::Output;
    CHECK(penalty_value(d, real, fake, cfg, 7) == a);
}

TEST_CASE("coupled interpolates lie on the segments") {
    Rng rng(5);
    const Tensor real = random_batch(rng, 20), fake = random_batch(rng, 20);
    Rng replay(11);
    for (Eigen::Index r = 0; r < real.rows(); ++r) {
        const double eps = replay.uniform();
        CHECK(eps >= 0.0);
        CHECK(eps < 1.0);
        const Eigen::RowVectorXd xh = eps * real.row(r) + (1.0 - eps) * fake.row(r);
        for (Eigen::Index c = 0; c < 2; ++c) {
            CHECK(xh(c) >= std::min(real(r, c), fake(r, c)) - 1e-15);
            CHECK(xh(c) <= std::max(real(r, c), fake(r, c)) + 1e-15);
        }
    }
    // The library consumes exactly one uniform per pair from the stream.
    Graph g;
    Rng used(11);
    const Mlp d = random_d(rng);
    coupled_penalty(bind_constants(g, d), real, fake, 10.0, g, used);
    Rng expected(11);
    for (Eigen::Index r = 0; r < real.rows(); ++r) expected.uniform();
    CHECK(used.next() == expected.next());
}

TEST_CASE("locality: dragan ignores the fake batch, coupled does not") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const Mlp d = random_d(rng);
        const Tensor real = random_batch(rng, 12), fake_a = random_batch(rng, 12), fake_b = 3.0 * random_batch(rng, 12);
        for (PenaltyVariant v : kDragan) {
            const PenaltyConfig cfg = config(v, 10.0, 1.0, 0.5);
            CHECK(penalty_value(d, real, fake_a, cfg, 100 + trial) == penalty_value(d, real, fake_b, cfg, 100 + trial));
        }
        const PenaltyConfig gp = config(PenaltyVariant::CoupledGp);
        CHECK(penalty_value(d, real, fake_a, gp, 100 + trial) != penalty_value(d, real, fake_b, gp, 100 + trial));
    }
}

TEST_CASE("non-negativity and exact lambda scaling") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const Mlp d = random_d(rng, trial % 2 ? Activation::Sigmoid : Activation::Identity);
        const Tensor real = random_batch(rng, 10), fake = random_batch(rng, 10);
        for (auto v : {PenaltyVariant::DraganSq, PenaltyVariant::DraganHinge, PenaltyVariant::DraganEq1,
                       PenaltyVariant::CoupledGp}) {
            const double a = penalty_value(d, real, fake, config(v, 1.5, 0.2, 0.5), 50);
            const double b = penalty_value(d, real, fake, config(v, 3.0, 0.2, 0.5), 50);
            CHECK(a >= 0.0);
            CHECK(b == 2.0 * a);
        }
    }
}

TEST_CASE("penalty is differentiable with respect to D parameters") {
    Rng rng(8);
    const Mlp d = random_d(rng);
    const Tensor real = random_batch(rng, 8);
    Graph g;
    Rng prng(9);
    const MlpNodes nodes = bind_variables(g, d);
    const Node p = dragan_penalty(nodes, real, config(PenaltyVariant::DraganEq1, 10.0, 1.0, 0.5), g, prng);
    const auto grads = grad(p, nodes.parameters(), false);
    const Values v = eval_forward(g);
    double total = 0.0;
    for (const Node& n : grads) total += v[n].cwiseAbs().sum();
    CHECK(total > 0.0);
    CHECK(std::isfinite(total));
}

TEST_CASE("second-order finite-difference suite") {
    const auto checks = second_order_suite(21, 3);
    REQUIRE(checks.size() == 4);
    for (const auto& c : checks) {
        CAPTURE(penalty_label(c.variant));
        CHECK(c.trials == 3);
        CHECK(c.max_error <= 1e-3);
    }
    CHECK(single_point_penalty_check(22) <= 1e-3);
}

TEST_CASE("errors") {
    Rng rng(10);
    const Mlp d = random_d(rng);
    Graph g;
    const MlpNodes nodes = bind_constants(g, d);
    CHECK_THROWS_AS(dragan_penalty(nodes, Tensor(0, 2), config(PenaltyVariant::DraganEq1), g, rng), ValidationError);
    CHECK_THROWS_AS(dragan_penalty(nodes, random_batch(rng, 3), config(PenaltyVariant::CoupledGp), g, rng),
                    ValidationError);
    CHECK_THROWS_AS(coupled_penalty(nodes, random_batch(rng, 3), random_batch(rng, 4), 10.0, g, rng), ShapeError);

    Mlp wide = random_d(rng);
    wide.weights.back() = Tensor::Ones(2, wide.weights.back().cols());
    wide.biases.back() = Eigen::VectorXd::Zero(2);
    wide.layer_sizes.back() = 2;
    Graph g2;
    CHECK_THROWS_AS(dragan_penalty(bind_constants(g2, wide), random_batch(rng, 3), config(PenaltyVariant::DraganEq1),
                                   g2, rng),
                    ShapeError);

    // Infinite input gradients surface as a numeric error with the message.
    const Mlp huge = linear_d({INFINITY, 1.0});
    Graph g3;
    Rng r3(1);
    const Node p = dragan_penalty(bind_constants(g3, huge), random_batch(rng, 4),
                                  config(PenaltyVariant::DraganSq, 10.0, 1.0, 0.5), g3, r3);
    try {
        eval_forward(g3);
        FAIL("expected a non-finite penalty");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("non-finite penalty") != std::string::npos);
    }
    (void)p;
}
