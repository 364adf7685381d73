#include "dlab/gradcheck.hpp"

#include "dlab/error.hpp"

#include <algorithm>
#include <cmath>

namespace dlab {

double relative_error(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("shape error: relative_error operands");
    if (a.size() == 0) return 0.0;
    const double diff = (a - b).cwiseAbs().maxCoeff();
    const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-8});
    return diff / scale;
}

namespace {

std::size_t flat_size(const std::vector<Tensor>& ts) {
    std::size_t n = 0;
    for (const auto& t : ts) n += static_cast<std::size_t>(t.size());
    return n;
}

Tensor flatten(const std::vector<Tensor>& ts) {
    Tensor out(static_cast<Eigen::Index>(flat_size(ts)), 1);
    Eigen::Index k = 0;
    for (const auto& t : ts)
        for (Eigen::Index i = 0; i < t.size(); ++i) out(k++, 0) = t.data()[i];
    return out;
}

std::vector<Tensor> unflatten(const Tensor& flat, std::vector<Tensor> like) {
    Eigen::Index k = 0;
    for (auto& t : like)
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = flat(k++, 0);
    return like;
}

Mlp random_smooth_mlp(Rng& rng, int in_dim, int out_dim, int max_depth, int max_width) {
    ArchSpec spec;
    spec.depth = static_cast<int>(rng.uniform_int(1, max_depth));
    spec.widths.clear();
    for (int i = 0; i < spec.depth; ++i) spec.widths.push_back(static_cast<int>(rng.uniform_int(1, max_width)));
    spec.hidden_activation = rng.uniform() < 0.5 ? Activation::Tanh : Activation::Sigmoid;
    spec.output_activation = Activation::Identity;
    spec.input_dim = in_dim;
    spec.output_dim = out_dim;
    Mlp m = mlp_init(spec, InitScheme::Xavier, rng);
    // Nonzero biases so that no layer sits at a symmetric point.
    for (auto& b : m.biases)
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-0.5, 0.5);
    return m;
}

Tensor random_tensor(Eigen::Index r, Eigen::Index c, Rng& rng) {
    Tensor t(r, c);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
    return t;
}

// Gradient of f(params) via grad(), and by central differences.
template <class Build>
std::pair<Tensor, Tensor> compare(const Mlp& base, Build build, double step) {
    Tensor analytic;
    {
        Graph graph;
        const MlpNodes nodes = bind_variables(graph, base);
        const Node out = build(nodes, graph);
        const auto params = nodes.parameters();
        const auto grads = grad(out, params, false);
        const Values vals = eval_forward(graph);
        std::vector<Tensor> gv;
        for (const Node& g : grads) gv.push_back(vals[g]);
        analytic = flatten(gv);
    }
    const std::vector<Tensor> like = get_parameters(base);
    auto f = [&](const Tensor& flat) {
        Mlp m = base;
        assign_parameters(m, unflatten(flat, like));
        Graph graph;
        const MlpNodes nodes = bind_constants(graph, m);
        const Node out = build(nodes, graph);
        return eval_forward(graph).scalar(out);
    };
    return {analytic, finite_diff(f, flatten(like), step)};
}

}  // namespace

FirstOrderCheck first_order_suite(std::uint64_t seed, int trials) {
    if (trials < 1) throw ValidationError("gradcheck: trials must be >= 1");
    FirstOrderCheck report;
    for (int t = 0; t < trials; ++t) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(t));
        const int in_dim = static_cast<int>(rng.uniform_int(1, 4));
        const int out_dim = static_cast<int>(rng.uniform_int(1, 3));
        const Mlp m = random_smooth_mlp(rng, in_dim, out_dim, 4, 32);
        const Tensor x = random_tensor(3, in_dim, rng);
        const Tensor readout = random_tensor(3, out_dim, rng);
        auto build = [&](const MlpNodes& nodes, Graph& graph) {
            return sum(mlp_forward(nodes, graph.constant(x)) * graph.constant(readout));
        };
        const auto [a, b] = compare(m, build, 1e-4);
        const double err = relative_error(a, b);
        ++report.trials;
        if (err > report.max_error || report.worst_trial < 0) {
            report.max_error = std::max(report.max_error, err);
            report.worst_trial = t;
        }
    }
    return report;
}

namespace {

// Picks a hinge threshold in the widest gap between squared input-gradient
// norms so that finite differences never straddle the kink.
double hinge_threshold(const Mlp& d, const Tensor& points) {
    Graph graph;
    const MlpNodes nodes = bind_constants(graph, d);
    const Node g = input_gradients(nodes, points, graph);
    const Tensor gv = eval_forward(graph)[g];
    std::vector<double> sq;
    for (Eigen::Index r = 0; r < gv.rows(); ++r) sq.push_back(gv.row(r).squaredNorm());
    std::sort(sq.begin(), sq.end());
    double best_gap = -1.0, k = sq.front() / 2.0;
    for (std::size_t i = 1; i < sq.size(); ++i)
        if (sq[i] - sq[i - 1] > best_gap) best_gap = sq[i] - sq[i - 1], k = 0.5 * (sq[i] + sq[i - 1]);
    return k;
}

}  // namespace

std::vector<SecondOrderCheck> second_order_suite(std::uint64_t seed, int trials_per_variant) {
    if (trials_per_variant < 1) throw ValidationError("gradcheck: trials must be >= 1");
    std::vector<SecondOrderCheck> out;
    const PenaltyVariant variants[] = {PenaltyVariant::DraganSq, PenaltyVariant::DraganHinge,
                                       PenaltyVariant::DraganEq1, PenaltyVariant::CoupledGp};
    std::uint64_t stream = 1000;
    for (PenaltyVariant v : variants) {
        SecondOrderCheck check;
        check.variant = v;
        for (int t = 0; t < trials_per_variant; ++t, ++stream) {
            Rng rng = Rng::stream(seed, stream);
            const Mlp d = random_smooth_mlp(rng, 2, 1, 3, 12);
            const Tensor x_real = random_tensor(6, 2, rng);
            const Tensor x_fake = random_tensor(6, 2, rng);
            PenaltyConfig cfg{v, 10.0, 1.0, 0.5};
            const std::uint64_t perturb_seed = rng.next();
            if (v == PenaltyVariant::DraganHinge) {
                // Same perturbations the penalty will draw.
                Rng replay(perturb_seed);
                Tensor perturbed = x_real;
                for (Eigen::Index r = 0; r < perturbed.rows(); ++r)
                    for (Eigen::Index c = 0; c < perturbed.cols(); ++c)
                        perturbed(r, c) += replay.normal(0.0, std::sqrt(cfg.c));
                cfg.k = hinge_threshold(d, perturbed);
            }
            auto build = [&](const MlpNodes& nodes, Graph& graph) {
                Rng replay(perturb_seed);
                return make_penalty(nodes, x_real, x_fake, cfg, graph, replay);
            };
            const auto [a, b] = compare(d, build, 1e-5);
            check.max_error = std::max(check.max_error, relative_error(a, b));
            ++check.trials;
        }
        out.push_back(check);
    }
    return out;
}

double single_point_penalty_check(std::uint64_t seed) {
    Rng rng = Rng::stream(seed, 7);
    const Mlp d = random_smooth_mlp(rng, 2, 1, 2, 8);
    const Tensor x0 = random_tensor(1, 2, rng);
    auto build = [&](const MlpNodes& nodes, Graph& graph) {
        const Node g = input_gradients(nodes, x0, graph);
        return square(l2norm(g, kNormEps) - 1.0);
    };
    const auto [a, b] = compare(d, build, 1e-5);
    return relative_error(a, b);
}

}  // namespace dlab
