#include "dlab/regretgame.hpp"

#include "dlab/csv.hpp"
#include "dlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dlab {

namespace {

void require_finite(const Vec& g, const char* what) {
    if (!g.allFinite()) throw NumericError(std::string(what) + ": non-finite gradient");
}

}  // namespace

Vec ogd_step(const Vec& k, const Vec& g, double eta, const Box& box) {
    if (!(eta > 0.0)) throw ValidationError("ogd_step: eta must be > 0");
    if (k.size() != g.size()) throw ShapeError("shape error: ogd_step gradient/parameter size mismatch");
    require_finite(g, "ogd_step");
    return box.project(k - eta * g);
}

Vec ftrl_step(const std::vector<Vec>& gradient_history, double eta, const Box& box) {
    if (gradient_history.empty()) throw ValidationError("ftrl_step: empty gradient history");
    if (!(eta > 0.0)) throw ValidationError("ftrl_step: eta must be > 0");
    Vec total = Vec::Zero(gradient_history.front().size());
    for (const Vec& g : gradient_history) {
        if (g.size() != total.size()) throw ShapeError("shape error: ftrl_step gradient size mismatch");
        require_finite(g, "ftrl_step");
        total += g;
    }
    return box.project(-eta * total);
}

// ---- ledger ----------------------------------------------------------------

void PlayerHistory::push(const Vec& action, double loss, const Vec& gradient) {
    if (actions_.empty()) {
        average_ = Vec::Zero(action.size());
        coef_sum_ = Vec::Zero(action.size());
    } else if (action.size() != average_.size()) {
        throw ShapeError("shape error: action dimension changed between rounds");
    }
    actions_.push_back(action);
    losses_.push_back(loss);
    gradients_.push_back(gradient);
    cumulative_loss_ += loss;
    const double t = static_cast<double>(actions_.size());
    average_ += (action - average_) / t;
}

void PlayerHistory::record(const Vec& action, double loss, const Vec& loss_gradient, LossFn loss_fn) {
    push(action, loss, loss_gradient);
    loss_fns_.push_back(std::move(loss_fn));
    all_linear_ = false;
}

void PlayerHistory::record_linear(const Vec& action, const Vec& coef, double offset) {
    push(action, coef.dot(action) + offset, coef);
    coef_sum_ += coef;
    offset_sum_ += offset;
    loss_fns_.push_back([coef, offset](const Vec& k) { return coef.dot(k) + offset; });
}

double PlayerHistory::summed_loss(const Vec& k) const {
    if (all_linear_ && !actions_.empty()) return coef_sum_.dot(k) + offset_sum_;
    double total = 0.0;
    for (const auto& f : loss_fns_) {
        if (!f) throw ValidationError("summed_loss: a round was recorded without a loss function");
        total += f(k);
    }
    return total;
}

BestFixedOracle linear_box_oracle(const Box& box) {
    return [box](const PlayerHistory& h) {
        if (!h.all_linear()) throw ValidationError("linear_box_oracle: history contains non-linear losses");
        const Vec& c = h.linear_coef_sum();
        double best = h.linear_offset_sum();
        for (Eigen::Index i = 0; i < c.size(); ++i) best += std::min(c(i) * box.lo, c(i) * box.hi);
        return best;
    };
}

namespace {

// Minimizes f over [lo,hi]^dims on a 101-point grid, then refines x10 around
// the best point.
template <class F>
double grid_minimize(F f, const Box& box, int dims, Vec* argmin = nullptr) {
    if (dims < 1 || dims > 2) throw ValidationError("grid oracle supports 1 or 2 dimensions");
    constexpr int kCoarse = 101;
    constexpr int kFine = 101;
    const double step = (box.hi - box.lo) / (kCoarse - 1);
    Vec best_point(dims);
    double best = std::numeric_limits<double>::infinity();
    Vec p(dims);
    auto scan = [&](const Vec& lo, double h, int n) {
        if (dims == 1) {
            for (int i = 0; i < n; ++i) {
                p(0) = std::clamp(lo(0) + i * h, box.lo, box.hi);
                const double v = f(p);
                if (v < best) best = v, best_point = p;
            }
        } else {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    p(0) = std::clamp(lo(0) + i * h, box.lo, box.hi);
                    p(1) = std::clamp(lo(1) + j * h, box.lo, box.hi);
                    const double v = f(p);
                    if (v < best) best = v, best_point = p;
                }
        }
    };
    scan(Vec::Constant(dims, box.lo), step, kCoarse);
    const Vec centre = best_point;
    scan(centre.array() - step, 2.0 * step / (kFine - 1), kFine);
    if (argmin) *argmin = best_point;
    return best;
}

}  // namespace

BestFixedOracle grid_oracle(const Box& box, int dims) {
    return [box, dims](const PlayerHistory& h) {
        return grid_minimize([&](const Vec& k) { return h.summed_loss(k); }, box, dims);
    };
}

double regret(const RegretLedger& ledger, Player player, const BestFixedOracle& oracle) {
    const PlayerHistory& h = player == Player::Phi ? ledger.phi : ledger.theta;
    if (h.rounds() == 0) throw ValidationError("regret: empty history");
    return h.cumulative_loss() - oracle(h);
}

// ---- games -----------------------------------------------------------------

BoxGame BoxGame::make_bilinear(Eigen::MatrixXd a, Box phi_box, Box theta_box) {
    BoxGame g;
    g.phi_dim = static_cast<int>(a.rows());
    g.theta_dim = static_cast<int>(a.cols());
    g.phi_box = phi_box;
    g.theta_box = theta_box;
    g.payoff = [a](const Vec& phi, const Vec& theta) { return phi.dot(a * theta); };
    g.bilinear = std::move(a);
    return g;
}

double best_response_max(const BoxGame& game, const Vec& phi) {
    if (game.bilinear) {
        const Vec c = game.bilinear->transpose() * phi;
        double v = 0.0;
        for (Eigen::Index j = 0; j < c.size(); ++j)
            v += std::max(c(j) * game.theta_box.lo, c(j) * game.theta_box.hi);
        return v;
    }
    return -grid_minimize([&](const Vec& th) { return -game.payoff(phi, th); }, game.theta_box, game.theta_dim);
}

double best_response_min(const BoxGame& game, const Vec& theta) {
    if (game.bilinear) {
        const Vec c = *game.bilinear * theta;
        double v = 0.0;
        for (Eigen::Index i = 0; i < c.size(); ++i) v += std::min(c(i) * game.phi_box.lo, c(i) * game.phi_box.hi);
        return v;
    }
    return grid_minimize([&](const Vec& ph) { return game.payoff(ph, theta); }, game.phi_box, game.phi_dim);
}

double duality_gap(const BoxGame& game, const Vec& phi_bar, const Vec& theta_bar) {
    return best_response_max(game, phi_bar) - best_response_min(game, theta_bar);
}

namespace {

Vec sample_ball(const Vec& centre, double radius, Rng& rng) {
    const Eigen::Index d = centre.size();
    Vec dir(d);
    double norm = 0.0;
    do {
        for (Eigen::Index i = 0; i < d; ++i) dir(i) = rng.normal();
        norm = dir.norm();
    } while (norm == 0.0);
    const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    return centre + (r / norm) * dir;
}

}  // namespace

LocalEqVerdict local_eq_probe(const Payoff& J, const Vec& phi_star, const Vec& theta_star, double radius,
                              double epsilon, int samples, Rng& rng) {
    if (samples < 1) throw ValidationError("local_eq_probe: need at least one sample");
    if (!(radius > 0.0)) throw ValidationError("local_eq_probe: radius must be > 0");
    const double value = J(phi_star, theta_star);
    LocalEqVerdict verdict;
    for (int s = 0; s < samples; ++s) {
        const Vec phi = sample_ball(phi_star, radius, rng);
        const double v = J(phi, theta_star);
        if (!(value <= v + epsilon)) {
            verdict.pass = false;
            verdict.player = Player::Phi;
            verdict.witness = phi;
            verdict.improvement = value - v;
            return verdict;
        }
    }
    for (int s = 0; s < samples; ++s) {
        const Vec theta = sample_ball(theta_star, radius, rng);
        const double v = J(phi_star, theta);
        if (!(value >= v - epsilon)) {
            verdict.pass = false;
            verdict.player = Player::Theta;
            verdict.witness = theta;
            verdict.improvement = v - value;
            return verdict;
        }
    }
    return verdict;
}

// ---- self-play -------------------------------------------------------------

std::vector<SelfPlayRow> bilinear_self_play(const SelfPlayOptions& opts) {
    if (opts.iters < 1) throw ValidationError("self-play: iters must be >= 1");
    if (!(opts.eta > 0.0)) throw ValidationError("self-play: eta must be > 0");
    const BoxGame game = BoxGame::make_bilinear(Eigen::MatrixXd::Ones(1, 1), opts.box, opts.box);
    const BestFixedOracle oracle = linear_box_oracle(opts.box);

    RegretLedger ledger;
    Vec phi = Vec::Constant(1, opts.phi0);
    Vec theta = Vec::Constant(1, opts.theta0);
    std::vector<SelfPlayRow> rows;
    rows.reserve(opts.iters);
    for (int t = 1; t <= opts.iters; ++t) {
        // J = phi * theta: dJ/dphi = theta, dJ/dtheta = phi.
        ledger.phi.record_linear(phi, theta);
        ledger.theta.record_linear(theta, -phi);

        SelfPlayRow row;
        row.round = t;
        row.phi = phi(0);
        row.theta = theta(0);
        row.phi_bar = ledger.phi.average_action()(0);
        row.theta_bar = ledger.theta.average_action()(0);
        row.regret_phi = regret(ledger, Player::Phi, oracle);
        row.regret_theta = regret(ledger, Player::Theta, oracle);
        row.max_response = best_response_max(game, ledger.phi.average_action());
        row.min_response = best_response_min(game, ledger.theta.average_action());
        row.duality_gap = row.max_response - row.min_response;
        rows.push_back(row);

        const double eta = opts.constant_eta ? opts.eta : opts.eta / std::sqrt(static_cast<double>(t));
        const Vec next_phi = ogd_step(phi, theta, eta, opts.box);
        const Vec next_theta = ogd_step(theta, -phi, eta, opts.box);
        phi = next_phi;
        theta = next_theta;
    }
    return rows;
}

void write_self_play_csv(std::ostream& os, const std::vector<SelfPlayRow>& rows) {
    os << "round,phi,theta,phi_bar,theta_bar,regret_1,regret_2,duality_gap\n";
    for (const auto& r : rows) {
        os << r.round;
        for (double v : {r.phi, r.theta, r.phi_bar, r.theta_bar, r.regret_phi, r.regret_theta, r.duality_gap}) {
            os << ',';
            write_real(os, v);
        }
        os << '\n';
    }
}

}  // namespace dlab
