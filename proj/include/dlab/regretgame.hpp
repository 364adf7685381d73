#pragma once

// No-regret dynamics for two-player zero-sum games over boxes.
//
// Player 1 (phi) minimizes J, player 2 (theta) maximizes it. Round t losses are
// L1_t(phi) = J(phi, theta_t) and L2_t(theta) = -J(phi_t, theta).

#include "dlab/rng.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <ostream>
#include <vector>

namespace dlab {

using Vec = Eigen::VectorXd;

// The box [lo, hi]^dim.
struct Box {
    double lo = -1.0;
    double hi = 1.0;

    Vec project(const Vec& k) const { return k.cwiseMax(lo).cwiseMin(hi); }
    bool contains(const Vec& k) const { return (k.array() >= lo).all() && (k.array() <= hi).all(); }
};

// Projected online gradient descent: clamp(k - eta g).
Vec ogd_step(const Vec& k, const Vec& g, double eta, const Box& box);

// FTRL with the quadratic regularizer |k|^2 / 2 on linearized losses:
// argmin_{k in box} <sum g_s, k> + |k|^2 / (2 eta) = clamp(-eta sum g_s).
Vec ftrl_step(const std::vector<Vec>& gradient_history, double eta, const Box& box);

using LossFn = std::function<double(const Vec&)>;

// One player's history. Linear losses (<g, k> + offset) are summarized in
// closed form; arbitrary losses are kept as callables for grid oracles.
class PlayerHistory {
public:
    void record(const Vec& action, double loss, const Vec& loss_gradient, LossFn loss_fn = {});
    // Linear loss <coef, k> + offset, evaluated at the action.
    void record_linear(const Vec& action, const Vec& coef, double offset = 0.0);

    std::size_t rounds() const { return actions_.size(); }
    const std::vector<Vec>& actions() const { return actions_; }
    const std::vector<double>& losses() const { return losses_; }
    const std::vector<Vec>& gradients() const { return gradients_; }
    double cumulative_loss() const { return cumulative_loss_; }
    const Vec& average_action() const { return average_; }
    bool all_linear() const { return all_linear_; }
    const Vec& linear_coef_sum() const { return coef_sum_; }
    double linear_offset_sum() const { return offset_sum_; }
    // Sum of recorded loss callables at k (requires each round to carry one).
    double summed_loss(const Vec& k) const;

private:
    void push(const Vec& action, double loss, const Vec& gradient);

    std::vector<Vec> actions_;
    std::vector<double> losses_;
    std::vector<Vec> gradients_;
    std::vector<LossFn> loss_fns_;
    double cumulative_loss_ = 0.0;
    Vec average_;
    Vec coef_sum_;
    double offset_sum_ = 0.0;
    bool all_linear_ = true;
};

struct RegretLedger {
    PlayerHistory phi;    // player 1
    PlayerHistory theta;  // player 2
    std::size_t round() const { return phi.rounds(); }
};

enum class Player { Phi, Theta };

// min over the comparator set of the player's summed losses.
using BestFixedOracle = std::function<double(const PlayerHistory&)>;

// Closed form for linear losses over a box: the minimizer sits at a vertex.
BestFixedOracle linear_box_oracle(const Box& box);
// Two-stage grid (101 points per dimension, then x10 refinement around the
// best point) over summed loss callables; dimensions 1 or 2.
BestFixedOracle grid_oracle(const Box& box, int dims);

// R(T) = sum_t L_t(k_t) - min_k sum_t L_t(k). May be negative; stored as is.
double regret(const RegretLedger& ledger, Player player, const BestFixedOracle& oracle);

using Payoff = std::function<double(const Vec& phi, const Vec& theta)>;

struct BoxGame {
    Payoff payoff;
    int phi_dim = 1;
    int theta_dim = 1;
    Box phi_box;
    Box theta_box;
    // J(phi, theta) = phi^T A theta when present; enables closed-form best responses.
    std::optional<Eigen::MatrixXd> bilinear;

    static BoxGame make_bilinear(Eigen::MatrixXd a, Box phi_box = {}, Box theta_box = {});
    double operator()(const Vec& phi, const Vec& theta) const { return payoff(phi, theta); }
};

// Grid tolerance of the non-analytic best-response oracle.
inline constexpr double kGridOracleTolerance = 1e-3;

double best_response_max(const BoxGame& game, const Vec& phi);    // max_theta J(phi, theta)
double best_response_min(const BoxGame& game, const Vec& theta);  // min_phi J(phi, theta)

// max_theta J(phi_bar, theta) - min_phi J(phi, theta_bar).
double duality_gap(const BoxGame& game, const Vec& phi_bar, const Vec& theta_bar);

struct LocalEqVerdict {
    bool pass = true;
    // On failure: which player can improve, and the improving strategy.
    std::optional<Player> player;
    Vec witness;
    double improvement = 0.0;
};

// Monte-Carlo check of an epsilon-approximate local equilibrium: samples m
// perturbations per player uniformly in the radius ball. A pass is evidence,
// not proof.
LocalEqVerdict local_eq_probe(const Payoff& J, const Vec& phi_star, const Vec& theta_star, double radius,
                              double epsilon, int samples, Rng& rng);

// ---- self-play demo --------------------------------------------------------

struct SelfPlayOptions {
    int iters = 10000;
    double phi0 = 0.5;
    double theta0 = 0.5;
    bool constant_eta = false;
    double eta = 1.0;  // eta_t = eta / sqrt(t), or eta when constant_eta
    Box box;
};

struct SelfPlayRow {
    int round = 0;
    double phi = 0, theta = 0;  // actions played in this round
    double phi_bar = 0, theta_bar = 0;
    double regret_phi = 0, regret_theta = 0;
    double duality_gap = 0;
    double max_response = 0;  // max_theta J(phi_bar, theta)
    double min_response = 0;  // min_phi J(phi, theta_bar)
};

// Simultaneous projected OGD on J = phi * theta. One row per round.
std::vector<SelfPlayRow> bilinear_self_play(const SelfPlayOptions& opts);

// Header: round,phi,theta,phi_bar,theta_bar,regret_1,regret_2,duality_gap
void write_self_play_csv(std::ostream& os, const std::vector<SelfPlayRow>& rows);

}  // namespace dlab
