#pragma once

// Finite-difference suites for the differentiation engine.

#include "dlab/penalties.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dlab {

// |a - b|_inf / max(|a|_inf, |b|_inf, 1e-8).
double relative_error(const Tensor& a, const Tensor& b);

struct FirstOrderCheck {
    int trials = 0;
    double max_error = 0.0;
    int worst_trial = -1;
};

// Random MLPs (depth 1..4, widths 1..32, tanh/sigmoid hidden layers) on random
// inputs: parameter gradients of a random linear readout against central
// differences with step 1e-4.
FirstOrderCheck first_order_suite(std::uint64_t seed, int trials = 100);

struct SecondOrderCheck {
    PenaltyVariant variant = PenaltyVariant::None;
    int trials = 0;
    double max_error = 0.0;
};

// Parameter gradient of each penalty variant (built through create_graph input
// gradients) against central differences of the penalty value, with the
// perturbation stream replayed for every evaluation.
std::vector<SecondOrderCheck> second_order_suite(std::uint64_t seed, int trials_per_variant = 5);

// The same kind of check for p(theta) = (|grad_x D_theta(x0)| - k)^2 at a
// single point x0.
double single_point_penalty_check(std::uint64_t seed);

}  // namespace dlab
