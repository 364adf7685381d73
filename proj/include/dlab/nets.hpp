#pragma once

#include "dlab/diffgraph.hpp"
#include "dlab/rng.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dlab {

enum class Activation { Identity, Relu, LeakyRelu, Tanh, Sigmoid };

inline constexpr double kLeakySlope = 0.2;
// Sigmoid heads are clamped to [kProbFloor, 1 - kProbFloor] before any log.
inline constexpr double kProbFloor = 1e-7;

std::string_view activation_label(Activation a);
Activation parse_activation(std::string_view label);

// Fully connected network. weights[i] is layer_sizes[i+1] x layer_sizes[i];
// biases[i] has layer_sizes[i+1] entries.
struct Mlp {
    std::vector<int> layer_sizes;
    std::vector<Tensor> weights;
    std::vector<Eigen::VectorXd> biases;
    Activation hidden_activation = Activation::Relu;
    Activation output_activation = Activation::Identity;

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    std::size_t layer_count() const { return weights.size(); }
    std::size_t parameter_count() const;
    // Throws ValidationError when the tensors disagree with layer_sizes.
    void validate() const;
};

// Architecture description. input_dim is the latent dimension for a
// generator and the data dimension for a discriminator.
struct ArchSpec {
    std::string family = "mlp";
    int depth = 1;
    std::vector<int> widths{128};
    Activation hidden_activation = Activation::Relu;
    Activation output_activation = Activation::Identity;
    int input_dim = 2;
    int output_dim = 1;

    void validate() const;
    std::vector<int> layer_sizes() const;
};

enum class InitScheme { He, Xavier };

Mlp mlp_init(const ArchSpec& spec, InitScheme init, Rng& rng);

// Parameters of an Mlp placed in a graph, weights then biases per layer.
struct MlpNodes {
    const Mlp* mlp = nullptr;
    std::vector<Node> weights;
    std::vector<Node> biases;  // 1 x out rows

    std::vector<Node> parameters() const;  // w0, b0, w1, b1, ...
};

// Trainable leaves (for differentiation w.r.t. parameters).
MlpNodes bind_variables(Graph& graph, const Mlp& m);
// Fixed parameters.
MlpNodes bind_constants(Graph& graph, const Mlp& m);

// Appends the affine+activation chain for a batch x (n x input_dim).
Node mlp_forward(const MlpNodes& m, Node x);
// With output_activation = false the last layer stays affine (logits).
Node mlp_forward(const MlpNodes& m, Node x, bool output_activation);
Node mlp_forward(const Mlp& m, const Tensor& x, Graph& graph);

// Evaluates the network on a batch without keeping the graph around.
Tensor predict(const Mlp& m, const Tensor& x);

// Parameter tensors in the same order as MlpNodes::parameters(); biases are
// exposed as 1 x out views copied back by assign_parameters.
std::vector<Tensor> get_parameters(const Mlp& m);
void assign_parameters(Mlp& m, std::span<const Tensor> params);

// ---- checkpoints ----------------------------------------------------------

void save_mlp(const Mlp& m, std::ostream& os);
Mlp load_mlp(std::istream& is);
void save_mlp(const Mlp& m, const std::string& path);
Mlp load_mlp(const std::string& path);

// ---- architecture pool ----------------------------------------------------

struct FamilyWeight {
    std::string family;
    double weight = 0.0;
};

// DCGAN 0.6, ResNet 0.2, MLP 0.2, with the convolutional families mapped onto
// MLP stand-ins ("wide-mlp" for DCGAN, "deep-mlp" for ResNet).
std::vector<FamilyWeight> default_arch_pool();

inline constexpr int kArchWidths[] = {32, 64, 128, 256};

ArchSpec sample_arch(std::span<const FamilyWeight> pool, Rng& rng);

}  // namespace dlab
