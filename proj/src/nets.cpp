#include "dlab/nets.hpp"

#include "dlab/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace dlab {

std::string_view activation_label(Activation a) {
    switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    }
    return "?";
}

Activation parse_activation(std::string_view label) {
    for (auto a : {Activation::Identity, Activation::Relu, Activation::LeakyRelu, Activation::Tanh,
                   Activation::Sigmoid})
        if (activation_label(a) == label) return a;
    throw ValidationError("unknown activation '" + std::string(label) + "'");
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i)
        n += static_cast<std::size_t>(layer_sizes[i + 1]) * static_cast<std::size_t>(layer_sizes[i] + 1);
    return n;
}

void Mlp::validate() const {
    if (layer_sizes.size() < 2) throw ValidationError("invalid architecture: need at least two layer sizes");
    for (int s : layer_sizes)
        if (s < 1) throw ValidationError("invalid architecture: zero-width layer");
    if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size())
        throw ValidationError("invalid architecture: parameter count mismatch");
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i].rows() != layer_sizes[i + 1] || weights[i].cols() != layer_sizes[i] ||
            biases[i].size() != layer_sizes[i + 1])
            throw ValidationError("invalid architecture: layer " + std::to_string(i) + " shape mismatch");
    }
}

void ArchSpec::validate() const {
    if (depth < 1 || static_cast<std::size_t>(depth) != widths.size())
        throw ValidationError("invalid architecture: depth must equal the number of widths");
    for (int w : widths)
        if (w < 1) throw ValidationError("invalid architecture: zero-width layer");
    if (input_dim < 1 || output_dim < 1) throw ValidationError("invalid architecture: zero-width layer");
}

std::vector<int> ArchSpec::layer_sizes() const {
    std::vector<int> sizes;
    sizes.push_back(input_dim);
    sizes.insert(sizes.end(), widths.begin(), widths.end());
    sizes.push_back(output_dim);
    return sizes;
}

Mlp mlp_init(const ArchSpec& spec, InitScheme init, Rng& rng) {
    spec.validate();
    Mlp m;
    m.layer_sizes = spec.layer_sizes();
    m.hidden_activation = spec.hidden_activation;
    m.output_activation = spec.output_activation;
    for (std::size_t i = 0; i + 1 < m.layer_sizes.size(); ++i) {
        const int fan_in = m.layer_sizes[i];
        const int fan_out = m.layer_sizes[i + 1];
        Tensor w(fan_out, fan_in);
        if (init == InitScheme::He) {
            const double sd = std::sqrt(2.0 / fan_in);
            for (Eigen::Index r = 0; r < w.rows(); ++r)
                for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.normal(0.0, sd);
        } else {
            const double bound = std::sqrt(6.0 / (fan_in + fan_out));
            for (Eigen::Index r = 0; r < w.rows(); ++r)
                for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
        }
        m.weights.push_back(std::move(w));
        m.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return m;
}

std::vector<Node> MlpNodes::parameters() const {
    std::vector<Node> p;
    p.reserve(weights.size() * 2);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        p.push_back(weights[i]);
        p.push_back(biases[i]);
    }
    return p;
}

namespace {

template <class Make>
MlpNodes bind_with(const Mlp& m, Make make) {
    m.validate();
    MlpNodes nodes;
    nodes.mlp = &m;
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
        nodes.weights.push_back(make(Tensor(m.weights[i]), "w" + std::to_string(i)));
        nodes.biases.push_back(make(Tensor(m.biases[i].transpose()), "b" + std::to_string(i)));
    }
    return nodes;
}

Node activate(Node h, Activation a) {
    switch (a) {
    case Activation::Identity: return h;
    case Activation::Relu: return relu(h);
    case Activation::LeakyRelu: return leaky_relu(h, kLeakySlope);
    case Activation::Tanh: return tanh(h);
    case Activation::Sigmoid: return clamp(sigmoid(h), kProbFloor, 1.0 - kProbFloor);
    }
    return h;
}

}  // namespace

MlpNodes bind_variables(Graph& graph, const Mlp& m) {
    return bind_with(m, [&](Tensor t, std::string name) { return graph.variable(std::move(t), std::move(name)); });
}

MlpNodes bind_constants(Graph& graph, const Mlp& m) {
    return bind_with(m, [&](Tensor t, std::string) { return graph.constant(std::move(t)); });
}

Node mlp_forward(const MlpNodes& m, Node x) { return mlp_forward(m, x, true); }

Node mlp_forward(const MlpNodes& m, Node x, bool output_activation) {
    if (x.shape().cols != m.mlp->input_dim())
        throw ShapeError("shape error: network expects " + std::to_string(m.mlp->input_dim()) +
                         " input columns, got " + x.shape().str());
    Node h = x;
    const std::size_t layers = m.weights.size();
    for (std::size_t i = 0; i < layers; ++i) {
        Node z = matmul(h, transpose(m.weights[i]));
        z = z + broadcast(m.biases[i], z.shape());
        if (i + 1 == layers)
            h = output_activation ? activate(z, m.mlp->output_activation) : z;
        else
            h = activate(z, m.mlp->hidden_activation);
    }
    return h;
}

Node mlp_forward(const Mlp& m, const Tensor& x, Graph& graph) {
    return mlp_forward(bind_constants(graph, m), graph.constant(x));
}

Tensor predict(const Mlp& m, const Tensor& x) {
    Graph g;
    Node out = mlp_forward(m, x, g);
    return eval_forward(g)[out];
}

std::vector<Tensor> get_parameters(const Mlp& m) {
    std::vector<Tensor> p;
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
        p.push_back(m.weights[i]);
        p.push_back(m.biases[i].transpose());
    }
    return p;
}

void assign_parameters(Mlp& m, std::span<const Tensor> params) {
    if (params.size() != 2 * m.weights.size()) throw ValidationError("assign_parameters: count mismatch");
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
        const Tensor& w = params[2 * i];
        const Tensor& b = params[2 * i + 1];
        if (w.rows() != m.weights[i].rows() || w.cols() != m.weights[i].cols() || b.rows() != 1 ||
            b.cols() != m.biases[i].size())
            throw ShapeError("shape error: parameter tensor for layer " + std::to_string(i));
        m.weights[i] = w;
        m.biases[i] = b.transpose();
    }
}

// ---- checkpoints ----------------------------------------------------------
//
// Text format, one token group per line:
//   dlab-mlp 1
//   layer_sizes <n> <s0> ... <sn-1>
//   hidden_activation <label>
//   output_activation <label>
//   weight <i> <rows> <cols>    followed by <rows> lines of <cols> values
//   bias <i> <len>              followed by one line of <len> values
//   end
// Values use the shortest representation that round-trips exactly.

namespace {

void write_double(std::ostream& os, double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    os.write(buf, res.ptr - buf);
}

double read_double(std::istream& is) {
    std::string tok;
    if (!(is >> tok)) throw FormatError("checkpoint: unexpected end of file");
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw FormatError("checkpoint: bad number '" + tok + "'");
    return v;
}

void expect(std::istream& is, const std::string& word) {
    std::string tok;
    if (!(is >> tok) || tok != word) throw FormatError("checkpoint: expected '" + word + "', got '" + tok + "'");
}

long read_int(std::istream& is) {
    long v = 0;
    if (!(is >> v)) throw FormatError("checkpoint: expected integer");
    return v;
}

}  // namespace

void save_mlp(const Mlp& m, std::ostream& os) {
    m.validate();
    os << "dlab-mlp 1\n";
    os << "layer_sizes " << m.layer_sizes.size();
    for (int s : m.layer_sizes) os << ' ' << s;
    os << "\nhidden_activation " << activation_label(m.hidden_activation) << "\n";
    os << "output_activation " << activation_label(m.output_activation) << "\n";
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
        const Tensor& w = m.weights[i];
        os << "weight " << i << ' ' << w.rows() << ' ' << w.cols() << "\n";
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                if (c) os << ' ';
                write_double(os, w(r, c));
            }
            os << "\n";
        }
        os << "bias " << i << ' ' << m.biases[i].size() << "\n";
        for (Eigen::Index k = 0; k < m.biases[i].size(); ++k) {
            if (k) os << ' ';
            write_double(os, m.biases[i](k));
        }
        os << "\n";
    }
    os << "end\n";
}

Mlp load_mlp(std::istream& is) {
    expect(is, "dlab-mlp");
    if (read_int(is) != 1) throw FormatError("checkpoint: unsupported version");
    Mlp m;
    expect(is, "layer_sizes");
    const long n = read_int(is);
    if (n < 2 || n > 1024) throw FormatError("checkpoint: bad layer count");
    for (long i = 0; i < n; ++i) m.layer_sizes.push_back(static_cast<int>(read_int(is)));
    std::string label;
    expect(is, "hidden_activation");
    is >> label;
    m.hidden_activation = parse_activation(label);
    expect(is, "output_activation");
    is >> label;
    m.output_activation = parse_activation(label);
    for (long i = 0; i + 1 < n; ++i) {
        expect(is, "weight");
        if (read_int(is) != i) throw FormatError("checkpoint: layers out of order");
        const long rows = read_int(is), cols = read_int(is);
        if (rows != m.layer_sizes[i + 1] || cols != m.layer_sizes[i])
            throw FormatError("checkpoint: weight shape disagrees with layer_sizes");
        Tensor w(rows, cols);
        for (long r = 0; r < rows; ++r)
            for (long c = 0; c < cols; ++c) w(r, c) = read_double(is);
        expect(is, "bias");
        if (read_int(is) != i) throw FormatError("checkpoint: layers out of order");
        const long len = read_int(is);
        if (len != rows) throw FormatError("checkpoint: bias length disagrees with layer_sizes");
        Eigen::VectorXd b(len);
        for (long k = 0; k < len; ++k) b(k) = read_double(is);
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
    }
    expect(is, "end");
    m.validate();
    return m;
}

void save_mlp(const Mlp& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    save_mlp(m, os);
    if (!os) throw IoError("write failed for '" + path + "'");
}

Mlp load_mlp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint '" + path + "'");
    return load_mlp(is);
}

// ---- architecture pool ----------------------------------------------------

std::vector<FamilyWeight> default_arch_pool() {
    return {{"wide-mlp", 0.6}, {"deep-mlp", 0.2}, {"mlp", 0.2}};
}

ArchSpec sample_arch(std::span<const FamilyWeight> pool, Rng& rng) {
    if (pool.empty()) throw ValidationError("sample_arch: empty architecture pool");
    double total = 0.0;
    for (const auto& f : pool) {
        if (!(f.weight >= 0.0)) throw ValidationError("sample_arch: negative family weight");
        total += f.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("sample_arch: family weights must sum to 1");

    const double u = rng.uniform();
    std::size_t pick = pool.size() - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        acc += pool[i].weight;
        if (u < acc) {
            pick = i;
            break;
        }
    }

    ArchSpec spec;
    spec.family = pool[pick].family;
    spec.depth = static_cast<int>(rng.uniform_int(1, 4));
    auto width = [&] { return kArchWidths[rng.uniform_int(0, 3)]; };
    spec.widths.clear();
    if (spec.family == "wide-mlp") {
        // DCGAN stand-in: one width throughout, LeakyReLU or tanh.
        const int w = width();
        spec.widths.assign(spec.depth, w);
        spec.hidden_activation = rng.uniform_int(0, 1) ? Activation::Tanh : Activation::LeakyRelu;
    } else if (spec.family == "deep-mlp") {
        // ResNet stand-in: one width throughout, ReLU.
        const int w = width();
        spec.widths.assign(spec.depth, w);
        spec.hidden_activation = Activation::Relu;
    } else {
        for (int i = 0; i < spec.depth; ++i) spec.widths.push_back(width());
        constexpr Activation acts[] = {Activation::Relu, Activation::LeakyRelu, Activation::Tanh};
        spec.hidden_activation = acts[rng.uniform_int(0, 2)];
    }
    return spec;
}

}  // namespace dlab
