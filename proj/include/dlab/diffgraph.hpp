#pragma once

// Reverse-mode differentiation over rank-2 tensors.
//
// A Graph is an append-only list of nodes; parents always precede children,
// so append order is a topological order. Values are not stored on nodes:
// eval_forward() computes them for a set of input bindings. grad() appends
// the adjoint computation to the same graph as ordinary nodes, which is what
// makes gradients of gradients (double backpropagation) work.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace dlab {

using Tensor = Eigen::MatrixXd;

struct Shape {
    Eigen::Index rows = 1;
    Eigen::Index cols = 1;

    bool operator==(const Shape&) const = default;
    Eigen::Index size() const { return rows * cols; }
    bool is_scalar() const { return rows == 1 && cols == 1; }
    std::string str() const;
};

inline Shape shape_of(const Tensor& t) { return {t.rows(), t.cols()}; }

enum class Op : std::uint8_t {
    Input,       // placeholder, optionally carrying a default value
    Constant,
    Add,
    Sub,
    Mul,         // elementwise
    Div,         // elementwise; attr0 != 0 maps x/0 to 0
    Neg,
    Scale,       // x * attr0
    Shift,       // x + attr0
    MatMul,
    Transpose,
    Sum,         // -> 1x1
    Mean,        // -> 1x1
    SumTo,       // reduce onto a broadcast-compatible shape
    Broadcast,   // expand a 1x1, 1xc or rx1 tensor
    Relu,
    LeakyRelu,   // attr0 = slope
    Max0,
    Tanh,
    Sigmoid,
    Exp,
    Log,
    Square,
    Sqrt,
    L2Norm,      // row-wise sqrt(sum x^2 + attr0) -> rx1
    Clamp,       // [attr0, attr1]
    StepMask,    // 1 where x > 0 else attr0; zero derivative
    ClampMask,   // 1 where attr0 <= x <= attr1 else 0; zero derivative
    Detach,      // identity forward, blocks gradient flow
    CheckFinite, // identity forward, throws on non-finite entries
};

const char* op_name(Op op);

class Graph;

// Lightweight handle to a node. Valid as long as its Graph is alive.
class Node {
public:
    Node() = default;
    Node(Graph* graph, std::uint32_t id) : graph_(graph), id_(id) {}

    std::uint32_t id() const { return id_; }
    Graph& graph() const { return *graph_; }
    bool valid() const { return graph_ != nullptr; }
    const Shape& shape() const;

    bool operator==(const Node& other) const { return graph_ == other.graph_ && id_ == other.id_; }

private:
    Graph* graph_ = nullptr;
    std::uint32_t id_ = 0;
};

struct NodeRecord {
    Op op = Op::Constant;
    std::uint8_t arity = 0;
    std::uint32_t parents[2] = {0, 0};
    Shape shape;
    double attr0 = 0.0;
    double attr1 = 0.0;
    std::optional<Tensor> value;  // Constant payload, or default binding for Input
    std::string label;            // Input name or CheckFinite message
};

class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    // Nodes hold a pointer to their graph, so graphs stay put.
    Graph(Graph&&) = delete;
    Graph& operator=(Graph&&) = delete;

    // Unbound placeholder; must be bound at evaluation time.
    Node input(Shape shape, std::string name = {});
    // Input with a default value (a trainable leaf). Bindings may override it.
    Node variable(Tensor value, std::string name = {});
    Node constant(Tensor value);
    Node scalar(double v);
    Node zeros(Shape shape);
    Node ones(Shape shape);

    std::size_t size() const { return nodes_.size(); }
    const NodeRecord& record(std::uint32_t id) const { return nodes_.at(id); }
    const NodeRecord& record(Node n) const { return record(n.id()); }

    Node append(NodeRecord rec);

private:
    std::vector<NodeRecord> nodes_;
};

class Bindings {
public:
    Bindings& bind(Node n, Tensor value) {
        values_[n.id()] = std::move(value);
        return *this;
    }
    const Tensor* find(std::uint32_t id) const {
        auto it = values_.find(id);
        return it == values_.end() ? nullptr : &it->second;
    }

private:
    std::unordered_map<std::uint32_t, Tensor> values_;
};

class Values {
public:
    explicit Values(std::vector<Tensor> v) : v_(std::move(v)) {}
    const Tensor& operator[](Node n) const { return v_.at(n.id()); }
    const Tensor& at(std::uint32_t id) const { return v_.at(id); }
    double scalar(Node n) const { return (*this)[n](0, 0); }
    std::size_t size() const { return v_.size(); }

private:
    std::vector<Tensor> v_;
};

// Evaluates every node in append order. Throws ValidationError("missing
// binding ...") for unbound inputs and ShapeError for binding mismatches.
Values eval_forward(const Graph& graph, const Bindings& bindings = {});

// Builds d(output)/d(wrt[i]) as new nodes of the graph. With create_graph the
// results are differentiable; otherwise they are wrapped in Detach and any
// later differentiation treats them as constants. A wrt node that does not
// influence the output yields a zero node.
std::vector<Node> grad(Node output, std::span<const Node> wrt, bool create_graph);
Node grad(Node output, Node wrt, bool create_graph);

// Central differences, (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& point, double step);

// ---- node constructors ----------------------------------------------------

Node operator+(Node a, Node b);
Node operator-(Node a, Node b);
Node operator*(Node a, Node b);  // elementwise
Node operator/(Node a, Node b);  // elementwise
Node operator-(Node a);
Node operator*(double s, Node a);
Node operator*(Node a, double s);
Node operator+(Node a, double s);
Node operator-(Node a, double s);

Node div_guarded(Node a, Node b);
Node matmul(Node a, Node b);
Node transpose(Node a);
Node sum(Node a);
Node mean(Node a);
Node sum_to(Node a, Shape target);
Node broadcast(Node a, Shape target);
Node relu(Node a);
Node leaky_relu(Node a, double slope);
Node max0(Node a);
Node tanh(Node a);
Node sigmoid(Node a);
Node exp(Node a);
Node log(Node a);
Node square(Node a);
Node sqrt(Node a);
Node l2norm(Node a, double eps = 0.0);
Node clamp(Node a, double lo, double hi);
Node step_mask(Node a, double below);
Node clamp_mask(Node a, double lo, double hi);
Node detach(Node a);
Node check_finite(Node a, std::string message);

}  // namespace dlab
