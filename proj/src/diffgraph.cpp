#include "dlab/diffgraph.hpp"

#include "dlab/error.hpp"

#include <cmath>
#include <sstream>

namespace dlab {

std::string Shape::str() const {
    std::ostringstream os;
    os << rows << "x" << cols;
    return os.str();
}

const char* op_name(Op op) {
    switch (op) {
    case Op::Input: return "input";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::Scale: return "scale";
    case Op::Shift: return "shift";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::SumTo: return "sum_to";
    case Op::Broadcast: return "broadcast";
    case Op::Relu: return "relu";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::Max0: return "max0";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Square: return "square";
    case Op::Sqrt: return "sqrt";
    case Op::L2Norm: return "l2norm";
    case Op::Clamp: return "clamp";
    case Op::StepMask: return "step_mask";
    case Op::ClampMask: return "clamp_mask";
    case Op::Detach: return "detach";
    case Op::CheckFinite: return "check_finite";
    }
    return "?";
}

const Shape& Node::shape() const { return graph_->record(id_).shape; }

namespace {

std::string describe(const Graph& g, std::uint32_t id) {
    const auto& rec = g.record(id);
    std::ostringstream os;
    os << "node " << id << " (" << op_name(rec.op);
    if (!rec.label.empty()) os << " '" << rec.label << "'";
    os << ")";
    return os.str();
}

[[noreturn]] void shape_error(const std::string& what) { throw ShapeError("shape error: " + what); }

Graph& same_graph(Node a, Node b) {
    if (!a.valid() || !b.valid() || &a.graph() != &b.graph())
        throw ValidationError("nodes belong to different graphs");
    return a.graph();
}

Node unary(Op op, Node a, Shape shape, double attr0 = 0.0, double attr1 = 0.0) {
    if (!a.valid()) throw ValidationError("invalid node handle");
    NodeRecord rec;
    rec.op = op;
    rec.arity = 1;
    rec.parents[0] = a.id();
    rec.shape = shape;
    rec.attr0 = attr0;
    rec.attr1 = attr1;
    return a.graph().append(std::move(rec));
}

Node binary(Op op, Node a, Node b, Shape shape, double attr0 = 0.0) {
    Graph& g = same_graph(a, b);
    NodeRecord rec;
    rec.op = op;
    rec.arity = 2;
    rec.parents[0] = a.id();
    rec.parents[1] = b.id();
    rec.shape = shape;
    rec.attr0 = attr0;
    return g.append(std::move(rec));
}

Node elementwise(Op op, Node a, Node b, double attr0 = 0.0) {
    if (!(a.shape() == b.shape()))
        shape_error(std::string(op_name(op)) + " of " + a.shape().str() + " and " + b.shape().str());
    return binary(op, a, b, a.shape(), attr0);
}

bool broadcastable(Shape from, Shape to) {
    return (from.rows == to.rows || from.rows == 1) && (from.cols == to.cols || from.cols == 1);
}

double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor broadcast_value(const Tensor& v, Shape to) {
    if (v.rows() == to.rows && v.cols() == to.cols) return v;
    if (v.rows() == 1 && v.cols() == 1) return Tensor::Constant(to.rows, to.cols, v(0, 0));
    if (v.rows() == 1) return v.replicate(to.rows, 1);
    return v.replicate(1, to.cols);
}

Tensor sum_to_value(const Tensor& v, Shape to) {
    if (v.rows() == to.rows && v.cols() == to.cols) return v;
    if (to.rows == 1 && to.cols == 1) return Tensor::Constant(1, 1, v.sum());
    if (to.rows == 1) return v.colwise().sum();
    return v.rowwise().sum();
}

}  // namespace

// ---- Graph -----------------------------------------------------------------

Node Graph::append(NodeRecord rec) {
    for (int i = 0; i < rec.arity; ++i)
        if (rec.parents[i] >= nodes_.size()) throw ValidationError("parent does not precede child");
    nodes_.push_back(std::move(rec));
    return Node(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Node Graph::input(Shape shape, std::string name) {
    if (shape.rows < 1 || shape.cols < 1) shape_error("input '" + name + "' has empty shape " + shape.str());
    NodeRecord rec;
    rec.op = Op::Input;
    rec.shape = shape;
    rec.label = std::move(name);
    return append(std::move(rec));
}

Node Graph::variable(Tensor value, std::string name) {
    NodeRecord rec;
    rec.op = Op::Input;
    rec.shape = shape_of(value);
    if (rec.shape.size() == 0) shape_error("variable '" + name + "' is empty");
    rec.value = std::move(value);
    rec.label = std::move(name);
    return append(std::move(rec));
}

Node Graph::constant(Tensor value) {
    NodeRecord rec;
    rec.op = Op::Constant;
    rec.shape = shape_of(value);
    if (rec.shape.size() == 0) shape_error("constant is empty");
    rec.value = std::move(value);
    return append(std::move(rec));
}

Node Graph::scalar(double v) { return constant(Tensor::Constant(1, 1, v)); }
Node Graph::zeros(Shape shape) { return constant(Tensor::Zero(shape.rows, shape.cols)); }
Node Graph::ones(Shape shape) { return constant(Tensor::Ones(shape.rows, shape.cols)); }

// ---- constructors ----------------------------------------------------------

Node operator+(Node a, Node b) { return elementwise(Op::Add, a, b); }
Node operator-(Node a, Node b) { return elementwise(Op::Sub, a, b); }
Node operator*(Node a, Node b) { return elementwise(Op::Mul, a, b); }
Node operator/(Node a, Node b) { return elementwise(Op::Div, a, b, 0.0); }
Node div_guarded(Node a, Node b) { return elementwise(Op::Div, a, b, 1.0); }
Node operator-(Node a) { return unary(Op::Neg, a, a.shape()); }
Node operator*(double s, Node a) { return unary(Op::Scale, a, a.shape(), s); }
Node operator*(Node a, double s) { return unary(Op::Scale, a, a.shape(), s); }
Node operator+(Node a, double s) { return unary(Op::Shift, a, a.shape(), s); }
Node operator-(Node a, double s) { return unary(Op::Shift, a, a.shape(), -s); }

Node matmul(Node a, Node b) {
    if (a.shape().cols != b.shape().rows)
        shape_error("matmul of " + a.shape().str() + " and " + b.shape().str());
    return binary(Op::MatMul, a, b, {a.shape().rows, b.shape().cols});
}

Node transpose(Node a) {
    const auto& rec = a.graph().record(a);
    if (rec.op == Op::Transpose) return Node(&a.graph(), rec.parents[0]);
    return unary(Op::Transpose, a, {a.shape().cols, a.shape().rows});
}

Node sum(Node a) { return unary(Op::Sum, a, {1, 1}); }
Node mean(Node a) { return unary(Op::Mean, a, {1, 1}); }

Node sum_to(Node a, Shape target) {
    if (!broadcastable(target, a.shape()))
        shape_error("sum_to " + target.str() + " from " + a.shape().str());
    if (target == a.shape()) return a;
    return unary(Op::SumTo, a, target);
}

Node broadcast(Node a, Shape target) {
    if (!broadcastable(a.shape(), target))
        shape_error("broadcast " + a.shape().str() + " to " + target.str());
    if (target == a.shape()) return a;
    return unary(Op::Broadcast, a, target);
}

Node relu(Node a) { return unary(Op::Relu, a, a.shape()); }
Node leaky_relu(Node a, double slope) { return unary(Op::LeakyRelu, a, a.shape(), slope); }
Node max0(Node a) { return unary(Op::Max0, a, a.shape()); }
Node tanh(Node a) { return unary(Op::Tanh, a, a.shape()); }
Node sigmoid(Node a) { return unary(Op::Sigmoid, a, a.shape()); }
Node exp(Node a) { return unary(Op::Exp, a, a.shape()); }
Node log(Node a) { return unary(Op::Log, a, a.shape()); }
Node square(Node a) { return unary(Op::Square, a, a.shape()); }
Node sqrt(Node a) { return unary(Op::Sqrt, a, a.shape()); }
Node l2norm(Node a, double eps) {
    if (eps < 0.0) throw ValidationError("l2norm: eps must be >= 0");
    return unary(Op::L2Norm, a, {a.shape().rows, 1}, eps);
}
Node clamp(Node a, double lo, double hi) {
    if (!(lo <= hi)) throw ValidationError("clamp: lo > hi");
    return unary(Op::Clamp, a, a.shape(), lo, hi);
}
Node step_mask(Node a, double below) { return unary(Op::StepMask, a, a.shape(), below); }
Node clamp_mask(Node a, double lo, double hi) { return unary(Op::ClampMask, a, a.shape(), lo, hi); }
Node detach(Node a) { return unary(Op::Detach, a, a.shape()); }
Node check_finite(Node a, std::string message) {
    if (!a.valid()) throw ValidationError("invalid node handle");
    NodeRecord rec;
    rec.op = Op::CheckFinite;
    rec.arity = 1;
    rec.parents[0] = a.id();
    rec.shape = a.shape();
    rec.label = std::move(message);
    return a.graph().append(std::move(rec));
}

// ---- forward evaluation ----------------------------------------------------

Values eval_forward(const Graph& graph, const Bindings& bindings) {
    std::vector<Tensor> v(graph.size());
    for (std::uint32_t id = 0; id < graph.size(); ++id) {
        const NodeRecord& r = graph.record(id);
        const Tensor* a = r.arity > 0 ? &v[r.parents[0]] : nullptr;
        const Tensor* b = r.arity > 1 ? &v[r.parents[1]] : nullptr;
        Tensor& out = v[id];
        switch (r.op) {
        case Op::Input: {
            const Tensor* bound = bindings.find(id);
            if (!bound) bound = r.value ? &*r.value : nullptr;
            if (!bound) throw ValidationError("missing binding for " + describe(graph, id));
            if (!(shape_of(*bound) == r.shape))
                shape_error(describe(graph, id) + " expects " + r.shape.str() + ", bound " +
                            shape_of(*bound).str());
            out = *bound;
            break;
        }
        case Op::Constant: out = *r.value; break;
        case Op::Add: out = *a + *b; break;
        case Op::Sub: out = *a - *b; break;
        case Op::Mul: out = a->cwiseProduct(*b); break;
        case Op::Div:
            if (r.attr0 != 0.0)
                out = a->binaryExpr(*b, [](double x, double y) { return y == 0.0 ? 0.0 : x / y; });
            else
                out = a->cwiseQuotient(*b);
            break;
        case Op::Neg: out = -*a; break;
        case Op::Scale: out = *a * r.attr0; break;
        case Op::Shift: out = a->array() + r.attr0; break;
        case Op::MatMul: out.noalias() = *a * *b; break;
        case Op::Transpose: out = a->transpose(); break;
        case Op::Sum: out = Tensor::Constant(1, 1, a->sum()); break;
        case Op::Mean: out = Tensor::Constant(1, 1, a->mean()); break;
        case Op::SumTo: out = sum_to_value(*a, r.shape); break;
        case Op::Broadcast: out = broadcast_value(*a, r.shape); break;
        case Op::Relu:
        case Op::Max0: out = a->cwiseMax(0.0); break;
        case Op::LeakyRelu: {
            const double s = r.attr0;
            out = a->unaryExpr([s](double x) { return x > 0.0 ? x : s * x; });
            break;
        }
        case Op::Tanh: out = a->array().tanh(); break;
        case Op::Sigmoid: out = a->unaryExpr(&sigmoid_scalar); break;
        case Op::Exp: out = a->array().exp(); break;
        case Op::Log:
            for (Eigen::Index i = 0; i < a->size(); ++i)
                if (!((*a)(i) > 0.0))
                    throw DomainError("domain error: log of " + std::to_string((*a)(i)) + " at " +
                                      describe(graph, id));
            out = a->array().log();
            break;
        case Op::Square: out = a->array().square(); break;
        case Op::Sqrt:
            for (Eigen::Index i = 0; i < a->size(); ++i)
                if (!((*a)(i) >= 0.0))
                    throw DomainError("domain error: sqrt of " + std::to_string((*a)(i)) + " at " +
                                      describe(graph, id));
            out = a->array().sqrt();
            break;
        case Op::L2Norm: out = (a->array().square().rowwise().sum() + r.attr0).sqrt(); break;
        case Op::Clamp: out = a->cwiseMax(r.attr0).cwiseMin(r.attr1); break;
        case Op::StepMask: {
            const double below = r.attr0;
            out = a->unaryExpr([below](double x) { return x > 0.0 ? 1.0 : below; });
            break;
        }
        case Op::ClampMask: {
            const double lo = r.attr0, hi = r.attr1;
            out = a->unaryExpr([lo, hi](double x) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
            break;
        }
        case Op::Detach: out = *a; break;
        case Op::CheckFinite:
            for (Eigen::Index row = 0; row < a->rows(); ++row)
                if (!a->row(row).allFinite())
                    throw NumericError(r.label + " (example " + std::to_string(row) + ")");
            out = *a;
            break;
        }
    }
    return Values(std::move(v));
}

// ---- reverse mode ----------------------------------------------------------

namespace {

bool blocks_gradient(Op op) {
    return op == Op::Detach || op == Op::StepMask || op == Op::ClampMask || op == Op::Constant;
}

// Adds the vector-Jacobian contributions of node `id` (adjoint `g`) to the
// adjoints of its parents. Every contribution is built from graph ops, so the
// result can itself be differentiated.
void backprop_node(Graph& graph, std::uint32_t id, Node g, const std::vector<char>& depends,
                   std::vector<Node>& adj) {
    // Copy what we need: appending may reallocate the node store.
    const NodeRecord r = [&] {
        const NodeRecord& src = graph.record(id);
        NodeRecord c;
        c.op = src.op;
        c.arity = src.arity;
        c.parents[0] = src.parents[0];
        c.parents[1] = src.parents[1];
        c.shape = src.shape;
        c.attr0 = src.attr0;
        c.attr1 = src.attr1;
        return c;
    }();
    Node y(&graph, id);
    Node a = r.arity > 0 ? Node(&graph, r.parents[0]) : Node();
    Node b = r.arity > 1 ? Node(&graph, r.parents[1]) : Node();
    const bool da = r.arity > 0 && depends[r.parents[0]];
    const bool db = r.arity > 1 && depends[r.parents[1]];

    auto accumulate = [&](Node parent, Node contribution) {
        Node& slot = adj[parent.id()];
        slot = slot.valid() ? slot + contribution : contribution;
    };

    switch (r.op) {
    case Op::Input:
    case Op::Constant:
    case Op::Detach:
    case Op::StepMask:
    case Op::ClampMask: break;
    case Op::Add:
        if (da) accumulate(a, g);
        if (db) accumulate(b, g);
        break;
    case Op::Sub:
        if (da) accumulate(a, g);
        if (db) accumulate(b, -g);
        break;
    case Op::Mul:
        if (da) accumulate(a, g * b);
        if (db) accumulate(b, g * a);
        break;
    case Op::Div: {
        const bool guarded = r.attr0 != 0.0;
        auto divide = [guarded](Node x, Node d) { return guarded ? div_guarded(x, d) : x / d; };
        if (da) accumulate(a, divide(g, b));
        if (db) accumulate(b, -divide(g * y, b));
        break;
    }
    case Op::Neg:
        if (da) accumulate(a, -g);
        break;
    case Op::Scale:
        if (da) accumulate(a, g * r.attr0);
        break;
    case Op::Shift:
    case Op::CheckFinite:
        if (da) accumulate(a, g);
        break;
    case Op::MatMul:
        if (da) accumulate(a, matmul(g, transpose(b)));
        if (db) accumulate(b, matmul(transpose(a), g));
        break;
    case Op::Transpose:
        if (da) accumulate(a, transpose(g));
        break;
    case Op::Sum:
        if (da) accumulate(a, broadcast(g, a.shape()));
        break;
    case Op::Mean:
        if (da) accumulate(a, broadcast(g, a.shape()) * (1.0 / static_cast<double>(a.shape().size())));
        break;
    case Op::SumTo:
        if (da) accumulate(a, broadcast(g, a.shape()));
        break;
    case Op::Broadcast:
        if (da) accumulate(a, sum_to(g, a.shape()));
        break;
    case Op::Relu:
    case Op::Max0:
        if (da) accumulate(a, g * step_mask(a, 0.0));
        break;
    case Op::LeakyRelu:
        if (da) accumulate(a, g * step_mask(a, r.attr0));
        break;
    case Op::Tanh:
        // 1 - y^2
        if (da) accumulate(a, g * (-square(y) + 1.0));
        break;
    case Op::Sigmoid:
        if (da) accumulate(a, g * (y * (-y + 1.0)));
        break;
    case Op::Exp:
        if (da) accumulate(a, g * y);
        break;
    case Op::Log:
        if (da) accumulate(a, g / a);
        break;
    case Op::Square:
        if (da) accumulate(a, g * (a * 2.0));
        break;
    case Op::Sqrt:
        if (da) accumulate(a, div_guarded(g * 0.5, y));
        break;
    case Op::L2Norm:
        if (da) accumulate(a, broadcast(div_guarded(g, y), a.shape()) * a);
        break;
    case Op::Clamp:
        if (da) accumulate(a, g * clamp_mask(a, r.attr0, r.attr1));
        break;
    }
}

}  // namespace

std::vector<Node> grad(Node output, std::span<const Node> wrt, bool create_graph) {
    if (!output.valid()) throw ValidationError("grad: invalid output node");
    Graph& graph = output.graph();
    if (!output.shape().is_scalar())
        throw ValidationError("grad: output must be scalar, got " + output.shape().str());
    for (const Node& w : wrt)
        if (!w.valid() || &w.graph() != &graph || w.id() >= graph.size())
            throw ValidationError("grad: wrt node not in graph");

    const std::uint32_t end = output.id() + 1;
    std::vector<char> depends(end, 0);
    for (const Node& w : wrt)
        if (w.id() < end) depends[w.id()] = 1;
    for (std::uint32_t id = 0; id < end; ++id) {
        if (depends[id]) continue;
        const NodeRecord& r = graph.record(id);
        if (blocks_gradient(r.op)) continue;
        for (int i = 0; i < r.arity; ++i)
            if (depends[r.parents[i]]) depends[id] = 1;
    }

    std::vector<Node> adj(end);
    if (depends[output.id()]) {
        adj[output.id()] = graph.scalar(1.0);
        for (std::uint32_t id = output.id() + 1; id-- > 0;) {
            if (!adj[id].valid() || !depends[id]) continue;
            backprop_node(graph, id, adj[id], depends, adj);
        }
    }

    std::vector<Node> out;
    out.reserve(wrt.size());
    for (const Node& w : wrt) {
        Node g = (w.id() < end && adj[w.id()].valid()) ? adj[w.id()] : graph.zeros(w.shape());
        out.push_back(create_graph ? g : detach(g));
    }
    return out;
}

Node grad(Node output, Node wrt, bool create_graph) {
    const Node w[1] = {wrt};
    return grad(output, std::span<const Node>(w, 1), create_graph).front();
}

Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& point, double step) {
    if (!(step > 0.0)) throw ValidationError("finite_diff: step must be > 0");
    Tensor g(point.rows(), point.cols());
    Tensor x = point;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double orig = x(i);
        x(i) = orig + step;
        const double fp = f(x);
        x(i) = orig - step;
        const double fm = f(x);
        x(i) = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) throw NumericError("non-finite evaluation");
        g(i) = (fp - fm) / (2.0 * step);
    }
    return g;
}

}  // namespace dlab
