#include "bigat/graph.hpp"

#include <algorithm>
#include <cmath>

namespace bigat::ad {

namespace {

double sigmoid_scalar(double x) {
    // split by sign to avoid overflow in exp
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_scalar(double x) {
    // log(1 + e^x) = max(x, 0) + log1p(e^-|x|)
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

struct AxisSplit {
    int64_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, int64_t axis) {
    AxisSplit r;
    for (int64_t i = 0; i < axis; ++i) r.outer *= s[i];
    r.n = s[axis];
    for (int64_t i = axis + 1; i < s.rank(); ++i) r.inner *= s[i];
    return r;
}

Shape drop_axis(const Shape& s, int64_t axis) {
    std::vector<int64_t> d;
    for (int64_t i = 0; i < s.rank(); ++i)
        if (i != axis) d.push_back(s[i]);
    return Shape{std::move(d)};
}

void require_axis(const char* op, const Shape& s, int64_t axis) {
    if (axis < 0 || axis >= s.rank())
        throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                             " out of range for shape " + s.str());
}

} // namespace

const char* op_name(Op op) {
    switch (op) {
        case Op::kLeaf: return "leaf";
        case Op::kMatmul: return "matmul";
        case Op::kAdd: return "add";
        case Op::kSub: return "sub";
        case Op::kMul: return "mul";
        case Op::kConcat: return "concat";
        case Op::kSlice: return "slice";
        case Op::kSum: return "sum";
        case Op::kMax: return "max";
        case Op::kExp: return "exp";
        case Op::kLog: return "log";
        case Op::kTanh: return "tanh";
        case Op::kSigmoid: return "sigmoid";
        case Op::kRelu: return "relu";
        case Op::kLeakyRelu: return "leaky-relu";
        case Op::kElu: return "elu";
        case Op::kSoftplus: return "softplus";
        case Op::kSqrt: return "sqrt";
        case Op::kSoftmax: return "softmax";
        case Op::kL2Norm: return "l2-norm";
        case Op::kL1Norm: return "l1-norm";
        case Op::kBroadcast: return "broadcast";
        case Op::kReshape: return "reshape";
        case Op::kTranspose: return "transpose";
        case Op::kScale: return "scale";
        case Op::kAddScalar: return "add-scalar";
    }
    return "?";
}

void Graph::check_finite(const Node& n) const {
    for (double v : n.value.vec())
        if (!std::isfinite(v))
            throw NumericError(std::string("non-finite output in op '") + op_name(n.op) + "'");
}

int32_t Graph::push(Node n) {
    check_finite(n);
    nodes_.push_back(std::move(n));
    return static_cast<int32_t>(nodes_.size() - 1);
}

Value Graph::leaf(Tensor t, bool requires_grad) {
    Node n;
    n.op = Op::kLeaf;
    n.requires_grad = requires_grad;
    n.value = std::move(t);
    return Value(this, push(std::move(n)));
}

Value Graph::matmul(Value a, Value b, bool sorted_accumulate) {
    const Tensor& A = a.data();
    const Tensor& B = b.data();
    if (A.rank() != 2 || B.rank() != 2 || A.shape()[1] != B.shape()[0])
        throw DimensionError("matmul: incompatible shapes " + A.shape().str() + " x " +
                             B.shape().str());
    int64_t m = A.shape()[0], k = A.shape()[1], p = B.shape()[1];
    Node n;
    n.op = Op::kMatmul;
    n.requires_grad = a.requires_grad() || b.requires_grad();
    n.sorted_accum = sorted_accumulate;
    n.inputs = {a.id(), b.id()};
    n.value = Tensor{Shape{m, p}};
    if (sorted_accumulate) {
        std::vector<double> buf(static_cast<size_t>(k));
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < p; ++j) {
                for (int64_t t = 0; t < k; ++t) buf[static_cast<size_t>(t)] = A.at(i, t) * B.at(t, j);
                n.value.at(i, j) = stable_sum(buf);
            }
    } else {
        for (int64_t i = 0; i < m; ++i)
            for (int64_t t = 0; t < k; ++t) {
                double av = A.at(i, t);
                if (av == 0.0) continue;
                for (int64_t j = 0; j < p; ++j) n.value.at(i, j) += av * B.at(t, j);
            }
    }
    return Value(this, push(std::move(n)));
}

namespace {
Shape binary_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape()))
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                             b.shape().str());
    return a.shape();
}
} // namespace

Value Graph::add(Value a, Value b) {
    Node n;
    n.op = Op::kAdd;
    n.requires_grad = a.requires_grad() || b.requires_grad();
    n.inputs = {a.id(), b.id()};
    n.value = Tensor{binary_shape("add", a.data(), b.data())};
    for (int64_t i = 0; i < n.value.numel(); ++i) n.value[i] = a.data()[i] + b.data()[i];
    return Value(this, push(std::move(n)));
}

Value Graph::sub(Value a, Value b) {
    Node n;
    n.op = Op::kSub;
    n.requires_grad = a.requires_grad() || b.requires_grad();
    n.inputs = {a.id(), b.id()};
    n.value = Tensor{binary_shape("sub", a.data(), b.data())};
    for (int64_t i = 0; i < n.value.numel(); ++i) n.value[i] = a.data()[i] - b.data()[i];
    return Value(this, push(std::move(n)));
}

Value Graph::mul(Value a, Value b) {
    Node n;
    n.op = Op::kMul;
    n.requires_grad = a.requires_grad() || b.requires_grad();
    n.inputs = {a.id(), b.id()};
    n.value = Tensor{binary_shape("elementwise-mul", a.data(), b.data())};
    for (int64_t i = 0; i < n.value.numel(); ++i) n.value[i] = a.data()[i] * b.data()[i];
    return Value(this, push(std::move(n)));
}

Value Graph::concat(std::span<const Value> parts, int64_t axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    const Shape& first = parts[0].shape();
    require_axis("concat", first, axis);
    int64_t total = 0;
    for (const Value& p : parts) {
        const Shape& s = p.shape();
        if (s.rank() != first.rank())
            throw DimensionError("concat: rank mismatch " + first.str() + " vs " + s.str());
        for (int64_t i = 0; i < s.rank(); ++i)
            if (i != axis && s[i] != first[i])
                throw DimensionError("concat: shape mismatch " + first.str() + " vs " + s.str());
        total += s[axis];
    }
    std::vector<int64_t> dims = first.dims();
    dims[static_cast<size_t>(axis)] = total;
    Node n;
    n.op = Op::kConcat;
    n.axis = axis;
    n.value = Tensor{Shape{dims}};
    for (const Value& p : parts) {
        n.inputs.push_back(p.id());
        n.requires_grad = n.requires_grad || p.requires_grad();
    }
    AxisSplit sp = split_axis(n.value.shape(), axis);
    int64_t offset = 0;
    for (const Value& p : parts) {
        const Tensor& src = p.data();
        int64_t pn = src.shape()[axis];
        for (int64_t o = 0; o < sp.outer; ++o)
            for (int64_t j = 0; j < pn; ++j)
                for (int64_t in = 0; in < sp.inner; ++in)
                    n.value[(o * sp.n + offset + j) * sp.inner + in] =
                        src[(o * pn + j) * sp.inner + in];
        offset += pn;
    }
    return Value(this, push(std::move(n)));
}

Value Graph::slice(Value v, std::vector<int64_t> begin, std::vector<int64_t> extent) {
    const Shape& s = v.shape();
    if (static_cast<int64_t>(begin.size()) != s.rank() ||
        static_cast<int64_t>(extent.size()) != s.rank())
        throw DimensionError("slice: begin/extent rank mismatch for shape " + s.str());
    for (int64_t i = 0; i < s.rank(); ++i) {
        int64_t b = begin[static_cast<size_t>(i)], e = extent[static_cast<size_t>(i)];
        if (b < 0 || e <= 0 || b + e > s[i])
            throw DimensionError("slice: window out of bounds for shape " + s.str());
    }
    Node n;
    n.op = Op::kSlice;
    n.requires_grad = v.requires_grad();
    n.inputs = {v.id()};
    n.begin = begin;
    n.value = Tensor{Shape{extent}};
    const Tensor& src = v.data();
    int64_t rank = s.rank();
    std::vector<int64_t> idx(static_cast<size_t>(rank), 0);
    for (int64_t flat = 0; flat < n.value.numel(); ++flat) {
        int64_t rem = flat, src_flat = 0;
        for (int64_t d = rank - 1; d >= 0; --d) {
            idx[static_cast<size_t>(d)] = rem % extent[static_cast<size_t>(d)];
            rem /= extent[static_cast<size_t>(d)];
        }
        for (int64_t d = 0; d < rank; ++d)
            src_flat = src_flat * s[d] + begin[static_cast<size_t>(d)] + idx[static_cast<size_t>(d)];
        n.value[flat] = src[src_flat];
    }
    return Value(this, push(std::move(n)));
}

Value Graph::sum(Value v) {
    Node n;
    n.op = Op::kSum;
    n.axis = -1;
    n.requires_grad = v.requires_grad();
    n.inputs = {v.id()};
    double s = 0.0;
    for (double x : v.data().vec()) s += x;
    n.value = Tensor::scalar(s);
    return Value(this, push(std::move(n)));
}

Value Graph::sum(Value v, int64_t axis) {
    require_axis("sum", v.shape(), axis);
    Node n;
    n.op = Op::kSum;
    n.axis = axis;
    n.requires_grad = v.requires_grad();
    n.inputs = {v.id()};
    n.value = Tensor{drop_axis(v.shape(), axis)};
    AxisSplit sp = split_axis(v.shape(), axis);
    const Tensor& src = v.data();
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t in = 0; in < sp.inner; ++in) {
            double s = 0.0;
            for (int64_t j = 0; j < sp.n; ++j) s += src[(o * sp.n + j) * sp.inner + in];
            n.value[o * sp.inner + in] = s;
        }
    return Value(this, push(std::move(n)));
}

Value Graph::max(Value v, int64_t axis) {
    require_axis("max", v.shape(), axis);
    Node n;
    n.op = Op::kMax;
    n.axis = axis;
    n.requires_grad = v.requires_grad();
    n.inputs = {v.id()};
    n.value = Tensor{drop_axis(v.shape(), axis)};
    AxisSplit sp = split_axis(v.shape(), axis);
    n.arg_index.resize(static_cast<size_t>(n.value.numel()));
    const Tensor& src = v.data();
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t in = 0; in < sp.inner; ++in) {
            int64_t best = (o * sp.n) * sp.inner + in;
            double bv = src[best];
            for (int64_t j = 1; j < sp.n; ++j) {
                int64_t at = (o * sp.n + j) * sp.inner + in;
                if (src[at] > bv) {
                    bv = src[at];
                    best = at;
                }
            }
            n.value[o * sp.inner + in] = bv;
            n.arg_index[static_cast<size_t>(o * sp.inner + in)] = static_cast<int32_t>(best);
        }
    return Value(this, push(std::move(n)));
}

Value Graph::unary(Op op, Value v, double alpha) {
    Node n;
    n.op = op;
    n.alpha = alpha;
    n.requires_grad = v.requires_grad();
    n.inputs = {v.id()};
    n.value = Tensor{v.shape()};
    const Tensor& x = v.data();
    for (int64_t i = 0; i < x.numel(); ++i) {
        double xi = x[i];
        double y = 0.0;
        switch (op) {
            case Op::kExp: y = std::exp(xi); break;
            case Op::kLog: y = std::log(xi); break;
            case Op::kTanh: y = std::tanh(xi); break;
            case Op::kSigmoid: y = sigmoid_scalar(xi); break;
            case Op::kRelu: y = xi > 0.0 ? xi : 0.0; break;
            case Op::kLeakyRelu: y = xi > 0.0 ? xi : alpha * xi; break;
            case Op::kElu: y = xi > 0.0 ? xi : std::expm1(xi); break;
            case Op::kSoftplus: y = softplus_scalar(xi); break;
            case Op::kSqrt: y = std::sqrt(xi); break;
            case Op::kScale: y = alpha * xi; break;
            case Op::kAddScalar: y = xi + alpha; break;
            default: throw ContractError("unary: bad op");
        }
        n.value[i] = y;
    }
    return Value(this, push(std::move(n)));
}

Value Graph::exp(Value v) { return unary(Op::kExp, v); }
Value Graph::log(Value v) { return unary(Op::kLog, v); }
Value Graph::tanh(Value v) { return unary(Op::kTanh, v); }
Value Graph::sigmoid(Value v) { return unary(Op::kSigmoid, v); }
Value Graph::relu(Value v) { return unary(Op::kRelu, v); }

Value Graph::leaky_relu(Value v, double slope) {
    if (slope <= 0.0 || slope >= 1.0)
        throw ContractError("leaky-relu: slope must lie in (0,1)");
    return unary(Op::kLeakyRelu, v, slope);
}

Value Graph::elu(Value v) { return unary(Op::kElu, v); }
Value Graph::softplus(Value v) { return unary(Op::kSoftplus, v); }
Value Graph::sqrt(Value v) { return unary(Op::kSqrt, v); }
Value Graph::scale(Value v, double c) { return unary(Op::kScale, v, c); }
Value Graph::add_scalar(Value v, double c) { return unary(Op::kAddScalar, v, c); }

Value Graph::softmax(Value v, int64_t axis) {
    require_axis("softmax", v.shape(), axis);
    Node n;
    n.op = Op::kSoftmax;
    n.axis = axis;
    n.requires_grad = v.requires_grad();
    n.inputs = {v.id()};
    n.value = Tensor{v.shape()};
    AxisSplit sp = split_axis(v.shape(), axis);
    const Tensor& x = v.data();
    std::vector<double> buf(static_cast<size_t>(sp.n));
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t in = 0; in < sp.inner; ++in) {
            double m = x[(o * sp.n) * sp.inner + in];
            for (int64_t j = 1; j < sp.n; ++j)
                m = std::max(m, x[(o * sp.n + j) * sp.inner + in]);
            for (int64_t j = 0; j < sp.n; ++j)
                buf[static_cast<size_t>(j)] = std::exp(x[(o * sp.n + j) * sp.inner + in] - m);
            std::vector<double> terms = buf;
            double denom = stable_sum(terms);
            for (int64_t j = 0; j < sp.n; ++j)
                n.value[(o * sp.n + j) * sp.inner + in] = buf[static_cast<size_t>(j)] / denom;
        }
    return Value(this, push(std::move(n)));
}

Value Graph::l2_norm(Value v) {
    Node n;
    n.op = Op::kL2Norm;
    n.requires_grad = v.requires_grad();
    n.inputs = {v.id()};
    double s = 0.0;
    for (double x : v.data().vec()) s += x * x;
    n.value = Tensor::scalar(std::sqrt(s));
    return Value(this, push(std::move(n)));
}

Value Graph::l1_norm(Value v) {
    Node n;
    n.op = Op::kL1Norm;
    n.requires_grad = v.requires_grad();
    n.inputs = {v.id()};
    double s = 0.0;
    for (double x : v.data().vec()) s += std::abs(x);
    n.value = Tensor::scalar(s);
    return Value(this, push(std::move(n)));
}

Value Graph::broadcast(Value v, const Shape& target) {
    const Shape& s = v.shape();
    int64_t extra = target.rank() - s.rank();
    bool ok = extra >= 0;
    if (ok)
        for (int64_t i = 0; i < s.rank(); ++i)
            if (target[extra + i] != s[i]) ok = false;
    if (!ok)
        throw DimensionError("broadcast: " + s.str() + " is not a trailing suffix of " +
                             target.str());
    Node n;
    n.op = Op::kBroadcast;
    n.requires_grad = v.requires_grad();
    n.inputs = {v.id()};
    n.value = Tensor{target};
    int64_t copies = target.numel() / s.numel();
    const Tensor& src = v.data();
    for (int64_t c = 0; c < copies; ++c)
        for (int64_t i = 0; i < src.numel(); ++i) n.value[c * src.numel() + i] = src[i];
    return Value(this, push(std::move(n)));
}

Value Graph::reshape(Value v, Shape target) {
    if (target.numel() != v.numel())
        throw DimensionError("reshape: numel mismatch " + v.shape().str() + " -> " + target.str());
    Node n;
    n.op = Op::kReshape;
    n.requires_grad = v.requires_grad();
    n.inputs = {v.id()};
    n.value = Tensor::from(std::move(target), v.data().vec());
    return Value(this, push(std::move(n)));
}

Value Graph::transpose(Value v) {
    const Shape& s = v.shape();
    if (s.rank() != 2) throw DimensionError("transpose: expected rank 2, got " + s.str());
    Node n;
    n.op = Op::kTranspose;
    n.requires_grad = v.requires_grad();
    n.inputs = {v.id()};
    n.value = Tensor{Shape{s[1], s[0]}};
    const Tensor& x = v.data();
    for (int64_t i = 0; i < s[0]; ++i)
        for (int64_t j = 0; j < s[1]; ++j) n.value.at(j, i) = x.at(i, j);
    return Value(this, push(std::move(n)));
}

void Graph::add_into(Tensor& acc, const Tensor& g) {
    if (acc.empty()) {
        acc = Tensor{g.shape()};
    }
    for (int64_t i = 0; i < g.numel(); ++i) acc[i] += g[i];
}

void Graph::backward(Value root) {
    if (!root.valid() || &root.graph() != this)
        throw ContractError("backward: root from a different graph");
    if (root.numel() != 1)
        throw ContractError("backward: root must be scalar, got shape " + root.shape().str());

    // reverse reachability from the root along requires-grad edges
    std::vector<char> needed(nodes_.size(), 0);
    std::vector<int32_t> stack{root.id()};
    needed[static_cast<size_t>(root.id())] = 1;
    while (!stack.empty()) {
        int32_t id = stack.back();
        stack.pop_back();
        for (int32_t in : nodes_[static_cast<size_t>(id)].inputs) {
            if (!needed[static_cast<size_t>(in)] &&
                nodes_[static_cast<size_t>(in)].requires_grad) {
                needed[static_cast<size_t>(in)] = 1;
                stack.push_back(in);
            }
        }
    }

    std::vector<Tensor> flow(nodes_.size());
    flow[static_cast<size_t>(root.id())] = Tensor::full(root.shape(), 1.0);
    for (int32_t id = root.id(); id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!needed[static_cast<size_t>(id)] || !n.requires_grad) continue;
        Tensor& g = flow[static_cast<size_t>(id)];
        if (g.empty()) continue; // reachable but received no contribution
        add_into(n.grad, g);
        backprop_node(id, flow);
        g = Tensor{}; // release
    }
}

void Graph::backprop_node(int32_t id, std::vector<Tensor>& flow) {
    Node& n = nodes_[static_cast<size_t>(id)];
    const Tensor& g = flow[static_cast<size_t>(id)];
    auto input = [&](size_t i) -> Node& { return nodes_[static_cast<size_t>(n.inputs[i])]; };
    auto wants = [&](size_t i) { return input(i).requires_grad; };
    auto flow_of = [&](size_t i) -> Tensor& { return flow[static_cast<size_t>(n.inputs[i])]; };
    auto ensure = [&](size_t i) -> Tensor& {
        Tensor& f = flow_of(i);
        if (f.empty()) f = Tensor{input(i).value.shape()};
        return f;
    };

    switch (n.op) {
        case Op::kLeaf:
            break;
        case Op::kMatmul: {
            const Tensor& A = input(0).value;
            const Tensor& B = input(1).value;
            int64_t m = A.shape()[0], k = A.shape()[1], p = B.shape()[1];
            if (wants(0)) {
                Tensor& da = ensure(0); // g [m,p] * B^T [p,k]
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t t = 0; t < k; ++t) {
                        double s = 0.0;
                        for (int64_t j = 0; j < p; ++j) s += g.at(i, j) * B.at(t, j);
                        da.at(i, t) += s;
                    }
            }
            if (wants(1)) {
                Tensor& db = ensure(1); // A^T [k,m] * g [m,p]
                for (int64_t t = 0; t < k; ++t)
                    for (int64_t j = 0; j < p; ++j) {
                        double s = 0.0;
                        for (int64_t i = 0; i < m; ++i) s += A.at(i, t) * g.at(i, j);
                        db.at(t, j) += s;
                    }
            }
            break;
        }
        case Op::kAdd:
            if (wants(0)) add_into(flow_of(0), g);
            if (wants(1)) add_into(flow_of(1), g);
            break;
        case Op::kSub:
            if (wants(0)) add_into(flow_of(0), g);
            if (wants(1)) {
                Tensor& f = ensure(1);
                for (int64_t i = 0; i < g.numel(); ++i) f[i] -= g[i];
            }
            break;
        case Op::kMul: {
            const Tensor& a = input(0).value;
            const Tensor& b = input(1).value;
            if (wants(0)) {
                Tensor& f = ensure(0);
                for (int64_t i = 0; i < g.numel(); ++i) f[i] += g[i] * b[i];
            }
            if (wants(1)) {
                Tensor& f = ensure(1);
                for (int64_t i = 0; i < g.numel(); ++i) f[i] += g[i] * a[i];
            }
            break;
        }
        case Op::kConcat: {
            AxisSplit sp = split_axis(n.value.shape(), n.axis);
            int64_t offset = 0;
            for (size_t i = 0; i < n.inputs.size(); ++i) {
                const Shape& ps = input(i).value.shape();
                int64_t pn = ps[n.axis];
                if (wants(i)) {
                    Tensor& f = ensure(i);
                    for (int64_t o = 0; o < sp.outer; ++o)
                        for (int64_t j = 0; j < pn; ++j)
                            for (int64_t in = 0; in < sp.inner; ++in)
                                f[(o * pn + j) * sp.inner + in] +=
                                    g[(o * sp.n + offset + j) * sp.inner + in];
                }
                offset += pn;
            }
            break;
        }
        case Op::kSlice: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            const Shape& in_s = input(0).value.shape();
            const Shape& out_s = n.value.shape();
            int64_t rank = in_s.rank();
            std::vector<int64_t> idx(static_cast<size_t>(rank), 0);
            for (int64_t flat = 0; flat < g.numel(); ++flat) {
                int64_t rem = flat, src_flat = 0;
                for (int64_t d = rank - 1; d >= 0; --d) {
                    idx[static_cast<size_t>(d)] = rem % out_s[d];
                    rem /= out_s[d];
                }
                for (int64_t d = 0; d < rank; ++d)
                    src_flat = src_flat * in_s[d] + n.begin[static_cast<size_t>(d)] +
                               idx[static_cast<size_t>(d)];
                f[src_flat] += g[flat];
            }
            break;
        }
        case Op::kSum: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            if (n.axis < 0) {
                double gv = g[0];
                for (int64_t i = 0; i < f.numel(); ++i) f[i] += gv;
            } else {
                AxisSplit sp = split_axis(input(0).value.shape(), n.axis);
                for (int64_t o = 0; o < sp.outer; ++o)
                    for (int64_t j = 0; j < sp.n; ++j)
                        for (int64_t in = 0; in < sp.inner; ++in)
                            f[(o * sp.n + j) * sp.inner + in] += g[o * sp.inner + in];
            }
            break;
        }
        case Op::kMax: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            for (int64_t i = 0; i < g.numel(); ++i)
                f[n.arg_index[static_cast<size_t>(i)]] += g[i];
            break;
        }
        case Op::kExp: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            for (int64_t i = 0; i < g.numel(); ++i) f[i] += g[i] * n.value[i];
            break;
        }
        case Op::kLog: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            const Tensor& x = input(0).value;
            for (int64_t i = 0; i < g.numel(); ++i) f[i] += g[i] / x[i];
            break;
        }
        case Op::kTanh: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            for (int64_t i = 0; i < g.numel(); ++i)
                f[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
            break;
        }
        case Op::kSigmoid: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            for (int64_t i = 0; i < g.numel(); ++i)
                f[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
            break;
        }
        case Op::kRelu: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            const Tensor& x = input(0).value;
            for (int64_t i = 0; i < g.numel(); ++i)
                if (x[i] > 0.0) f[i] += g[i];
            break;
        }
        case Op::kLeakyRelu: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            const Tensor& x = input(0).value;
            for (int64_t i = 0; i < g.numel(); ++i)
                f[i] += g[i] * (x[i] > 0.0 ? 1.0 : n.alpha);
            break;
        }
        case Op::kElu: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            const Tensor& x = input(0).value;
            for (int64_t i = 0; i < g.numel(); ++i)
                f[i] += g[i] * (x[i] > 0.0 ? 1.0 : n.value[i] + 1.0);
            break;
        }
        case Op::kSoftplus: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            const Tensor& x = input(0).value;
            for (int64_t i = 0; i < g.numel(); ++i) f[i] += g[i] * sigmoid_scalar(x[i]);
            break;
        }
        case Op::kSqrt: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            for (int64_t i = 0; i < g.numel(); ++i) f[i] += g[i] * 0.5 / n.value[i];
            break;
        }
        case Op::kSoftmax: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            AxisSplit sp = split_axis(n.value.shape(), n.axis);
            for (int64_t o = 0; o < sp.outer; ++o)
                for (int64_t in = 0; in < sp.inner; ++in) {
                    double dot = 0.0;
                    for (int64_t j = 0; j < sp.n; ++j) {
                        int64_t at = (o * sp.n + j) * sp.inner + in;
                        dot += g[at] * n.value[at];
                    }
                    for (int64_t j = 0; j < sp.n; ++j) {
                        int64_t at = (o * sp.n + j) * sp.inner + in;
                        f[at] += n.value[at] * (g[at] - dot);
                    }
                }
            break;
        }
        case Op::kL2Norm: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            const Tensor& x = input(0).value;
            double norm = n.value[0];
            if (norm > 0.0)
                for (int64_t i = 0; i < x.numel(); ++i) f[i] += g[0] * x[i] / norm;
            break;
        }
        case Op::kL1Norm: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            const Tensor& x = input(0).value;
            for (int64_t i = 0; i < x.numel(); ++i) {
                double s = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
                f[i] += g[0] * s;
            }
            break;
        }
        case Op::kBroadcast: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            int64_t base = f.numel();
            int64_t copies = g.numel() / base;
            for (int64_t c = 0; c < copies; ++c)
                for (int64_t i = 0; i < base; ++i) f[i] += g[c * base + i];
            break;
        }
        case Op::kReshape: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            for (int64_t i = 0; i < g.numel(); ++i) f[i] += g[i];
            break;
        }
        case Op::kTranspose: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            const Shape& out_s = n.value.shape();
            for (int64_t i = 0; i < out_s[0]; ++i)
                for (int64_t j = 0; j < out_s[1]; ++j) f.at(j, i) += g.at(i, j);
            break;
        }
        case Op::kScale: {
            if (!wants(0)) break;
            Tensor& f = ensure(0);
            for (int64_t i = 0; i < g.numel(); ++i) f[i] += g[i] * n.alpha;
            break;
        }
        case Op::kAddScalar: {
            if (!wants(0)) break;
            add_into(flow_of(0), g);
            break;
        }
    }
}

} // namespace bigat::ad
