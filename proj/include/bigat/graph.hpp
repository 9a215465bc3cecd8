#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "bigat/tensor.hpp"

namespace bigat::ad {

enum class Op : uint8_t {
    kLeaf,
    kMatmul,
    kAdd,
    kSub,
    kMul,
    kConcat,
    kSlice,
    kSum,      // axis < 0 means reduce-all to scalar
    kMax,
    kExp,
    kLog,
    kTanh,
    kSigmoid,
    kRelu,
    kLeakyRelu,
    kElu,
    kSoftplus,
    kSqrt,
    kSoftmax,
    kL2Norm,
    kL1Norm,
    kBroadcast,
    kReshape,
    kTranspose,
    kScale,
    kAddScalar,
};

const char* op_name(Op op);

class Graph;

// Lightweight handle into a Graph's tape.
class Value {
public:
    Value() = default;

    const Tensor& data() const;
    const Tensor& grad() const; // empty tensor when no gradient accumulated
    bool requires_grad() const;
    const Shape& shape() const;
    int64_t numel() const { return data().numel(); }
    double item() const { return data().item(); }

    int32_t id() const { return id_; }
    Graph& graph() const { return *g_; }
    bool valid() const { return g_ != nullptr; }

private:
    friend class Graph;
    Value(Graph* g, int32_t id) : g_(g), id_(id) {}

    Graph* g_ = nullptr;
    int32_t id_ = -1;
};

// Append-only computation tape. Node order is a topological order by
// construction; backward walks it once in reverse. One graph serves one
// forward/backward episode and is not shared across threads.
class Graph {
public:
    Value leaf(Tensor t, bool requires_grad);
    Value constant(Tensor t) { return leaf(std::move(t), false); }
    Value constant(double v) { return leaf(Tensor::scalar(v), false); }

    Value matmul(Value a, Value b, bool sorted_accumulate = false);
    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);
    Value concat(std::span<const Value> parts, int64_t axis);
    Value slice(Value v, std::vector<int64_t> begin, std::vector<int64_t> extent);
    Value sum(Value v);               // all elements -> scalar
    Value sum(Value v, int64_t axis); // removes the axis
    Value max(Value v, int64_t axis); // removes the axis
    Value exp(Value v);
    Value log(Value v);
    Value tanh(Value v);
    Value sigmoid(Value v);
    Value relu(Value v);
    Value leaky_relu(Value v, double slope);
    Value elu(Value v);
    Value softplus(Value v);
    Value sqrt(Value v);
    Value softmax(Value v, int64_t axis);
    Value l2_norm(Value v); // sqrt(sum of squares) -> scalar
    Value l1_norm(Value v); // sum of abs -> scalar
    Value broadcast(Value v, const Shape& target); // leading axes only
    Value reshape(Value v, Shape target);
    Value transpose(Value v); // rank-2
    Value scale(Value v, double c);
    Value add_scalar(Value v, double c);

    // Propagates from a scalar root; accumulates into node grads. Repeated
    // calls without clearing accumulate further.
    void backward(Value root);

    size_t size() const { return nodes_.size(); }

    const Tensor& node_data(int32_t id) const { return nodes_[static_cast<size_t>(id)].value; }
    const Tensor& node_grad(int32_t id) const { return nodes_[static_cast<size_t>(id)].grad; }
    bool node_requires_grad(int32_t id) const {
        return nodes_[static_cast<size_t>(id)].requires_grad;
    }

private:
    struct Node {
        Op op = Op::kLeaf;
        bool requires_grad = false;
        bool sorted_accum = false;
        int64_t axis = 0;
        double alpha = 0.0;
        std::vector<int32_t> inputs;
        std::vector<int64_t> begin;     // slice offsets
        std::vector<int32_t> arg_index; // max: flat input index per output element
        Tensor value;
        Tensor grad;
    };

    int32_t push(Node n);
    Value unary(Op op, Value v, double alpha = 0.0);
    void check_finite(const Node& n) const;
    void backprop_node(int32_t id, std::vector<Tensor>& flow);
    static void add_into(Tensor& acc, const Tensor& g);

    std::deque<Node> nodes_;
};

inline const Tensor& Value::data() const { return g_->node_data(id_); }
inline const Tensor& Value::grad() const { return g_->node_grad(id_); }
inline bool Value::requires_grad() const { return g_->node_requires_grad(id_); }
inline const Shape& Value::shape() const { return data().shape(); }

inline Value operator+(Value a, Value b) { return a.graph().add(a, b); }
inline Value operator-(Value a, Value b) { return a.graph().sub(a, b); }
inline Value operator*(Value a, Value b) { return a.graph().mul(a, b); }

} // namespace bigat::ad
