#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "mustang/errors.hpp"

namespace mustang {

// Maps each row of an edge-indexed array to the node (segment) that
// aggregates it. Segment ids must all be < num_segments.
struct SegmentIndex {
    std::vector<int> segment_of;
    int num_segments = 0;

    void validate(std::size_t expected_rows) const;
};

enum class Activation { LeakyRelu, Relu, Tanh, Elu, Sigmoid };

namespace detail {

struct Node {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first backward / zero_grad
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward_fn;  // null for leaves
    const char* op = "leaf";

    std::size_t numel() const { return data.size(); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

}  // namespace detail

// Dense row-major array of doubles participating in a define-by-run
// computation graph. Copies are shallow: they alias the same node.
class Value {
  public:
    Value() = default;

    static Value zeros(std::vector<int> shape);
    static Value full(std::vector<int> shape, double fill);
    static Value from_data(std::vector<int> shape, std::vector<double> data);
    static Value scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->data.size(); }
    int rows() const { return node_->shape.at(0); }
    int cols() const { return node_->shape.at(1); }

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    double item() const;

    // Gradient buffer; empty when no backward pass has reached this value.
    const std::vector<double>& grad() const { return node_->grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

    bool requires_grad() const { return node_->requires_grad; }
    Value& set_requires_grad(bool on) {
        node_->requires_grad = on;
        return *this;
    }

    // Reverse-mode pass from a scalar loss. Visits each op exactly once
    // in reverse topological order; accumulates into leaf grad buffers.
    void backward() const;

    bool same_node(const Value& other) const { return node_ == other.node_; }

    std::shared_ptr<detail::Node> node() const { return node_; }
    explicit Value(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

  private:
    std::shared_ptr<detail::Node> node_;
};

// --- differentiable ops ------------------------------------------------

Value matmul(const Value& a, const Value& b);
Value add(const Value& a, const Value& b);           // same shape
Value sub(const Value& a, const Value& b);           // same shape
Value mul(const Value& a, const Value& b);           // elementwise
Value add_row_bias(const Value& x, const Value& b);  // [n,d] + [d]
Value scale(const Value& x, double c);
Value row_scale(const Value& x, const Value& s);  // [n,d] * s[n] per row
Value concat(const std::vector<Value>& parts, int axis);
Value activation(const Value& x, Activation kind, double slope = 0.2);
Value reduce_mean(const Value& x);  // [n,d] -> [d], axis 0
Value reduce_max(const Value& x);   // [n,d] -> [d], first max row wins
Value reduce_sum_all(const Value& x);
Value gather_rows(const Value& x, const std::vector<int>& rows);
Value reshape(const Value& x, std::vector<int> shape);
Value segment_softmax(const Value& scores, const SegmentIndex& seg);
Value segment_sum(const Value& values, const SegmentIndex& seg);
Value l2_norm(const Value& x);                      // scalar
Value div_by_scalar(const Value& a, const Value& s);  // s scalar Value

// Extension point for ops with precomputed data and a bespoke backward.
Value custom_op(std::vector<int> shape, std::vector<double> data,
                std::vector<Value> inputs,
                std::function<void(detail::Node&)> backward_fn, const char* name,
                std::uint64_t flops = 0);

inline Value relu(const Value& x) { return activation(x, Activation::Relu); }
inline Value leaky_relu(const Value& x, double slope = 0.2) {
    return activation(x, Activation::LeakyRelu, slope);
}
inline Value tanh_(const Value& x) { return activation(x, Activation::Tanh); }
inline Value sigmoid(const Value& x) { return activation(x, Activation::Sigmoid); }

// --- forward FLOP accounting -------------------------------------------
//
// When enabled, every op adds its floating-point work to a global tally
// (one multiply-add counts as 2). Single-threaded by contract.

void flop_counter_reset();
void flop_counter_enable(bool on);
std::uint64_t flop_counter_total();

}  // namespace mustang
