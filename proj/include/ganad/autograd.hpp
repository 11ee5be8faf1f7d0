#pragma once

// Reverse-mode automatic differentiation over dense tensors.
//
// Every backward rule is written in terms of the differentiable ops below, so
// gradients computed with create_graph=true are themselves part of a graph and
// can be differentiated again. The critic's gradient penalty relies on this.

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "ganad/tensor.hpp"

namespace ganad {

template <typename T>
class Var;

template <typename T>
struct Node {
    Tensor<T> value;
    bool requires_grad = false;
    std::vector<Var<T>> parents;
    // Receives the upstream gradient and the node's own output; returns one
    // gradient per parent (an undefined Var means "no contribution").
    std::function<std::vector<Var<T>>(const Var<T>& grad, const Var<T>& self)> backward;
};

template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    static Var leaf(Tensor<T> value, bool requires_grad = true)
    {
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(value);
        n->requires_grad = requires_grad;
        return Var(std::move(n));
    }
    static Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

    bool defined() const { return static_cast<bool>(node_); }
    const Tensor<T>& value() const { return node_->value; }
    // Only meaningful on leaves (optimizer updates, finite differences).
    Tensor<T>& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape; }
    std::size_t size() const { return node_->value.size(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    Node<T>* node() const { return node_.get(); }
    // Scalar read-out for single-element results.
    T item() const;

    Var detach() const { return constant(node_->value); }

private:
    std::shared_ptr<Node<T>> node_;
};

// Thread-local switch: while disabled, ops produce constants and record nothing.
class GradMode {
public:
    static bool enabled();
    static void set_enabled(bool on);
};

// While alive, records which branch every leaky_relu/abs element took on this
// thread. Two evaluations with equal traces lie on the same smooth piece.
class BranchTrace {
public:
    BranchTrace();
    ~BranchTrace();
    BranchTrace(const BranchTrace&) = delete;
    BranchTrace& operator=(const BranchTrace&) = delete;

    const std::vector<std::int8_t>& branches() const { return branches_; }
    static BranchTrace* active();
    void record(std::int8_t branch) { branches_.push_back(branch); }

private:
    BranchTrace* prev_;
    std::vector<std::int8_t> branches_;
};

class NoGradGuard {
public:
    NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
    ~NoGradGuard() { GradMode::set_enabled(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Gradients of a single-element output with respect to each input. Inputs the
// output does not depend on receive zeros. With create_graph the returned
// gradients are differentiable.
template <typename T>
std::vector<Var<T>> grad(const Var<T>& output, const std::vector<Var<T>>& inputs,
                         bool create_graph = false);

namespace ag {

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
template <typename T> Var<T> add_scalar(const Var<T>& a, T s);
// Multiply by a tensor treated as a constant.
template <typename T> Var<T> mul_const(const Var<T>& a, const Tensor<T>& c);

template <typename T> Var<T> leaky_relu(const Var<T>& a, T slope);
template <typename T> Var<T> tanh(const Var<T>& a);
template <typename T> Var<T> abs(const Var<T>& a);
template <typename T> Var<T> square(const Var<T>& a);
// Derivative at zero is taken as zero.
template <typename T> Var<T> sqrt(const Var<T>& a);
// 1/a with 1/0 := 0.
template <typename T> Var<T> reciprocal_safe(const Var<T>& a);

template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);
template <typename T> Var<T> broadcast_scalar(const Var<T>& a, const Shape& shape);
// [N, ...] -> [N]
template <typename T> Var<T> sum_rows(const Var<T>& a);
template <typename T> Var<T> broadcast_rows(const Var<T>& a, const Shape& shape);
template <typename T> Var<T> reshape(const Var<T>& a, const Shape& shape);

// op(a) * op(b) for rank-2 tensors, op = transpose when the flag is set.
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b, bool trans_a, bool trans_b);
// Adds b[c] along axis 1 of a rank>=2 tensor.
template <typename T> Var<T> add_bias(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> channel_sum(const Var<T>& a);
template <typename T> Var<T> channel_broadcast(const Var<T>& a, const Shape& shape);

// Stride-1 "same" convolution, x [N,Ci,H,W], w [Co,Ci,K,K], K odd.
template <typename T> Var<T> conv2d(const Var<T>& x, const Var<T>& w);
// Adjoint of conv2d in x: g [N,Co,H,W] -> [N,Ci,H,W].
template <typename T> Var<T> conv2d_input_grad(const Var<T>& g, const Var<T>& w);
// Adjoint of conv2d in w: sum over the batch of g (x) patches -> [Co,Ci,K,K].
template <typename T> Var<T> conv2d_weight_grad(const Var<T>& x, const Var<T>& g, int kernel);

// Nearest-neighbour 2x upsampling and 2x2 average pooling (mutual adjoints up to 4x).
template <typename T> Var<T> upsample2(const Var<T>& a);
template <typename T> Var<T> avgpool2(const Var<T>& a);

// (1 - alpha) * a + alpha * b
template <typename T> Var<T> lerp(const Var<T>& a, const Var<T>& b, T alpha);
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);

}  // namespace ag

}  // namespace ganad
