#include "ganad/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "ganad/tensor_ops.hpp"

namespace ganad {

namespace {
thread_local bool grad_enabled = true;
}

bool GradMode::enabled() { return grad_enabled; }
void GradMode::set_enabled(bool on) { grad_enabled = on; }

namespace {
thread_local BranchTrace* active_trace = nullptr;
}

BranchTrace::BranchTrace() : prev_(active_trace) { active_trace = this; }
BranchTrace::~BranchTrace() { active_trace = prev_; }
BranchTrace* BranchTrace::active() { return active_trace; }

template <typename T>
T Var<T>::item() const
{
    if (value().size() != 1)
        throw std::logic_error("item() on tensor of shape " + shape_str(shape()));
    return value()[0];
}

namespace {

template <typename T, typename F>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents, F&& backward)
{
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    if (GradMode::enabled() &&
        std::any_of(parents.begin(), parents.end(), [](const Var<T>& p) { return p.requires_grad(); })) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward = std::forward<F>(backward);
    }
    return Var<T>(std::move(n));
}

void require_same_shape(const Shape& a, const Shape& b, const char* op)
{
    if (a != b)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                                    shape_str(b));
}

template <typename T, typename F>
Tensor<T> map_values(const Tensor<T>& a, F f)
{
    Tensor<T> out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = f(a[i]);
    return out;
}

template <typename T, typename F>
Tensor<T> zip_values(const Tensor<T>& a, const Tensor<T>& b, F f)
{
    Tensor<T> out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = f(a[i], b[i]);
    return out;
}

std::size_t row_width(const Shape& s)
{
    if (s.empty())
        throw std::invalid_argument("row op on rank-0 tensor");
    return numel(s) / static_cast<std::size_t>(s[0]);
}

// Elements per channel slice for [N, C, ...] tensors.
std::size_t channel_inner(const Shape& s)
{
    if (s.size() < 2)
        throw std::invalid_argument("channel op needs rank >= 2, got " + shape_str(s));
    std::size_t inner = 1;
    for (std::size_t i = 2; i < s.size(); ++i)
        inner *= static_cast<std::size_t>(s[i]);
    return inner;
}

}  // namespace

template <typename T>
std::vector<Var<T>> grad(const Var<T>& output, const std::vector<Var<T>>& inputs, bool create_graph)
{
    if (!output.defined() || output.size() != 1)
        throw std::invalid_argument("grad: output must be a single-element tensor");

    std::optional<NoGradGuard> guard;
    if (!create_graph)
        guard.emplace();

    // Post-order DFS over the nodes that require grad.
    std::vector<Var<T>> order;
    if (output.requires_grad()) {
        std::unordered_set<Node<T>*> visited;
        std::vector<std::pair<Var<T>, std::size_t>> stack;
        stack.emplace_back(output, 0);
        visited.insert(output.node());
        while (!stack.empty()) {
            auto& [v, next] = stack.back();
            const auto& parents = v.node()->parents;
            if (next < parents.size()) {
                const Var<T>& p = parents[next++];
                if (p.requires_grad() && visited.insert(p.node()).second)
                    stack.emplace_back(p, 0);
            } else {
                order.push_back(v);
                stack.pop_back();
            }
        }
    }

    std::unordered_map<Node<T>*, Var<T>> grads;
    grads[output.node()] = Var<T>::constant(Tensor<T>(output.shape(), T(1)));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* node = it->node();
        auto found = grads.find(node);
        if (found == grads.end() || !node->backward)
            continue;
        const Var<T> g = found->second;
        std::vector<Var<T>> pgrads = node->backward(g, *it);
        for (std::size_t i = 0; i < node->parents.size(); ++i) {
            const Var<T>& p = node->parents[i];
            if (!p.requires_grad() || !pgrads[i].defined())
                continue;
            auto slot = grads.find(p.node());
            if (slot == grads.end())
                grads.emplace(p.node(), pgrads[i]);
            else
                slot->second = ag::add(slot->second, pgrads[i]);
        }
    }

    std::vector<Var<T>> result;
    result.reserve(inputs.size());
    for (const auto& in : inputs) {
        auto found = grads.find(in.node());
        if (found != grads.end())
            result.push_back(found->second);
        else
            result.push_back(Var<T>::constant(Tensor<T>(in.shape())));
    }
    return result;
}

namespace ag {

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b)
{
    require_same_shape(a.shape(), b.shape(), "add");
    return make_result<T>(zip_values(a.value(), b.value(), [](T x, T y) { return x + y; }), {a, b},
                          [](const Var<T>& g, const Var<T>&) { return std::vector<Var<T>>{g, g}; });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b)
{
    require_same_shape(a.shape(), b.shape(), "sub");
    return make_result<T>(zip_values(a.value(), b.value(), [](T x, T y) { return x - y; }), {a, b},
                          [](const Var<T>& g, const Var<T>&) {
                              return std::vector<Var<T>>{g, scale(g, T(-1))};
                          });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b)
{
    require_same_shape(a.shape(), b.shape(), "mul");
    return make_result<T>(zip_values(a.value(), b.value(), [](T x, T y) { return x * y; }), {a, b},
                          [a, b](const Var<T>& g, const Var<T>&) {
                              return std::vector<Var<T>>{mul(g, b), mul(g, a)};
                          });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s)
{
    return make_result<T>(map_values(a.value(), [s](T x) { return x * s; }), {a},
                          [s](const Var<T>& g, const Var<T>&) { return std::vector<Var<T>>{scale(g, s)}; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s)
{
    return make_result<T>(map_values(a.value(), [s](T x) { return x + s; }), {a},
                          [](const Var<T>& g, const Var<T>&) { return std::vector<Var<T>>{g}; });
}

template <typename T>
Var<T> mul_const(const Var<T>& a, const Tensor<T>& c)
{
    require_same_shape(a.shape(), c.shape, "mul_const");
    return make_result<T>(zip_values(a.value(), c, [](T x, T y) { return x * y; }), {a},
                          [c](const Var<T>& g, const Var<T>&) {
                              return std::vector<Var<T>>{mul_const(g, c)};
                          });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope)
{
    if (auto* trace = BranchTrace::active())
        for (T x : a.value().data)
            trace->record(x > T(0));
    Tensor<T> slopes = map_values(a.value(), [slope](T x) { return x > T(0) ? T(1) : slope; });
    Tensor<T> out = zip_values(a.value(), slopes, [](T x, T s) { return x * s; });
    return make_result<T>(std::move(out), {a}, [slopes = std::move(slopes)](const Var<T>& g, const Var<T>&) {
        return std::vector<Var<T>>{mul_const(g, slopes)};
    });
}

template <typename T>
Var<T> tanh(const Var<T>& a)
{
    return make_result<T>(map_values(a.value(), [](T x) { return std::tanh(x); }), {a},
                          [](const Var<T>& g, const Var<T>& self) {
                              return std::vector<Var<T>>{
                                  mul(g, add_scalar(scale(square(self), T(-1)), T(1)))};
                          });
}

template <typename T>
Var<T> abs(const Var<T>& a)
{
    Tensor<T> sign = map_values(a.value(), [](T x) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
    if (auto* trace = BranchTrace::active())
        for (T v : sign.data)
            trace->record(static_cast<std::int8_t>(v));
    return make_result<T>(map_values(a.value(), [](T x) { return std::abs(x); }), {a},
                          [sign = std::move(sign)](const Var<T>& g, const Var<T>&) {
                              return std::vector<Var<T>>{mul_const(g, sign)};
                          });
}

template <typename T>
Var<T> square(const Var<T>& a)
{
    return make_result<T>(map_values(a.value(), [](T x) { return x * x; }), {a},
                          [a](const Var<T>& g, const Var<T>&) {
                              return std::vector<Var<T>>{mul(g, scale(a, T(2)))};
                          });
}

template <typename T>
Var<T> sqrt(const Var<T>& a)
{
    return make_result<T>(map_values(a.value(), [](T x) { return std::sqrt(x); }), {a},
                          [](const Var<T>& g, const Var<T>& self) {
                              return std::vector<Var<T>>{mul(g, scale(reciprocal_safe(self), T(0.5)))};
                          });
}

template <typename T>
Var<T> reciprocal_safe(const Var<T>& a)
{
    return make_result<T>(map_values(a.value(), [](T x) { return x == T(0) ? T(0) : T(1) / x; }), {a},
                          [](const Var<T>& g, const Var<T>& self) {
                              return std::vector<Var<T>>{mul(g, scale(square(self), T(-1)))};
                          });
}

template <typename T>
Var<T> sum(const Var<T>& a)
{
    T total = T(0);
    for (T v : a.value().data)
        total += v;
    Shape shape = a.shape();
    return make_result<T>(Tensor<T>(Shape{1}, std::vector<T>{total}), {a},
                          [shape](const Var<T>& g, const Var<T>&) {
                              return std::vector<Var<T>>{broadcast_scalar(g, shape)};
                          });
}

template <typename T>
Var<T> mean(const Var<T>& a)
{
    return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

template <typename T>
Var<T> broadcast_scalar(const Var<T>& a, const Shape& shape)
{
    if (a.size() != 1)
        throw std::invalid_argument("broadcast_scalar: input is not a scalar");
    return make_result<T>(Tensor<T>(shape, a.value()[0]), {a},
                          [](const Var<T>& g, const Var<T>&) { return std::vector<Var<T>>{sum(g)}; });
}

template <typename T>
Var<T> sum_rows(const Var<T>& a)
{
    const std::size_t width = row_width(a.shape());
    const int rows = a.shape()[0];
    Tensor<T> out(Shape{rows});
    for (int r = 0; r < rows; ++r) {
        T acc = T(0);
        const T* p = a.value().data.data() + static_cast<std::size_t>(r) * width;
        for (std::size_t i = 0; i < width; ++i)
            acc += p[i];
        out[r] = acc;
    }
    Shape shape = a.shape();
    return make_result<T>(std::move(out), {a}, [shape](const Var<T>& g, const Var<T>&) {
        return std::vector<Var<T>>{broadcast_rows(g, shape)};
    });
}

template <typename T>
Var<T> broadcast_rows(const Var<T>& a, const Shape& shape)
{
    if (a.shape().size() != 1 || a.shape()[0] != shape.at(0))
        throw std::invalid_argument("broadcast_rows: expected [" + std::to_string(shape.at(0)) + "], got " +
                                    shape_str(a.shape()));
    const std::size_t width = row_width(shape);
    Tensor<T> out(shape);
    for (int r = 0; r < shape[0]; ++r)
        std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(r * width), width, a.value()[r]);
    return make_result<T>(std::move(out), {a},
                          [](const Var<T>& g, const Var<T>&) { return std::vector<Var<T>>{sum_rows(g)}; });
}

template <typename T>
Var<T> reshape(const Var<T>& a, const Shape& shape)
{
    if (numel(shape) != a.size())
        throw std::invalid_argument("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
    Shape from = a.shape();
    return make_result<T>(Tensor<T>(shape, a.value().data), {a}, [from](const Var<T>& g, const Var<T>&) {
        return std::vector<Var<T>>{reshape(g, from)};
    });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool ta, bool tb)
{
    return make_result<T>(kernels::matmul(a.value(), b.value(), ta, tb), {a, b},
                          [a, b, ta, tb](const Var<T>& g, const Var<T>&) {
                              Var<T> ga = ta ? matmul(b, g, tb, true) : matmul(g, b, false, !tb);
                              Var<T> gb = tb ? matmul(g, a, true, ta) : matmul(a, g, !ta, false);
                              return std::vector<Var<T>>{ga, gb};
                          });
}

template <typename T>
Var<T> add_bias(const Var<T>& a, const Var<T>& b)
{
    const Shape& s = a.shape();
    const std::size_t inner = channel_inner(s);
    if (b.shape().size() != 1 || b.shape()[0] != s[1])
        throw std::invalid_argument("add_bias: bias " + shape_str(b.shape()) + " for input " + shape_str(s));
    Tensor<T> out = a.value();
    const int n = s[0], c = s[1];
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            T* p = out.data.data() + (static_cast<std::size_t>(i) * c + ch) * inner;
            const T bias = b.value()[ch];
            for (std::size_t k = 0; k < inner; ++k)
                p[k] += bias;
        }
    return make_result<T>(std::move(out), {a, b}, [](const Var<T>& g, const Var<T>&) {
        return std::vector<Var<T>>{g, channel_sum(g)};
    });
}

template <typename T>
Var<T> channel_sum(const Var<T>& a)
{
    const Shape& s = a.shape();
    const std::size_t inner = channel_inner(s);
    const int n = s[0], c = s[1];
    Tensor<T> out(Shape{c});
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const T* p = a.value().data.data() + (static_cast<std::size_t>(i) * c + ch) * inner;
            T acc = T(0);
            for (std::size_t k = 0; k < inner; ++k)
                acc += p[k];
            out[ch] += acc;
        }
    Shape shape = s;
    return make_result<T>(std::move(out), {a}, [shape](const Var<T>& g, const Var<T>&) {
        return std::vector<Var<T>>{channel_broadcast(g, shape)};
    });
}

template <typename T>
Var<T> channel_broadcast(const Var<T>& a, const Shape& shape)
{
    const std::size_t inner = channel_inner(shape);
    if (a.shape().size() != 1 || a.shape()[0] != shape[1])
        throw std::invalid_argument("channel_broadcast: " + shape_str(a.shape()) + " -> " + shape_str(shape));
    Tensor<T> out(shape);
    const int n = shape[0], c = shape[1];
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(i) * c + ch) * inner),
                        inner, a.value()[ch]);
    return make_result<T>(std::move(out), {a}, [](const Var<T>& g, const Var<T>&) {
        return std::vector<Var<T>>{channel_sum(g)};
    });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w)
{
    const int k = w.shape().at(2);
    return make_result<T>(kernels::conv2d(x.value(), w.value()), {x, w}, [x, w, k](const Var<T>& g, const Var<T>&) {
        return std::vector<Var<T>>{conv2d_input_grad(g, w), conv2d_weight_grad(x, g, k)};
    });
}

template <typename T>
Var<T> conv2d_input_grad(const Var<T>& g, const Var<T>& w)
{
    const int k = w.shape().at(2);
    return make_result<T>(kernels::conv2d_input_grad(g.value(), w.value()), {g, w},
                          [g, w, k](const Var<T>& h, const Var<T>&) {
                              return std::vector<Var<T>>{conv2d(h, w), conv2d_weight_grad(h, g, k)};
                          });
}

template <typename T>
Var<T> conv2d_weight_grad(const Var<T>& x, const Var<T>& g, int kernel)
{
    return make_result<T>(kernels::conv2d_weight_grad(x.value(), g.value(), kernel), {x, g},
                          [x, g](const Var<T>& h, const Var<T>&) {
                              return std::vector<Var<T>>{conv2d_input_grad(g, h), conv2d(x, h)};
                          });
}

template <typename T>
Var<T> upsample2(const Var<T>& a)
{
    return make_result<T>(kernels::upsample2(a.value()), {a}, [](const Var<T>& g, const Var<T>&) {
        return std::vector<Var<T>>{scale(avgpool2(g), T(4))};
    });
}

template <typename T>
Var<T> avgpool2(const Var<T>& a)
{
    return make_result<T>(kernels::avgpool2(a.value()), {a}, [](const Var<T>& g, const Var<T>&) {
        return std::vector<Var<T>>{scale(upsample2(g), T(0.25))};
    });
}

template <typename T>
Var<T> lerp(const Var<T>& a, const Var<T>& b, T alpha)
{
    return add(scale(a, T(1) - alpha), scale(b, alpha));
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b)
{
    return add_bias(matmul(x, w, false, true), b);
}

}  // namespace ag

#define GANAD_INSTANTIATE_AUTOGRAD(T)                                                          \
    template class Var<T>;                                                                    \
    template std::vector<Var<T>> grad<T>(const Var<T>&, const std::vector<Var<T>>&, bool);    \
    namespace ag {                                                                            \
    template Var<T> add<T>(const Var<T>&, const Var<T>&);                                     \
    template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                     \
    template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                     \
    template Var<T> scale<T>(const Var<T>&, T);                                               \
    template Var<T> add_scalar<T>(const Var<T>&, T);                                          \
    template Var<T> mul_const<T>(const Var<T>&, const Tensor<T>&);                            \
    template Var<T> leaky_relu<T>(const Var<T>&, T);                                          \
    template Var<T> tanh<T>(const Var<T>&);                                                   \
    template Var<T> abs<T>(const Var<T>&);                                                    \
    template Var<T> square<T>(const Var<T>&);                                                 \
    template Var<T> sqrt<T>(const Var<T>&);                                                   \
    template Var<T> reciprocal_safe<T>(const Var<T>&);                                        \
    template Var<T> sum<T>(const Var<T>&);                                                    \
    template Var<T> mean<T>(const Var<T>&);                                                   \
    template Var<T> broadcast_scalar<T>(const Var<T>&, const Shape&);                         \
    template Var<T> sum_rows<T>(const Var<T>&);                                               \
    template Var<T> broadcast_rows<T>(const Var<T>&, const Shape&);                           \
    template Var<T> reshape<T>(const Var<T>&, const Shape&);                                  \
    template Var<T> matmul<T>(const Var<T>&, const Var<T>&, bool, bool);                      \
    template Var<T> add_bias<T>(const Var<T>&, const Var<T>&);                                \
    template Var<T> channel_sum<T>(const Var<T>&);                                            \
    template Var<T> channel_broadcast<T>(const Var<T>&, const Shape&);                        \
    template Var<T> conv2d<T>(const Var<T>&, const Var<T>&);                                  \
    template Var<T> conv2d_input_grad<T>(const Var<T>&, const Var<T>&);                       \
    template Var<T> conv2d_weight_grad<T>(const Var<T>&, const Var<T>&, int);                 \
    template Var<T> upsample2<T>(const Var<T>&);                                              \
    template Var<T> avgpool2<T>(const Var<T>&);                                               \
    template Var<T> lerp<T>(const Var<T>&, const Var<T>&, T);                                 \
    template Var<T> linear<T>(const Var<T>&, const Var<T>&, const Var<T>&);                   \
    }

GANAD_INSTANTIATE_AUTOGRAD(float)
GANAD_INSTANTIATE_AUTOGRAD(double)

}  // namespace ganad
