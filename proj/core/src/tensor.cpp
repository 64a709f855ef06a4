#include "wzjscc/tensor.hpp"

#include <unordered_set>

#include <fmt/core.h>

#include "wzjscc/errors.hpp"

namespace wzjscc::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string Shape::str() const { return fmt::format("({}, {}, {}, {})", n, c, h, w); }

std::vector<double>& detail::Node::ensure_grad() {
    if (grad.size() != value.size()) {
        grad.assign(value.size(), 0.0);
    }
    return grad;
}

Tensor Tensor::zeros(Shape shape) { return filled(shape, 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
    return constant(shape, std::vector<double>(shape.numel(), value));
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    if (values.size() != shape.numel()) {
        throw InvalidArgument(
            fmt::format("Tensor: {} values do not fill shape {}", values.size(), shape.str()));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = shape;
    node->value = std::move(values);
    return Tensor(std::move(node));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    Tensor t = constant(shape, std::move(values));
    t.node_->requires_grad = true;
    return t;
}

detail::Node& Tensor::node() const {
    if (!node_) {
        throw InvalidArgument("Tensor: use of an undefined tensor");
    }
    return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }
bool Tensor::requires_grad() const { return node().requires_grad; }
std::span<const double> Tensor::data() const { return node().value; }
std::span<double> Tensor::mutable_data() { return node().value; }
std::span<const double> Tensor::grad() const { return node().grad; }
std::span<double> Tensor::mutable_grad() { return node().ensure_grad(); }

void Tensor::zero_grad() {
    auto& n = node();
    std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

double Tensor::item() const {
    if (numel() != 1) {
        throw InvalidArgument(fmt::format("Tensor::item on shape {}", shape().str()));
    }
    return node().value[0];
}

Tensor Tensor::detach() const { return constant(shape(), node().value); }

Tensor Tensor::make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                           std::function<void(detail::Node&)> backward_fn) {
    auto node = std::make_shared<detail::Node>();
    node->shape = shape;
    node->value = std::move(value);
    if (g_grad_enabled) {
        bool any = false;
        for (const auto& in : inputs) {
            any = any || in.node().requires_grad;
        }
        if (any) {
            node->requires_grad = true;
            node->inputs.reserve(inputs.size());
            for (auto& in : inputs) {
                node->inputs.push_back(in.node_);
            }
            node->backward_fn = std::move(backward_fn);
        }
    }
    return Tensor(std::move(node));
}

void Tensor::backward() const {
    auto& root = node();
    if (root.value.size() != 1) {
        throw InvalidArgument(fmt::format("backward() needs a scalar root, got shape {}", root.shape.str()));
    }
    if (!root.requires_grad) {
        throw InvalidArgument("backward() on a tensor that does not require grad");
    }

    // Iterative post-order DFS; reversed it is a topological order.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{&root, 0}};
    visited.insert(&root);
    while (!stack.empty()) {
        auto& [current, next] = stack.back();
        if (next < current->inputs.size()) {
            detail::Node* child = current->inputs[next++].get();
            if (child->requires_grad && !visited.contains(child)) {
                visited.insert(child);
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(current);
            stack.pop_back();
        }
    }

    root.ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backward_fn && !n->grad.empty()) {
            n->backward_fn(*n);
        }
    }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() noexcept { return g_grad_enabled; }

} // namespace wzjscc::nn
