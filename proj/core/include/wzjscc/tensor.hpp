#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace wzjscc::nn {

/// NCHW extent. Matrices and vectors use trailing unit dimensions:
/// a (batch, features) activation is (n, features, 1, 1).
struct Shape {
    int n = 1;
    int c = 1;
    int h = 1;
    int w = 1;

    std::size_t numel() const noexcept {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
               static_cast<std::size_t>(w);
    }
    /// Elements per batch item.
    std::size_t item_size() const noexcept { return numel() / static_cast<std::size_t>(n); }
    std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;
};

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward_fn;

    std::vector<double>& ensure_grad();
};

} // namespace detail

/// Reference-counted handle to a value in a reverse-mode autodiff graph.
/// Copies alias the same storage; parameters are leaves created with
/// Tensor::parameter and keep their identity across forward passes.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor filled(Shape shape, double value);
    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor parameter(Shape shape, std::vector<double> values);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t numel() const { return shape().numel(); }
    bool requires_grad() const;

    std::span<const double> data() const;
    /// Direct write access, intended for optimizers and loaders.
    std::span<double> mutable_data();
    /// Empty when no gradient has reached this tensor.
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    double item() const;
    /// Same values, no graph history.
    Tensor detach() const;

    /// Backpropagates from a single-element tensor.
    void backward() const;

    /// Stable identity of the underlying storage.
    const void* storage_id() const noexcept { return node_.get(); }

    /// Builds a graph node. Used by the op implementations.
    static Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                              std::function<void(detail::Node&)> backward_fn);
    detail::Node& node() const;

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

    std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled() noexcept;

} // namespace wzjscc::nn
