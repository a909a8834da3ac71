#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace moddrop {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl;
struct Node;
}  // namespace detail

// Dense row-major float64 tensor with optional reverse-mode autodiff.
//
// Tensor is a handle: copies share storage and gradient. This is what lets a
// parameter appear in several places of a graph and collect one gradient.
// Use clone() for an independent deep copy.
class Tensor {
public:
    Tensor();

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    const Shape& shape() const;
    std::size_t dim(std::size_t axis) const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;
    bool defined() const { return impl_ != nullptr; }

    std::span<const double> data() const;
    // Direct write access. Only meaningful on leaves (parameters, inputs);
    // writing into a tensor that a live graph saved corrupts its backward.
    std::span<double> mutable_data();
    double item() const;
    double at(std::size_t flat_index) const { return data()[flat_index]; }

    bool requires_grad() const;
    void set_requires_grad(bool value);
    bool has_grad() const;
    // Gradient buffer; empty span when no gradient has been accumulated yet.
    std::span<const double> grad() const;
    void zero_grad();

    // True when produced by a recorded op (non-leaf).
    bool has_graph() const;
    std::uint64_t node_id() const;

    // Copy of the values without lineage; requires_grad=false.
    Tensor detach() const;
    Tensor clone() const;

    // Reverse sweep from this scalar. Gradients accumulate additively into every
    // requires_grad leaf reachable from here.
    void backward() const;

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl);
    std::shared_ptr<detail::TensorImpl> impl_;

    friend struct TensorAccess;
};

// Receives the gradient of the op output (same length as its data) and
// accumulates into the inputs through grad_sink().
using BackwardFn = std::function<void(std::span<const double> grad_out)>;

// Records a new op result. When no input requires grad, or grad mode is off,
// no node is created and fn is dropped.
Tensor record_op(const char* kind, Shape shape, std::vector<double> data,
                 std::initializer_list<Tensor> inputs, BackwardFn fn);
Tensor record_op(const char* kind, Shape shape, std::vector<double> data,
                 const std::vector<Tensor>& inputs, BackwardFn fn);

// Gradient buffer of t, allocated as zeros on first use. Returns an empty
// span when t does not take gradients, so backward code can skip it.
std::span<double> grad_sink(const Tensor& t);

bool grad_mode_enabled();

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

}  // namespace moddrop
