#include "moddrop/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "moddrop/error.hpp"

namespace moddrop {

namespace detail {

struct Node {
    std::uint64_t id;
    const char* kind;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    BackwardFn backward;
};

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    std::shared_ptr<Node> grad_fn;
};

}  // namespace detail

struct TensorAccess {
    static const std::shared_ptr<detail::TensorImpl>& impl(const Tensor& t) { return t.impl_; }
    static Tensor wrap(std::shared_ptr<detail::TensorImpl> impl) { return Tensor(std::move(impl)); }
};

namespace {

// Node ids only need to increase along every input->output edge; a global
// counter gives that even when independent contexts run on other threads.
std::atomic<std::uint64_t> g_next_node_id{1};
thread_local bool t_grad_enabled = true;

detail::TensorImpl& checked(const std::shared_ptr<detail::TensorImpl>& impl) {
    if (!impl) {
        throw Error("use of an undefined tensor");
    }
    return *impl;
}

void check_finite([[maybe_unused]] const char* kind, [[maybe_unused]] const std::vector<double>& data) {
#ifndef NDEBUG
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw NumericsError(std::string("non-finite value produced by ") + kind);
        }
    }
#endif
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "," : "") << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor() = default;

Tensor::Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    for (std::size_t d : shape) {
        if (d == 0) {
            throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
        }
    }
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(data.size()));
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return checked(impl_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
    }
    return s[axis];
}

std::size_t Tensor::numel() const { return checked(impl_).data.size(); }

std::span<const double> Tensor::data() const { return checked(impl_).data; }

std::span<double> Tensor::mutable_data() { return checked(impl_).data; }

double Tensor::item() const {
    const auto& impl = checked(impl_);
    if (impl.data.size() != 1) {
        throw ShapeError("item() needs a single-element tensor, got " + shape_str(impl.shape));
    }
    return impl.data[0];
}

bool Tensor::requires_grad() const { return checked(impl_).requires_grad; }

void Tensor::set_requires_grad(bool value) { checked(impl_).requires_grad = value; }

bool Tensor::has_grad() const { return !checked(impl_).grad.empty(); }

std::span<const double> Tensor::grad() const { return checked(impl_).grad; }

void Tensor::zero_grad() {
    auto& g = checked(impl_).grad;
    std::fill(g.begin(), g.end(), 0.0);
}

bool Tensor::has_graph() const { return checked(impl_).grad_fn != nullptr; }

std::uint64_t Tensor::node_id() const {
    const auto& fn = checked(impl_).grad_fn;
    return fn ? fn->id : 0;
}

Tensor Tensor::detach() const {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = shape();
    impl->data = checked(impl_).data;
    return Tensor(std::move(impl));
}

Tensor Tensor::clone() const {
    Tensor copy = detach();
    copy.set_requires_grad(requires_grad());
    return copy;
}

void Tensor::backward() const {
    const auto& root = checked(impl_);
    if (root.data.size() != 1) {
        throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(root.shape));
    }
    if (!root.requires_grad) {
        throw Error("backward() on a tensor that does not require grad");
    }

    // Collect every recorded tensor reachable from the root.
    std::vector<detail::TensorImpl*> order;
    std::unordered_set<detail::TensorImpl*> seen;
    std::vector<detail::TensorImpl*> stack{impl_.get()};
    while (!stack.empty()) {
        detail::TensorImpl* t = stack.back();
        stack.pop_back();
        if (!seen.insert(t).second) {
            continue;
        }
        if (t->grad_fn) {
            order.push_back(t);
            for (const auto& in : t->grad_fn->inputs) {
                if (in->requires_grad) {
                    stack.push_back(in.get());
                }
            }
        }
    }
    // Inputs always carry smaller ids than their consumers, so descending id
    // order is a valid reverse topological order.
    std::sort(order.begin(), order.end(),
              [](const detail::TensorImpl* a, const detail::TensorImpl* b) { return a->grad_fn->id > b->grad_fn->id; });

    auto& root_mut = *impl_;
    if (root_mut.grad.empty()) {
        root_mut.grad.assign(1, 0.0);
    }
    root_mut.grad[0] += 1.0;

    for (detail::TensorImpl* t : order) {
        if (t->grad.empty()) {
            continue;
        }
        t->grad_fn->backward(t->grad);
        // Intermediate gradients are consumed; releasing them keeps a second
        // backward over a shared subgraph from double counting.
        std::vector<double>().swap(t->grad);
    }
}

Tensor record_op(const char* kind, Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                 BackwardFn fn) {
    check_finite(kind, data);
    Tensor out = Tensor::from(std::move(shape), std::move(data));
    if (!t_grad_enabled) {
        return out;
    }
    bool any = false;
    for (const Tensor& in : inputs) {
        any = any || in.requires_grad();
    }
    if (!any) {
        return out;
    }
    auto node = std::make_shared<detail::Node>();
    node->id = g_next_node_id.fetch_add(1, std::memory_order_relaxed);
    node->kind = kind;
    node->backward = std::move(fn);
    for (const Tensor& in : inputs) {
        node->inputs.push_back(TensorAccess::impl(in));
    }
    const auto& impl = TensorAccess::impl(out);
    impl->requires_grad = true;
    impl->grad_fn = std::move(node);
    return out;
}

Tensor record_op(const char* kind, Shape shape, std::vector<double> data, std::initializer_list<Tensor> inputs,
                 BackwardFn fn) {
    return record_op(kind, std::move(shape), std::move(data), std::vector<Tensor>(inputs), std::move(fn));
}

std::span<double> grad_sink(const Tensor& t) {
    const auto& impl = TensorAccess::impl(t);
    if (!impl || !impl->requires_grad) {
        return {};
    }
    if (impl->grad.empty()) {
        impl->grad.assign(impl->data.size(), 0.0);
    }
    return impl->grad;
}

bool grad_mode_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

}  // namespace moddrop
