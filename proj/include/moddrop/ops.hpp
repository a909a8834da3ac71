#pragma once

#include <cstddef>
#include <vector>

#include "moddrop/tensor.hpp"

namespace moddrop {

// Cross-correlation (no kernel flip), zero padding.
// input [N,Cin,H,W], weight [Cout,Cin,p,q], bias [Cout] -> [N,Cout,H',W'].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride = 1,
              std::size_t padding = 0);

enum class UnaryKind { relu, sigmoid, square, log, neg };
enum class BinaryKind { add, sub, mul, div };

Tensor elementwise(const Tensor& x, UnaryKind kind);
Tensor elementwise(const Tensor& a, const Tensor& b, BinaryKind kind);

inline Tensor relu(const Tensor& x) { return elementwise(x, UnaryKind::relu); }
inline Tensor sigmoid(const Tensor& x) { return elementwise(x, UnaryKind::sigmoid); }
inline Tensor square(const Tensor& x) { return elementwise(x, UnaryKind::square); }
inline Tensor log(const Tensor& x) { return elementwise(x, UnaryKind::log); }
inline Tensor neg(const Tensor& x) { return elementwise(x, UnaryKind::neg); }
inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryKind::add); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryKind::sub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryKind::mul); }
inline Tensor div(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryKind::div); }

// The only broadcast: multiply every element by a constant.
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);

Tensor concat_channels(const std::vector<Tensor>& parts);

enum class ReduceKind { sum, mean };
Tensor reduce(const Tensor& x, ReduceKind kind);
inline Tensor sum(const Tensor& x) { return reduce(x, ReduceKind::sum); }
inline Tensor mean(const Tensor& x) { return reduce(x, ReduceKind::mean); }

// Same data in a new shape with equal element count.
Tensor reshape(const Tensor& x, Shape shape);
// Contiguous flat range [offset, offset + numel(shape)) viewed as `shape`.
Tensor slice_flat(const Tensor& x, std::size_t offset, Shape shape);

// weight [n,k] * x [k] + bias [n] -> [n].
Tensor linear(const Tensor& weight, const Tensor& x, const Tensor& bias);

// weight [v,u,p,q], scales [u,v] -> out[o,i,:,:] = scales[i,o] * weight[o,i,:,:].
Tensor scale_kernels(const Tensor& weight, const Tensor& scales);

// Normalized (sums to 1) separable Gaussian taps of odd length `window`.
std::vector<double> gaussian_kernel_1d(int window, double sigma);

// Per-channel filtering with the normalized 2D Gaussian window, reflection
// padding (mirror without repeating the edge sample). Output keeps H,W.
Tensor gaussian_window_filter(const Tensor& input, int window, double sigma);

namespace detail {
// Raw separable filtering on `planes` contiguous h*w planes; used by fused ops.
void gaussian_filter_forward(const double* src, double* dst, std::size_t planes, std::size_t h, std::size_t w,
                             const std::vector<double>& taps);
void gaussian_filter_adjoint_add(const double* grad_out, double* grad_in, std::size_t planes, std::size_t h,
                                 std::size_t w, const std::vector<double>& taps);
}  // namespace detail

// Mirror index into [0, n) without edge repetition; valid for -n < i < 2n-1.
inline std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
    if (n == 1) {
        return 0;
    }
    if (i < 0) {
        return -i;
    }
    if (i >= n) {
        return 2 * (n - 1) - i;
    }
    return i;
}

}  // namespace moddrop
