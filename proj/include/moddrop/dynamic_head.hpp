#pragma once

#include <cstddef>

#include "moddrop/modality_code.hpp"
#include "moddrop/tensor.hpp"

namespace moddrop {

// Affine map from a K-bit modality code to u*v kernel scales plus v bias
// scales. Equivalent to a 1x1 convolution over a K-channel 1x1 input.
// Row i*v + o of the output is the scale of kernel (o, i); rows u*v + o
// scale bias o.
struct DynamicHeadParams {
    Tensor weight;  // [u*v + v, K]
    Tensor bias;    // [u*v + v]
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;

    // weight = 0, bias = 1: every code yields unit scales.
    static DynamicHeadParams identity(std::size_t in_channels, std::size_t out_channels, std::size_t modalities);

    std::size_t modalities() const { return weight.dim(1); }
    std::size_t scale_count() const { return in_channels * out_channels + out_channels; }
    std::size_t learnable_count() const { return weight.numel() + bias.numel(); }
};

struct FilterScales {
    Tensor matrix;       // M [u, v]
    Tensor bias_scales;  // s [v]
};

// Raw affine scales, no activation. Throws InvalidCodeError for an all-zero
// or wrongly sized code.
FilterScales compute_scales(const DynamicHeadParams& head, const ModalityCode& code);

// First convolution layer whose kernels are rescaled per modality code:
// effective weight[o,i] = M[i,o] * base_weight[o,i], effective bias[o] = s[o] * base_bias[o].
struct DynamicConvLayer {
    Tensor base_weight;  // [v, u, p, q]
    Tensor base_bias;    // [v]
    DynamicHeadParams head;

    std::size_t in_channels() const { return base_weight.dim(1); }
    std::size_t out_channels() const { return base_weight.dim(0); }
    // "Same" zero padding for odd kernels.
    std::size_t padding() const { return base_weight.dim(2) / 2; }
};

Tensor dynamic_forward(const DynamicConvLayer& layer, const Tensor& x, const ModalityCode& code);

struct ScalingParamCount {
    std::size_t full = 0;    // generating every weight: u*v*p*q + v
    std::size_t scaled = 0;  // one scale per kernel and bias: u*v + v
};

ScalingParamCount scaling_param_count(std::size_t u, std::size_t v, std::size_t p, std::size_t q);

}  // namespace moddrop
