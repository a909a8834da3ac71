#include "moddrop/dynamic_head.hpp"

#include "moddrop/error.hpp"
#include "moddrop/ops.hpp"

namespace moddrop {

DynamicHeadParams DynamicHeadParams::identity(std::size_t in_channels, std::size_t out_channels,
                                              std::size_t modalities) {
    if (in_channels == 0 || out_channels == 0 || modalities == 0) {
        throw ConfigError("dynamic head needs positive channel and modality counts");
    }
    const std::size_t n = in_channels * out_channels + out_channels;
    DynamicHeadParams head;
    head.weight = Tensor::zeros({n, modalities}, true);
    head.bias = Tensor::full({n}, 1.0, true);
    head.in_channels = in_channels;
    head.out_channels = out_channels;
    return head;
}

FilterScales compute_scales(const DynamicHeadParams& head, const ModalityCode& code) {
    require_valid_code(code, head.modalities());
    const std::size_t u = head.in_channels;
    const std::size_t v = head.out_channels;
    const Tensor m = Tensor::from({code.size()}, code.as_vector());
    const Tensor all = linear(head.weight, m, head.bias);
    return {slice_flat(all, 0, {u, v}), slice_flat(all, u * v, {v})};
}

Tensor dynamic_forward(const DynamicConvLayer& layer, const Tensor& x, const ModalityCode& code) {
    if (x.rank() != 4 || x.dim(1) != layer.in_channels()) {
        throw ShapeError("dynamic layer expects [N," + std::to_string(layer.in_channels()) + ",H,W] input, got " +
                         shape_str(x.shape()));
    }
    const FilterScales scales = compute_scales(layer.head, code);
    const Tensor weight = scale_kernels(layer.base_weight, scales.matrix);
    const Tensor bias = mul(layer.base_bias, scales.bias_scales);
    return conv2d(x, weight, bias, 1, layer.padding());
}

ScalingParamCount scaling_param_count(std::size_t u, std::size_t v, std::size_t p, std::size_t q) {
    return {u * v * p * q + v, u * v + v};
}

}  // namespace moddrop
