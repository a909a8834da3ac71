#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "moddrop/dynamic_head.hpp"
#include "moddrop/modality_code.hpp"
#include "moddrop/rng.hpp"
#include "moddrop/tensor.hpp"

namespace moddrop {

struct BackboneConfig {
    std::size_t modalities = 4;
    std::size_t slices_per_modality = 3;
    std::size_t first_layer_out = 32;
    std::size_t dense_blocks = 3;
    std::size_t layers_per_block = 3;
    std::size_t growth_rate = 8;
    std::size_t kernel = 3;

    std::size_t in_channels() const { return modalities * slices_per_modality; }
    // Channels entering the final 1x1 convolution.
    std::size_t feature_channels() const { return first_layer_out + dense_blocks * layers_per_block * growth_rate; }
    void validate() const;

    friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

struct ConvParams {
    Tensor weight;
    Tensor bias;
};

struct ParameterCensus {
    std::size_t head = 0;          // dynamic head (theta_d)
    std::size_t dynamic_base = 0;  // base kernels and bias of F_d
    std::size_t static_part = 0;   // F_s (theta_s)
    std::size_t total() const { return head + dynamic_base + static_part; }
};

// Densely connected 2D segmentation net split into the dynamic first layer
// F_d and the static remainder F_s:
//   F_d: modality-scaled kxk conv, u -> v channels (raw output, no activation)
//   F_s: dense layers [relu -> kxk conv -> concat], then relu -> 1x1 conv -> sigmoid
// Spatial size is preserved throughout.
class SegmentationModel {
public:
    SegmentationModel(const BackboneConfig& config, Rng& rng);

    struct Output {
        Tensor features;    // f = F_d(x | m), [N, v, H, W]
        Tensor prediction;  // sigmoid probabilities, [N, 1, H, W]
    };

    Tensor forward_dynamic(const Tensor& x, const ModalityCode& code) const;
    Tensor forward_static(const Tensor& features) const;
    Output forward_split(const Tensor& x, const ModalityCode& code) const;

    // Every parameter with a stable name, head first.
    std::vector<NamedTensor> parameters() const;
    std::vector<Tensor> head_parameters() const { return {first_.head.weight, first_.head.bias}; }
    void set_head_trainable(bool trainable);
    void zero_grad();
    ParameterCensus parameter_census() const;

    const BackboneConfig& config() const { return config_; }
    const DynamicConvLayer& first_layer() const { return first_; }
    DynamicConvLayer& first_layer() { return first_; }

    // Deep copy with fresh storage (no shared parameters).
    SegmentationModel clone() const;

private:
    BackboneConfig config_;
    DynamicConvLayer first_;
    std::vector<ConvParams> dense_;
    ConvParams output_;
};

std::size_t count_elements(const std::vector<NamedTensor>& params);

}  // namespace moddrop
