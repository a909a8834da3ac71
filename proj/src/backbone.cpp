#include "moddrop/backbone.hpp"

#include <cmath>

#include "moddrop/error.hpp"
#include "moddrop/ops.hpp"

namespace moddrop {

namespace {

// Output bias starts at logit(0.05) so early predictions match the rarity
// of lesion voxels instead of sitting at 0.5.
constexpr double kLesionPrior = 0.05;

Tensor he_normal(Shape shape, Rng& rng) {
    const std::size_t fan_in = shape[1] * shape[2] * shape[3];
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = rng.normal(0.0, stddev);
    return Tensor::from(std::move(shape), std::move(data), true);
}

}  // namespace

void BackboneConfig::validate() const {
    if (modalities < 1 || modalities > 16) {
        throw ConfigError("model.modalities must be in [1, 16]");
    }
    if (slices_per_modality < 1 || first_layer_out < 1 || growth_rate < 1) {
        throw ConfigError("model slices, first-layer width and growth rate must be positive");
    }
    if (kernel % 2 == 0) {
        throw ConfigError("model.kernel must be odd to preserve spatial size");
    }
    if (dense_blocks > 0 && layers_per_block == 0) {
        throw ConfigError("dense blocks need at least one layer each");
    }
}

SegmentationModel::SegmentationModel(const BackboneConfig& config, Rng& rng) : config_(config) {
    config_.validate();
    const std::size_t u = config_.in_channels();
    const std::size_t v = config_.first_layer_out;
    const std::size_t k = config_.kernel;
    first_.base_weight = he_normal({v, u, k, k}, rng);
    first_.base_bias = Tensor::zeros({v}, true);
    first_.head = DynamicHeadParams::identity(u, v, config_.modalities);

    std::size_t channels = v;
    for (std::size_t b = 0; b < config_.dense_blocks; ++b) {
        for (std::size_t l = 0; l < config_.layers_per_block; ++l) {
            dense_.push_back({he_normal({config_.growth_rate, channels, k, k}, rng),
                              Tensor::zeros({config_.growth_rate}, true)});
            channels += config_.growth_rate;
        }
    }
    output_.weight = he_normal({1, channels, 1, 1}, rng);
    output_.bias = Tensor::full({1}, std::log(kLesionPrior / (1.0 - kLesionPrior)), true);
}

Tensor SegmentationModel::forward_dynamic(const Tensor& x, const ModalityCode& code) const {
    return dynamic_forward(first_, x, code);
}

Tensor SegmentationModel::forward_static(const Tensor& features) const {
    if (features.rank() != 4 || features.dim(1) != config_.first_layer_out) {
        throw ShapeError("static part expects [N," + std::to_string(config_.first_layer_out) + ",H,W] features, got " +
                         shape_str(features.shape()));
    }
    const std::size_t pad = config_.kernel / 2;
    Tensor h = features;
    for (const ConvParams& layer : dense_) {
        Tensor grown = conv2d(relu(h), layer.weight, layer.bias, 1, pad);
        h = concat_channels({h, grown});
    }
    return sigmoid(conv2d(relu(h), output_.weight, output_.bias, 1, 0));
}

SegmentationModel::Output SegmentationModel::forward_split(const Tensor& x, const ModalityCode& code) const {
    Tensor f = forward_dynamic(x, code);
    Tensor pred = forward_static(f);
    return {std::move(f), std::move(pred)};
}

std::vector<NamedTensor> SegmentationModel::parameters() const {
    std::vector<NamedTensor> out{
        {"fd.head.weight", first_.head.weight},
        {"fd.head.bias", first_.head.bias},
        {"fd.base.weight", first_.base_weight},
        {"fd.base.bias", first_.base_bias},
    };
    std::size_t index = 0;
    for (std::size_t b = 0; b < config_.dense_blocks; ++b) {
        for (std::size_t l = 0; l < config_.layers_per_block; ++l, ++index) {
            const std::string prefix = "fs.block" + std::to_string(b) + ".layer" + std::to_string(l);
            out.push_back({prefix + ".weight", dense_[index].weight});
            out.push_back({prefix + ".bias", dense_[index].bias});
        }
    }
    out.push_back({"fs.out.weight", output_.weight});
    out.push_back({"fs.out.bias", output_.bias});
    return out;
}

void SegmentationModel::set_head_trainable(bool trainable) {
    first_.head.weight.set_requires_grad(trainable);
    first_.head.bias.set_requires_grad(trainable);
}

void SegmentationModel::zero_grad() {
    for (auto& p : parameters()) p.tensor.zero_grad();
}

ParameterCensus SegmentationModel::parameter_census() const {
    ParameterCensus census;
    census.head = first_.head.learnable_count();
    census.dynamic_base = first_.base_weight.numel() + first_.base_bias.numel();
    for (const ConvParams& layer : dense_) census.static_part += layer.weight.numel() + layer.bias.numel();
    census.static_part += output_.weight.numel() + output_.bias.numel();
    return census;
}

SegmentationModel SegmentationModel::clone() const {
    SegmentationModel copy = *this;
    copy.first_.base_weight = first_.base_weight.clone();
    copy.first_.base_bias = first_.base_bias.clone();
    copy.first_.head.weight = first_.head.weight.clone();
    copy.first_.head.bias = first_.head.bias.clone();
    for (auto& layer : copy.dense_) {
        layer.weight = layer.weight.clone();
        layer.bias = layer.bias.clone();
    }
    copy.output_.weight = output_.weight.clone();
    copy.output_.bias = output_.bias.clone();
    return copy;
}

std::size_t count_elements(const std::vector<NamedTensor>& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.tensor.numel();
    return n;
}

}  // namespace moddrop
