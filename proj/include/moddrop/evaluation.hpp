#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "moddrop/backbone.hpp"
#include "moddrop/data_synth.hpp"
#include "moddrop/losses.hpp"
#include "moddrop/metrics.hpp"

namespace moddrop {

struct EvalOptions {
    double threshold = 0.5;
    std::size_t min_overlap = 1;  // voxels a gt lesion needs predicted to count as detected
};

std::vector<const MultiModalSample*> select_samples(const Dataset& dataset, std::span<const std::size_t> indices);

// Probability map [1,1,H,W] for the sample with absent modalities zeroed.
Tensor predict(const SegmentationModel& model, const MultiModalSample& sample, const ModalityCode& code);
BinaryMask predict_mask(const SegmentationModel& model, const MultiModalSample& sample, const ModalityCode& code,
                        double threshold);

MetricsReport evaluate_code(const SegmentationModel& model, std::span<const MultiModalSample* const> samples,
                            const ModalityCode& code, const EvalOptions& options = {});

struct ConfigResult {
    ModalityCode code;
    MetricsReport report;
};

// One row per enumerate_configs(K) code, in that order.
std::vector<ConfigResult> evaluate_unified(const SegmentationModel& model,
                                           std::span<const MultiModalSample* const> samples,
                                           const EvalOptions& options = {});

// Each code is evaluated with the model trained for it. Throws ConfigError
// unless the models cover every code exactly once.
std::vector<ConfigResult> evaluate_independent(std::span<const std::pair<ModalityCode, SegmentationModel>> models,
                                               std::span<const MultiModalSample* const> samples,
                                               const EvalOptions& options = {});

// Mean subject DSC over the given codes; the validation score.
double mean_dsc(const SegmentationModel& model, std::span<const MultiModalSample* const> samples,
                std::span<const ModalityCode> codes, double threshold);

// Mean SSIM(F_d(x | 1), F_d(x~ | m)) over samples and every code except the
// full one. Each sample uses the dynamic range of its own full-modality features.
double held_out_feature_ssim(const SegmentationModel& model, std::span<const MultiModalSample* const> samples,
                             const LossConfig& loss);

}  // namespace moddrop
