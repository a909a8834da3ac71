#pragma once

#include <optional>

#include "moddrop/tensor.hpp"

namespace moddrop {

struct LossConfig {
    // Focal loss: alpha weighs positives (1 - alpha negatives), gamma focuses.
    double focal_alpha = 0.25;
    double focal_gamma = 2.0;
    double focal_clamp = 1e-7;

    int ssim_window = 11;
    double ssim_sigma = 1.5;
    // c1 = (k1 L)^2, c2 = (k2 L)^2 with dynamic range L.
    double ssim_k1 = 0.01;
    double ssim_k2 = 0.03;
    // When unset, L = max - min of the detached first SSIM argument.
    std::optional<double> dynamic_range;

    // Objective weights: alpha * L_t(full) + beta * L_t(missing) + gamma * (1 - SSIM).
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 0.05;

    void validate() const;
};

// Mean over voxels of -w * (1 - p_t)^gamma * log(p_t), w = alpha for
// positives and 1 - alpha for negatives; predictions clamped to
// [clamp, 1 - clamp] (zero gradient outside).
Tensor focal_loss(const Tensor& pred, const Tensor& target, const LossConfig& cfg);

// max - min of t, or 1 when t is constant.
double dynamic_range_of(const Tensor& t);

// Mean SSIM over all channels and pixel-centred windows, Gaussian-weighted
// local statistics with reflection padding. Differentiable in both arguments.
Tensor ssim(const Tensor& f, const Tensor& g, const LossConfig& cfg);

// Plain ModDrop objective: the task loss on the dropped-modality prediction.
Tensor moddrop_objective(const Tensor& pred_missing, const Tensor& target, const LossConfig& cfg);

struct ObjectiveTerms {
    Tensor total;
    Tensor focal_full;
    Tensor focal_missing;
    Tensor ssim;
};

// alpha * focal(full) + beta * focal(missing) + gamma * (1 - SSIM(f, f_i)).
ObjectiveTerms combined_objective_terms(const Tensor& pred_full, const Tensor& pred_missing, const Tensor& target,
                                        const Tensor& f, const Tensor& f_i, const LossConfig& cfg);
Tensor combined_objective(const Tensor& pred_full, const Tensor& pred_missing, const Tensor& target, const Tensor& f,
                          const Tensor& f_i, const LossConfig& cfg);

}  // namespace moddrop
