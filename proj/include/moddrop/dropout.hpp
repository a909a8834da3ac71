#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "moddrop/modality_code.hpp"
#include "moddrop/rng.hpp"
#include "moddrop/sample.hpp"
#include "moddrop/tensor.hpp"

namespace moddrop {

enum class DropoutMode {
    // Independent Bernoulli(keep_prob[k]) per modality, redrawn on all-zero.
    bernoulli_rejection,
    // Each of the 2^K - 1 configurations with probability 1 / (2^K - 1).
    uniform_over_configs,
};

struct DropoutPolicy {
    std::size_t modalities = 4;
    std::vector<double> keep_prob;  // empty means 0.5 for every modality
    DropoutMode mode = DropoutMode::uniform_over_configs;

    void validate() const;
};

ModalityCode sample_config(const DropoutPolicy& policy, Rng& rng);

// Channel-concatenated network input [1, K*slices, H, W], modality-major.
// Channels of absent modalities are exactly zero; present ones are copied bitwise.
Tensor apply_dropout(const MultiModalSample& sample, const ModalityCode& code);
// Same for a batch of samples -> [N, K*slices, H, W].
Tensor apply_dropout(std::span<const MultiModalSample* const> batch, const ModalityCode& code);

// Zeroes the absent-modality channel groups of an already stacked input [N,K*S,H,W].
Tensor apply_dropout(const Tensor& stacked, const ModalityCode& code);

}  // namespace moddrop
