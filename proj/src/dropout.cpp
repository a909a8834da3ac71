#include "moddrop/dropout.hpp"

#include <algorithm>

#include "moddrop/error.hpp"

namespace moddrop {

void DropoutPolicy::validate() const {
    if (modalities < 1 || modalities > 16) {
        throw ConfigError("dropout policy needs 1..16 modalities, got " + std::to_string(modalities));
    }
    if (!keep_prob.empty() && keep_prob.size() != modalities) {
        throw ConfigError("dropout policy has " + std::to_string(keep_prob.size()) + " keep probabilities for " +
                          std::to_string(modalities) + " modalities");
    }
    for (double p : keep_prob) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ConfigError("keep probability " + std::to_string(p) + " outside [0, 1]");
        }
    }
    if (mode == DropoutMode::bernoulli_rejection && !keep_prob.empty() &&
        std::all_of(keep_prob.begin(), keep_prob.end(), [](double p) { return p == 0.0; })) {
        throw ConfigError("bernoulli dropout with every keep probability 0 can never draw a valid code");
    }
}

ModalityCode sample_config(const DropoutPolicy& policy, Rng& rng) {
    policy.validate();
    const std::size_t k = policy.modalities;
    if (policy.mode == DropoutMode::uniform_over_configs) {
        const std::uint64_t total = (std::uint64_t{1} << k) - 1;
        return ModalityCode::from_mask(static_cast<std::uint32_t>(rng.below(total) + 1), k);
    }
    std::vector<bool> bits(k);
    for (;;) {
        bool any = false;
        for (std::size_t i = 0; i < k; ++i) {
            const double p = policy.keep_prob.empty() ? 0.5 : policy.keep_prob[i];
            bits[i] = rng.bernoulli(p);
            any = any || bits[i];
        }
        if (any) {
            return ModalityCode(bits);
        }
    }
}

Tensor apply_dropout(std::span<const MultiModalSample* const> batch, const ModalityCode& code) {
    if (batch.empty()) {
        throw ShapeError("apply_dropout needs at least one sample");
    }
    const MultiModalSample& first = *batch.front();
    const std::size_t k = first.modality_count();
    if (code.size() != k) {
        throw ShapeError("modality code '" + code.str() + "' has " + std::to_string(code.size()) +
                         " bits but the sample has " + std::to_string(k) + " modalities");
    }
    const std::size_t s = first.slices();
    const std::size_t h = first.height();
    const std::size_t w = first.width();
    const std::size_t stack = s * h * w;
    std::vector<double> out(batch.size() * k * stack, 0.0);
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const MultiModalSample& sample = *batch[n];
        if (sample.modality_count() != k) {
            throw ShapeError("batch mixes samples with different modality counts");
        }
        for (std::size_t m = 0; m < k; ++m) {
            const Tensor& stack_t = sample.modalities[m];
            if (stack_t.shape() != Shape{s, h, w}) {
                throw ShapeError("modality stack " + shape_str(stack_t.shape()) + " does not match " +
                                 shape_str({s, h, w}));
            }
            if (!code[m]) {
                continue;
            }
            std::copy(stack_t.data().begin(), stack_t.data().end(), out.begin() + static_cast<std::ptrdiff_t>((n * k + m) * stack));
        }
    }
    return Tensor::from({batch.size(), k * s, h, w}, std::move(out));
}

Tensor apply_dropout(const MultiModalSample& sample, const ModalityCode& code) {
    const MultiModalSample* one[] = {&sample};
    return apply_dropout(std::span<const MultiModalSample* const>(one), code);
}

Tensor apply_dropout(const Tensor& stacked, const ModalityCode& code) {
    if (stacked.rank() != 4 || code.size() == 0 || stacked.dim(1) % code.size() != 0) {
        throw ShapeError("cannot split input " + shape_str(stacked.shape()) + " into " + std::to_string(code.size()) +
                         " modality groups");
    }
    const std::size_t n = stacked.dim(0);
    const std::size_t group = stacked.dim(1) / code.size() * stacked.dim(2) * stacked.dim(3);
    std::vector<double> out(stacked.data().begin(), stacked.data().end());
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t m = 0; m < code.size(); ++m) {
            if (!code[m]) {
                auto first = out.begin() + static_cast<std::ptrdiff_t>((b * code.size() + m) * group);
                std::fill(first, first + static_cast<std::ptrdiff_t>(group), 0.0);
            }
        }
    }
    return Tensor::from(stacked.shape(), std::move(out));
}

}  // namespace moddrop
