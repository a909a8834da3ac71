#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "moddrop/backbone.hpp"

namespace moddrop {

struct AdamConfig {
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One Adam step with bias correction; `step` is the 1-based step index.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> first_moment,
                 std::span<double> second_moment, std::uint64_t step, double lr, const AdamConfig& cfg);

// Adam over a fixed parameter list. Parameters with requires_grad=false are
// frozen: neither they nor their moments change.
class Adam {
public:
    Adam(std::vector<NamedTensor> params, AdamConfig cfg);

    void step(double lr);
    std::uint64_t steps() const { return steps_; }
    const AdamConfig& config() const { return cfg_; }

    // Moments as "adam.m.<param>" / "adam.v.<param>".
    std::vector<NamedTensor> state() const;
    void load_state(const std::vector<NamedTensor>& tensors, std::uint64_t steps);

private:
    std::vector<NamedTensor> params_;
    std::vector<Tensor> first_;
    std::vector<Tensor> second_;
    AdamConfig cfg_;
    std::uint64_t steps_ = 0;
};

}  // namespace moddrop
