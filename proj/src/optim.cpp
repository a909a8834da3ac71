#include "moddrop/optim.hpp"

#include <cmath>

#include "moddrop/error.hpp"

namespace moddrop {

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> first_moment,
                 std::span<double> second_moment, std::uint64_t step, double lr, const AdamConfig& cfg) {
    if (grads.size() != params.size() || first_moment.size() != params.size() ||
        second_moment.size() != params.size()) {
        throw ShapeError("adam_update: parameter, gradient and moment sizes differ");
    }
    if (step == 0) {
        throw ConfigError("adam_update: step index is 1-based");
    }
    const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        first_moment[i] = cfg.beta1 * first_moment[i] + (1.0 - cfg.beta1) * g;
        second_moment[i] = cfg.beta2 * second_moment[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = first_moment[i] / correction1;
        const double v_hat = second_moment[i] / correction2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

Adam::Adam(std::vector<NamedTensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
        first_.push_back(Tensor::zeros(p.tensor.shape()));
        second_.push_back(Tensor::zeros(p.tensor.shape()));
    }
}

void Adam::step(double lr) {
    ++steps_;
    std::vector<double> zeros;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i].tensor;
        if (!p.requires_grad()) {
            continue;
        }
        std::span<const double> g = p.grad();
        if (g.empty()) {
            zeros.assign(p.numel(), 0.0);
            g = zeros;
        }
        adam_update(p.mutable_data(), g, first_[i].mutable_data(), second_[i].mutable_data(), steps_, lr, cfg_);
    }
}

std::vector<NamedTensor> Adam::state() const {
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        out.push_back({"adam.m." + params_[i].name, first_[i]});
        out.push_back({"adam.v." + params_[i].name, second_[i]});
    }
    return out;
}

void Adam::load_state(const std::vector<NamedTensor>& tensors, std::uint64_t steps) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        for (const auto& t : tensors) {
            Tensor* dst = nullptr;
            if (t.name == "adam.m." + params_[i].name) dst = &first_[i];
            if (t.name == "adam.v." + params_[i].name) dst = &second_[i];
            if (!dst) continue;
            if (t.tensor.shape() != dst->shape()) {
                throw ShapeError("optimizer state " + t.name + " has shape " + shape_str(t.tensor.shape()));
            }
            std::copy(t.tensor.data().begin(), t.tensor.data().end(), dst->mutable_data().begin());
        }
    }
    steps_ = steps;
}

}  // namespace moddrop
