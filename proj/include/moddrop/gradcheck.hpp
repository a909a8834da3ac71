#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "moddrop/tensor.hpp"

namespace moddrop {

struct GradCheckReport {
    // Max over elements of |analytic - numeric| / max(|analytic|, |numeric|, floor), per leaf.
    std::vector<double> max_rel_error;
    double tolerance = 0.0;

    double worst() const;
    bool passed() const { return worst() < tolerance; }
};

struct GradCheckOptions {
    double h = 1e-5;
    double tol = 1e-4;
    // Denominator floor so exact-zero gradients compare absolutely.
    double floor = 1e-6;
    // 0 checks every element; otherwise an evenly strided subset of this size.
    std::size_t max_elements_per_leaf = 0;
};

// Compares backward() of the scalar built by `f` against central finite
// differences, perturbing each leaf element in place. `f` must rebuild the
// graph from the current leaf values on every call.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves, GradCheckOptions options = {});

}  // namespace moddrop
