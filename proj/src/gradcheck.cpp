#include "moddrop/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "moddrop/error.hpp"

namespace moddrop {

double GradCheckReport::worst() const {
    double w = 0.0;
    for (double e : max_rel_error) w = std::max(w, e);
    return w;
}

GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves, GradCheckOptions options) {
    if (!(options.h > 0.0)) {
        throw ConfigError("grad_check step h must be positive");
    }
    for (Tensor& leaf : leaves) {
        leaf.set_requires_grad(true);
        leaf.zero_grad();
    }
    const Tensor loss = f();
    if (!std::isfinite(loss.item())) {
        throw NumericsError("grad_check: loss is not finite");
    }
    loss.backward();

    GradCheckReport report;
    report.tolerance = options.tol;
    for (Tensor& leaf : leaves) {
        const std::size_t n = leaf.numel();
        std::vector<double> analytic(n, 0.0);
        if (leaf.has_grad()) {
            std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());
        }
        const std::size_t stride =
            options.max_elements_per_leaf == 0 || n <= options.max_elements_per_leaf
                ? 1
                : (n + options.max_elements_per_leaf - 1) / options.max_elements_per_leaf;
        double worst = 0.0;
        for (std::size_t i = 0; i < n; i += stride) {
            auto data = leaf.mutable_data();
            const double original = data[i];
            double plus = 0.0;
            double minus = 0.0;
            {
                NoGradGuard guard;
                data[i] = original + options.h;
                plus = f().item();
                data[i] = original - options.h;
                minus = f().item();
                data[i] = original;
            }
            if (!std::isfinite(plus) || !std::isfinite(minus) || !std::isfinite(analytic[i])) {
                throw NumericsError("grad_check: non-finite value at element " + std::to_string(i));
            }
            const double numeric = (plus - minus) / (2.0 * options.h);
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.floor});
            worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
        }
        report.max_rel_error.push_back(worst);
    }
    return report;
}

}  // namespace moddrop
