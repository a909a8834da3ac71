#include "moddrop/losses.hpp"

#include <algorithm>
#include <cmath>

#include "moddrop/error.hpp"
#include "moddrop/ops.hpp"

namespace moddrop {

void LossConfig::validate() const {
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) {
        throw ConfigError("objective weights alpha, beta, gamma must be non-negative");
    }
    if (ssim_window <= 0 || ssim_window % 2 == 0) {
        throw ConfigError("loss.ssim_window must be a positive odd size, got " + std::to_string(ssim_window));
    }
    if (!(ssim_sigma > 0.0)) {
        throw ConfigError("loss.ssim_sigma must be positive");
    }
    if (focal_alpha < 0.0 || focal_alpha > 1.0 || focal_gamma < 0.0) {
        throw ConfigError("focal alpha must lie in [0, 1] and focal gamma must be non-negative");
    }
    if (!(focal_clamp > 0.0 && focal_clamp < 0.5)) {
        throw ConfigError("focal clamp must lie in (0, 0.5)");
    }
    if (dynamic_range && !(*dynamic_range > 0.0)) {
        throw ConfigError("SSIM dynamic range must be positive");
    }
}

Tensor focal_loss(const Tensor& pred, const Tensor& target, const LossConfig& cfg) {
    if (pred.shape() != target.shape()) {
        throw ShapeError("focal loss prediction " + shape_str(pred.shape()) + " and target " +
                         shape_str(target.shape()) + " differ");
    }
    const auto p = pred.data();
    const auto t = target.data();
    const double lo = cfg.focal_clamp;
    const double hi = 1.0 - cfg.focal_clamp;
    const double gamma = cfg.focal_gamma;
    const double inv_n = 1.0 / static_cast<double>(p.size());
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool positive = t[i] > 0.5;
        const double pc = std::clamp(p[i], lo, hi);
        const double pt = positive ? pc : 1.0 - pc;
        const double w = positive ? cfg.focal_alpha : 1.0 - cfg.focal_alpha;
        const double modulator = gamma == 0.0 ? 1.0 : std::pow(1.0 - pt, gamma);
        total += -w * modulator * std::log(pt);
    }
    return record_op("focal_loss", {1}, {total * inv_n}, {pred, target},
                     [pred, target, cfg, lo, hi, gamma, inv_n](std::span<const double> go) {
                         auto gp = grad_sink(pred);
                         if (gp.empty()) {
                             return;
                         }
                         const auto p = pred.data();
                         const auto t = target.data();
                         const double scale_out = go[0] * inv_n;
                         for (std::size_t i = 0; i < p.size(); ++i) {
                             if (p[i] < lo || p[i] > hi) {
                                 continue;
                             }
                             const bool positive = t[i] > 0.5;
                             const double pt = positive ? p[i] : 1.0 - p[i];
                             const double w = positive ? cfg.focal_alpha : 1.0 - cfg.focal_alpha;
                             const double one_minus = 1.0 - pt;
                             // d/dpt of -(1-pt)^g log(pt)
                             double d = -std::pow(one_minus, gamma) / pt;
                             if (gamma != 0.0) {
                                 d += gamma * std::pow(one_minus, gamma - 1.0) * std::log(pt);
                             }
                             gp[i] += scale_out * w * (positive ? d : -d);
                         }
                     });
}

double dynamic_range_of(const Tensor& t) {
    const auto d = t.data();
    const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
    const double range = *hi - *lo;
    return range > 0.0 ? range : 1.0;
}

Tensor ssim(const Tensor& f, const Tensor& g, const LossConfig& cfg) {
    if (f.shape() != g.shape()) {
        throw ShapeError("SSIM operands differ in shape: " + shape_str(f.shape()) + " vs " + shape_str(g.shape()));
    }
    if (f.rank() != 4) {
        throw ShapeError("SSIM expects [N,C,H,W] maps, got " + shape_str(f.shape()));
    }
    const std::vector<double> taps = gaussian_kernel_1d(cfg.ssim_window, cfg.ssim_sigma);
    const std::size_t h = f.dim(2);
    const std::size_t w = f.dim(3);
    if (static_cast<std::size_t>(cfg.ssim_window) > h || static_cast<std::size_t>(cfg.ssim_window) > w) {
        throw ConfigError("SSIM window " + std::to_string(cfg.ssim_window) + " larger than map " +
                          shape_str(f.shape()));
    }
    const std::size_t planes = f.dim(0) * f.dim(1);
    const std::size_t n = f.numel();
    const double range = cfg.dynamic_range ? *cfg.dynamic_range : dynamic_range_of(f);
    const double c1 = (cfg.ssim_k1 * range) * (cfg.ssim_k1 * range);
    const double c2 = (cfg.ssim_k2 * range) * (cfg.ssim_k2 * range);

    const auto x = f.data();
    const auto y = g.data();
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    std::vector<double> mx(n), my(n), exx(n), eyy(n), exy(n);
    detail::gaussian_filter_forward(x.data(), mx.data(), planes, h, w, taps);
    detail::gaussian_filter_forward(y.data(), my.data(), planes, h, w, taps);
    detail::gaussian_filter_forward(xx.data(), exx.data(), planes, h, w, taps);
    detail::gaussian_filter_forward(yy.data(), eyy.data(), planes, h, w, taps);
    detail::gaussian_filter_forward(xy.data(), exy.data(), planes, h, w, taps);

    // Per-window partials of S with respect to the filtered statistics.
    std::vector<double> d_mx(n), d_my(n), d_exx(n), d_eyy(n), d_exy(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double mxx = mx[i] * mx[i];
        const double myy = my[i] * my[i];
        const double mxy = mx[i] * my[i];
        const double a = 2.0 * mxy + c1;
        const double b = 2.0 * (exy[i] - mxy) + c2;
        const double c = mxx + myy + c1;
        const double d = (exx[i] - mxx) + (eyy[i] - myy) + c2;
        const double s = (a * b) / (c * d);
        total += s;
        const double s_over_d = s / d;
        const double s_over_b = s / b;
        d_exx[i] = -s_over_d;
        d_eyy[i] = -s_over_d;
        d_exy[i] = 2.0 * s_over_b;
        d_mx[i] = s * (2.0 * my[i] / a - 2.0 * mx[i] / c) + ((2.0 * mx[i]) * s_over_d - (2.0 * my[i]) * s_over_b);
        d_my[i] = s * (2.0 * mx[i] / a - 2.0 * my[i] / c) + ((2.0 * my[i]) * s_over_d - (2.0 * mx[i]) * s_over_b);
    }
    const double inv_n = 1.0 / static_cast<double>(n);

    struct Saved {
        std::vector<double> d_mx, d_my, d_exx, d_eyy, d_exy;
    };
    auto saved = std::make_shared<Saved>(
        Saved{std::move(d_mx), std::move(d_my), std::move(d_exx), std::move(d_eyy), std::move(d_exy)});

    return record_op("ssim", {1}, {total * inv_n}, {f, g},
                     [f, g, saved, taps, planes, h, w, n, inv_n](std::span<const double> go) {
                         auto gf = grad_sink(f);
                         auto gg = grad_sink(g);
                         const double scale_out = go[0] * inv_n;
                         const auto x = f.data();
                         const auto y = g.data();
                         auto adjoint = [&](const std::vector<double>& partial) {
                             std::vector<double> weighted(n);
                             for (std::size_t i = 0; i < n; ++i) weighted[i] = partial[i] * scale_out;
                             std::vector<double> out(n, 0.0);
                             detail::gaussian_filter_adjoint_add(weighted.data(), out.data(), planes, h, w, taps);
                             return out;
                         };
                         const std::vector<double> a_exy = adjoint(saved->d_exy);
                         if (!gf.empty()) {
                             const std::vector<double> a_mx = adjoint(saved->d_mx);
                             const std::vector<double> a_exx = adjoint(saved->d_exx);
                             for (std::size_t i = 0; i < n; ++i) {
                                 gf[i] += a_mx[i] + ((2.0 * x[i]) * a_exx[i] + y[i] * a_exy[i]);
                             }
                         }
                         if (!gg.empty()) {
                             const std::vector<double> a_my = adjoint(saved->d_my);
                             const std::vector<double> a_eyy = adjoint(saved->d_eyy);
                             for (std::size_t i = 0; i < n; ++i) {
                                 gg[i] += a_my[i] + ((2.0 * y[i]) * a_eyy[i] + x[i] * a_exy[i]);
                             }
                         }
                     });
}

Tensor moddrop_objective(const Tensor& pred_missing, const Tensor& target, const LossConfig& cfg) {
    return focal_loss(pred_missing, target, cfg);
}

ObjectiveTerms combined_objective_terms(const Tensor& pred_full, const Tensor& pred_missing, const Tensor& target,
                                        const Tensor& f, const Tensor& f_i, const LossConfig& cfg) {
    cfg.validate();
    if (f.shape() != f_i.shape()) {
        throw ShapeError("feature maps differ in shape: " + shape_str(f.shape()) + " vs " + shape_str(f_i.shape()));
    }
    ObjectiveTerms terms;
    terms.focal_full = focal_loss(pred_full, target, cfg);
    terms.focal_missing = focal_loss(pred_missing, target, cfg);
    terms.ssim = ssim(f, f_i, cfg);
    const Tensor dissimilarity = add_scalar(neg(terms.ssim), 1.0);
    terms.total = add(add(scale(terms.focal_full, cfg.alpha), scale(terms.focal_missing, cfg.beta)),
                      scale(dissimilarity, cfg.gamma));
    return terms;
}

Tensor combined_objective(const Tensor& pred_full, const Tensor& pred_missing, const Tensor& target, const Tensor& f,
                          const Tensor& f_i, const LossConfig& cfg) {
    return combined_objective_terms(pred_full, pred_missing, target, f, f_i, cfg).total;
}

}  // namespace moddrop
