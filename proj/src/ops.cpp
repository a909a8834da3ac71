#include "moddrop/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "moddrop/error.hpp"

namespace moddrop {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(what) + " must have rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
    }
}

struct ConvGeometry {
    std::size_t n, cin, h, w, cout, kh, kw, stride, pad, oh, ow;
    std::size_t patch() const { return cin * kh * kw; }
    std::size_t out_pixels() const { return oh * ow; }
    bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// cols [Cin*kh*kw, oh*ow] for one batch element.
void im2col(const double* img, const ConvGeometry& g, double* cols) {
    const auto H = static_cast<std::ptrdiff_t>(g.h);
    const auto W = static_cast<std::ptrdiff_t>(g.w);
    const auto pad = static_cast<std::ptrdiff_t>(g.pad);
    const auto stride = static_cast<std::ptrdiff_t>(g.stride);
    for (std::size_t c = 0; c < g.cin; ++c) {
        const double* plane = img + c * g.h * g.w;
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                double* row = cols + ((c * g.kh + ki) * g.kw + kj) * g.out_pixels();
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy) * stride - pad + static_cast<std::ptrdiff_t>(ki);
                    double* dst = row + oy * g.ow;
                    if (y < 0 || y >= H) {
                        std::fill(dst, dst + g.ow, 0.0);
                        continue;
                    }
                    const double* src = plane + y * W;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const std::ptrdiff_t x =
                            static_cast<std::ptrdiff_t>(ox) * stride - pad + static_cast<std::ptrdiff_t>(kj);
                        dst[ox] = (x >= 0 && x < W) ? src[x] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* img) {
    const auto H = static_cast<std::ptrdiff_t>(g.h);
    const auto W = static_cast<std::ptrdiff_t>(g.w);
    const auto pad = static_cast<std::ptrdiff_t>(g.pad);
    const auto stride = static_cast<std::ptrdiff_t>(g.stride);
    for (std::size_t c = 0; c < g.cin; ++c) {
        double* plane = img + c * g.h * g.w;
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                const double* row = cols + ((c * g.kh + ki) * g.kw + kj) * g.out_pixels();
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy) * stride - pad + static_cast<std::ptrdiff_t>(ki);
                    if (y < 0 || y >= H) {
                        continue;
                    }
                    const double* src = row + oy * g.ow;
                    double* dst = plane + y * W;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const std::ptrdiff_t x =
                            static_cast<std::ptrdiff_t>(ox) * stride - pad + static_cast<std::ptrdiff_t>(kj);
                        if (x >= 0 && x < W) {
                            dst[x] += src[ox];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t padding) {
    require_rank(input, 4, "conv2d input");
    require_rank(weight, 4, "conv2d weight");
    require_rank(bias, 1, "conv2d bias");
    if (stride == 0) {
        throw ShapeError("conv2d stride must be positive");
    }
    ConvGeometry g{};
    g.n = input.dim(0);
    g.cin = input.dim(1);
    g.h = input.dim(2);
    g.w = input.dim(3);
    g.cout = weight.dim(0);
    g.kh = weight.dim(2);
    g.kw = weight.dim(3);
    g.stride = stride;
    g.pad = padding;
    if (weight.dim(1) != g.cin) {
        throw ShapeError("conv2d input has " + std::to_string(g.cin) + " channels but weight " +
                         shape_str(weight.shape()) + " expects " + std::to_string(weight.dim(1)));
    }
    if (bias.dim(0) != g.cout) {
        throw ShapeError("conv2d bias " + shape_str(bias.shape()) + " does not match " + std::to_string(g.cout) +
                         " output channels");
    }
    if (g.kh > g.h + 2 * padding || g.kw > g.w + 2 * padding) {
        throw ShapeError("conv2d kernel " + shape_str(weight.shape()) + " larger than padded input " +
                         shape_str(input.shape()));
    }
    g.oh = (g.h + 2 * padding - g.kh) / stride + 1;
    g.ow = (g.w + 2 * padding - g.kw) / stride + 1;

    const std::size_t in_plane = g.cin * g.h * g.w;
    const std::size_t out_plane = g.cout * g.out_pixels();
    std::vector<double> out(g.n * out_plane);
    std::vector<double> cols(g.pointwise() ? 0 : g.patch() * g.out_pixels());

    const ConstMatMap wmat(weight.data().data(), static_cast<Eigen::Index>(g.cout), static_cast<Eigen::Index>(g.patch()));
    const Eigen::Map<const Eigen::VectorXd> bvec(bias.data().data(), static_cast<Eigen::Index>(g.cout));
    for (std::size_t n = 0; n < g.n; ++n) {
        const double* src = input.data().data() + n * in_plane;
        if (!g.pointwise()) {
            im2col(src, g, cols.data());
            src = cols.data();
        }
        const ConstMatMap cmat(src, static_cast<Eigen::Index>(g.patch()), static_cast<Eigen::Index>(g.out_pixels()));
        MatMap omat(out.data() + n * out_plane, static_cast<Eigen::Index>(g.cout), static_cast<Eigen::Index>(g.out_pixels()));
        omat.noalias() = wmat * cmat;
        omat.colwise() += bvec;
    }

    Shape out_shape{g.n, g.cout, g.oh, g.ow};
    return record_op("conv2d", std::move(out_shape), std::move(out), {input, weight, bias},
                     [input, weight, bias, g](std::span<const double> grad_out) {
                         auto gin = grad_sink(input);
                         auto gw = grad_sink(weight);
                         auto gb = grad_sink(bias);
                         const std::size_t in_plane = g.cin * g.h * g.w;
                         const std::size_t out_plane = g.cout * g.out_pixels();
                         const auto cout = static_cast<Eigen::Index>(g.cout);
                         const auto patch = static_cast<Eigen::Index>(g.patch());
                         const auto pixels = static_cast<Eigen::Index>(g.out_pixels());
                         const ConstMatMap wmat(weight.data().data(), cout, patch);
                         std::vector<double> cols(g.patch() * g.out_pixels());
                         for (std::size_t n = 0; n < g.n; ++n) {
                             const ConstMatMap gout(grad_out.data() + n * out_plane, cout, pixels);
                             if (!gb.empty()) {
                                 Eigen::Map<Eigen::VectorXd>(gb.data(), cout) += gout.rowwise().sum();
                             }
                             if (!gw.empty()) {
                                 const double* src = input.data().data() + n * in_plane;
                                 if (!g.pointwise()) {
                                     im2col(src, g, cols.data());
                                     src = cols.data();
                                 }
                                 const ConstMatMap cmat(src, patch, pixels);
                                 MatMap(gw.data(), cout, patch).noalias() += gout * cmat.transpose();
                             }
                             if (!gin.empty()) {
                                 if (g.pointwise()) {
                                     MatMap(gin.data() + n * in_plane, patch, pixels).noalias() += wmat.transpose() * gout;
                                 } else {
                                     MatMap(cols.data(), patch, pixels).noalias() = wmat.transpose() * gout;
                                     col2im_add(cols.data(), g, gin.data() + n * in_plane);
                                 }
                             }
                         }
                     });
}

Tensor elementwise(const Tensor& x, UnaryKind kind) {
    const auto in = x.data();
    std::vector<double> out(in.size());
    const char* name = "unary";
    switch (kind) {
        case UnaryKind::relu:
            name = "relu";
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
            break;
        case UnaryKind::sigmoid:
            name = "sigmoid";
            for (std::size_t i = 0; i < in.size(); ++i) {
                // Split by sign so exp never overflows.
                if (in[i] >= 0.0) {
                    out[i] = 1.0 / (1.0 + std::exp(-in[i]));
                } else {
                    const double e = std::exp(in[i]);
                    out[i] = e / (1.0 + e);
                }
            }
            break;
        case UnaryKind::square:
            name = "square";
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * in[i];
            break;
        case UnaryKind::log:
            name = "log";
            for (std::size_t i = 0; i < in.size(); ++i) {
                if (!(in[i] > 0.0)) {
                    throw DomainError("log of non-positive value " + std::to_string(in[i]) + " at index " +
                                      std::to_string(i));
                }
                out[i] = std::log(in[i]);
            }
            break;
        case UnaryKind::neg:
            name = "neg";
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = -in[i];
            break;
    }
    std::vector<double> saved_out;
    if (kind == UnaryKind::sigmoid) {
        saved_out = out;
    }
    return record_op(name, x.shape(), std::move(out), {x},
                     [x, kind, saved_out = std::move(saved_out)](std::span<const double> go) {
                         auto gx = grad_sink(x);
                         const auto in = x.data();
                         switch (kind) {
                             case UnaryKind::relu:
                                 for (std::size_t i = 0; i < go.size(); ++i) gx[i] += in[i] > 0.0 ? go[i] : 0.0;
                                 break;
                             case UnaryKind::sigmoid:
                                 for (std::size_t i = 0; i < go.size(); ++i)
                                     gx[i] += go[i] * saved_out[i] * (1.0 - saved_out[i]);
                                 break;
                             case UnaryKind::square:
                                 for (std::size_t i = 0; i < go.size(); ++i) gx[i] += 2.0 * in[i] * go[i];
                                 break;
                             case UnaryKind::log:
                                 for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] / in[i];
                                 break;
                             case UnaryKind::neg:
                                 for (std::size_t i = 0; i < go.size(); ++i) gx[i] -= go[i];
                                 break;
                         }
                     });
}

Tensor elementwise(const Tensor& a, const Tensor& b, BinaryKind kind) {
    if (a.shape() != b.shape()) {
        throw ShapeError("elementwise operands differ in shape: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    const auto x = a.data();
    const auto y = b.data();
    std::vector<double> out(x.size());
    const char* name = "binary";
    switch (kind) {
        case BinaryKind::add:
            name = "add";
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
            break;
        case BinaryKind::sub:
            name = "sub";
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
            break;
        case BinaryKind::mul:
            name = "mul";
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
            break;
        case BinaryKind::div:
            name = "div";
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (y[i] == 0.0) {
                    throw DomainError("division by zero at index " + std::to_string(i));
                }
                out[i] = x[i] / y[i];
            }
            break;
    }
    return record_op(name, a.shape(), std::move(out), {a, b}, [a, b, kind](std::span<const double> go) {
        auto ga = grad_sink(a);
        auto gb = grad_sink(b);
        const auto x = a.data();
        const auto y = b.data();
        switch (kind) {
            case BinaryKind::add:
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i];
                break;
            case BinaryKind::sub:
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= go[i];
                break;
            case BinaryKind::mul:
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * y[i];
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * x[i];
                break;
            case BinaryKind::div:
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] / y[i];
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= go[i] * x[i] / (y[i] * y[i]);
                break;
        }
    });
}

Tensor scale(const Tensor& x, double factor) {
    const auto in = x.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * factor;
    return record_op("scale", x.shape(), std::move(out), {x}, [x, factor](std::span<const double> go) {
        auto gx = grad_sink(x);
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * factor;
    });
}

Tensor add_scalar(const Tensor& x, double offset) {
    const auto in = x.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] + offset;
    return record_op("add_scalar", x.shape(), std::move(out), {x}, [x](std::span<const double> go) {
        auto gx = grad_sink(x);
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
    if (parts.empty()) {
        throw ShapeError("concat_channels needs at least one part");
    }
    for (const Tensor& p : parts) {
        require_rank(p, 4, "concat_channels part");
    }
    const std::size_t n = parts[0].dim(0);
    const std::size_t h = parts[0].dim(2);
    const std::size_t w = parts[0].dim(3);
    std::size_t channels = 0;
    for (const Tensor& p : parts) {
        if (p.dim(0) != n || p.dim(2) != h || p.dim(3) != w) {
            throw ShapeError("concat_channels parts disagree on N/H/W: " + shape_str(parts[0].shape()) + " vs " +
                             shape_str(p.shape()));
        }
        channels += p.dim(1);
    }
    const std::size_t plane = h * w;
    std::vector<double> out(n * channels * plane);
    for (std::size_t b = 0; b < n; ++b) {
        double* dst = out.data() + b * channels * plane;
        for (const Tensor& p : parts) {
            const std::size_t len = p.dim(1) * plane;
            const double* src = p.data().data() + b * len;
            std::copy(src, src + len, dst);
            dst += len;
        }
    }
    return record_op("concat_channels", {n, channels, h, w}, std::move(out), parts,
                     [parts, n, channels, plane](std::span<const double> go) {
                         std::size_t offset = 0;
                         for (const Tensor& p : parts) {
                             const std::size_t len = p.dim(1) * plane;
                             auto gp = grad_sink(p);
                             if (!gp.empty()) {
                                 for (std::size_t b = 0; b < n; ++b) {
                                     const double* src = go.data() + b * channels * plane + offset;
                                     double* dst = gp.data() + b * len;
                                     for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
                                 }
                             }
                             offset += len;
                         }
                     });
}

Tensor reduce(const Tensor& x, ReduceKind kind) {
    const auto in = x.data();
    if (in.empty()) {
        throw ShapeError("reduce over an empty tensor");
    }
    double acc = 0.0;
    for (double v : in) acc += v;
    const double factor = kind == ReduceKind::mean ? 1.0 / static_cast<double>(in.size()) : 1.0;
    return record_op(kind == ReduceKind::mean ? "mean" : "sum", {1}, {acc * factor}, {x},
                     [x, factor](std::span<const double> go) {
                         auto gx = grad_sink(x);
                         const double g = go[0] * factor;
                         for (double& v : gx) v += g;
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    return record_op("reshape", std::move(shape), std::move(out), {x}, [x](std::span<const double> go) {
        auto gx = grad_sink(x);
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    });
}

Tensor slice_flat(const Tensor& x, std::size_t offset, Shape shape) {
    const std::size_t count = shape_numel(shape);
    if (offset + count > x.numel()) {
        throw ShapeError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + count) +
                         ") exceeds tensor of " + std::to_string(x.numel()) + " elements");
    }
    const auto in = x.data();
    std::vector<double> out(in.begin() + static_cast<std::ptrdiff_t>(offset),
                            in.begin() + static_cast<std::ptrdiff_t>(offset + count));
    return record_op("slice", std::move(shape), std::move(out), {x}, [x, offset](std::span<const double> go) {
        auto gx = grad_sink(x);
        for (std::size_t i = 0; i < go.size(); ++i) gx[offset + i] += go[i];
    });
}

Tensor linear(const Tensor& weight, const Tensor& x, const Tensor& bias) {
    require_rank(weight, 2, "linear weight");
    const std::size_t rows = weight.dim(0);
    const std::size_t cols = weight.dim(1);
    if (x.numel() != cols) {
        throw ShapeError("linear weight " + shape_str(weight.shape()) + " cannot take input " + shape_str(x.shape()));
    }
    if (bias.numel() != rows) {
        throw ShapeError("linear bias " + shape_str(bias.shape()) + " does not match " + std::to_string(rows) +
                         " outputs");
    }
    const auto w = weight.data();
    const auto v = x.data();
    const auto b = bias.data();
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += w[r * cols + c] * v[c];
        out[r] = acc + b[r];
    }
    return record_op("linear", {rows}, std::move(out), {weight, x, bias},
                     [weight, x, bias, rows, cols](std::span<const double> go) {
                         auto gw = grad_sink(weight);
                         auto gx = grad_sink(x);
                         auto gb = grad_sink(bias);
                         const auto w = weight.data();
                         const auto v = x.data();
                         for (std::size_t r = 0; r < rows; ++r) {
                             if (!gb.empty()) gb[r] += go[r];
                             for (std::size_t c = 0; c < cols; ++c) {
                                 if (!gw.empty()) gw[r * cols + c] += go[r] * v[c];
                                 if (!gx.empty()) gx[c] += go[r] * w[r * cols + c];
                             }
                         }
                     });
}

Tensor scale_kernels(const Tensor& weight, const Tensor& scales) {
    require_rank(weight, 4, "scale_kernels weight");
    require_rank(scales, 2, "scale_kernels scales");
    const std::size_t v = weight.dim(0);
    const std::size_t u = weight.dim(1);
    const std::size_t k = weight.dim(2) * weight.dim(3);
    if (scales.dim(0) != u || scales.dim(1) != v) {
        throw ShapeError("scale matrix " + shape_str(scales.shape()) + " does not match kernel bank " +
                         shape_str(weight.shape()) + " (expected [" + std::to_string(u) + "," + std::to_string(v) + "])");
    }
    const auto w = weight.data();
    const auto s = scales.data();
    std::vector<double> out(w.size());
    for (std::size_t o = 0; o < v; ++o) {
        for (std::size_t i = 0; i < u; ++i) {
            const double m = s[i * v + o];
            const std::size_t base = (o * u + i) * k;
            for (std::size_t t = 0; t < k; ++t) out[base + t] = m * w[base + t];
        }
    }
    return record_op("scale_kernels", weight.shape(), std::move(out), {weight, scales},
                     [weight, scales, u, v, k](std::span<const double> go) {
                         auto gw = grad_sink(weight);
                         auto gs = grad_sink(scales);
                         const auto w = weight.data();
                         const auto s = scales.data();
                         for (std::size_t o = 0; o < v; ++o) {
                             for (std::size_t i = 0; i < u; ++i) {
                                 const std::size_t base = (o * u + i) * k;
                                 const double m = s[i * v + o];
                                 double acc = 0.0;
                                 for (std::size_t t = 0; t < k; ++t) {
                                     if (!gw.empty()) gw[base + t] += go[base + t] * m;
                                     acc += go[base + t] * w[base + t];
                                 }
                                 if (!gs.empty()) gs[i * v + o] += acc;
                             }
                         }
                     });
}

std::vector<double> gaussian_kernel_1d(int window, double sigma) {
    if (window <= 0 || window % 2 == 0) {
        throw ConfigError("Gaussian window must be a positive odd size, got " + std::to_string(window));
    }
    if (!(sigma > 0.0)) {
        throw ConfigError("Gaussian sigma must be positive");
    }
    const int r = window / 2;
    std::vector<double> taps(static_cast<std::size_t>(window));
    double total = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        taps[static_cast<std::size_t>(i + r)] = v;
        total += v;
    }
    for (double& t : taps) t /= total;
    return taps;
}

namespace {

// One separable pass along rows (axis=1) or columns (axis=0) of each plane.
void filter_pass(const double* src, double* dst, std::size_t planes, std::size_t h, std::size_t w,
                 const std::vector<double>& taps, bool along_width) {
    const auto r = static_cast<std::ptrdiff_t>(taps.size() / 2);
    const auto H = static_cast<std::ptrdiff_t>(h);
    const auto W = static_cast<std::ptrdiff_t>(w);
    for (std::size_t p = 0; p < planes; ++p) {
        const double* in = src + p * h * w;
        double* out = dst + p * h * w;
        for (std::ptrdiff_t y = 0; y < H; ++y) {
            for (std::ptrdiff_t x = 0; x < W; ++x) {
                double acc = 0.0;
                for (std::ptrdiff_t t = -r; t <= r; ++t) {
                    const double k = taps[static_cast<std::size_t>(t + r)];
                    acc += along_width ? k * in[y * W + reflect_index(x + t, W)]
                                       : k * in[reflect_index(y + t, H) * W + x];
                }
                out[y * W + x] = acc;
            }
        }
    }
}

// Adjoint of filter_pass: scatters each output gradient back to its taps.
void filter_pass_adjoint(const double* grad_out, double* grad_in, std::size_t planes, std::size_t h, std::size_t w,
                         const std::vector<double>& taps, bool along_width) {
    const auto r = static_cast<std::ptrdiff_t>(taps.size() / 2);
    const auto H = static_cast<std::ptrdiff_t>(h);
    const auto W = static_cast<std::ptrdiff_t>(w);
    for (std::size_t p = 0; p < planes; ++p) {
        const double* go = grad_out + p * h * w;
        double* gi = grad_in + p * h * w;
        for (std::ptrdiff_t y = 0; y < H; ++y) {
            for (std::ptrdiff_t x = 0; x < W; ++x) {
                const double g = go[y * W + x];
                for (std::ptrdiff_t t = -r; t <= r; ++t) {
                    const double k = taps[static_cast<std::size_t>(t + r)];
                    if (along_width) {
                        gi[y * W + reflect_index(x + t, W)] += k * g;
                    } else {
                        gi[reflect_index(y + t, H) * W + x] += k * g;
                    }
                }
            }
        }
    }
}

}  // namespace

namespace detail {

void gaussian_filter_forward(const double* src, double* dst, std::size_t planes, std::size_t h, std::size_t w,
                             const std::vector<double>& taps) {
    std::vector<double> tmp(planes * h * w);
    filter_pass(src, tmp.data(), planes, h, w, taps, true);
    filter_pass(tmp.data(), dst, planes, h, w, taps, false);
}

void gaussian_filter_adjoint_add(const double* grad_out, double* grad_in, std::size_t planes, std::size_t h,
                                 std::size_t w, const std::vector<double>& taps) {
    std::vector<double> tmp(planes * h * w, 0.0);
    filter_pass_adjoint(grad_out, tmp.data(), planes, h, w, taps, false);
    filter_pass_adjoint(tmp.data(), grad_in, planes, h, w, taps, true);
}

}  // namespace detail

Tensor gaussian_window_filter(const Tensor& input, int window, double sigma) {
    const std::vector<double> taps = gaussian_kernel_1d(window, sigma);
    require_rank(input, 4, "gaussian_window_filter input");
    const std::size_t planes = input.dim(0) * input.dim(1);
    const std::size_t h = input.dim(2);
    const std::size_t w = input.dim(3);
    const auto r = static_cast<std::size_t>(window / 2);
    const auto too_small = [r](std::size_t extent) { return extent > 1 && r >= extent; };
    if (too_small(h) || too_small(w)) {
        throw ConfigError("window " + std::to_string(window) + " too large for reflection padding of " +
                          shape_str(input.shape()));
    }
    std::vector<double> out(input.numel());
    detail::gaussian_filter_forward(input.data().data(), out.data(), planes, h, w, taps);
    return record_op("gaussian_window_filter", input.shape(), std::move(out), {input},
                     [input, taps, planes, h, w](std::span<const double> go) {
                         auto gi = grad_sink(input);
                         detail::gaussian_filter_adjoint_add(go.data(), gi.data(), planes, h, w, taps);
                     });
}

}  // namespace moddrop
