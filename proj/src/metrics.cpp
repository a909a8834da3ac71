#include "moddrop/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "moddrop/error.hpp"

namespace moddrop {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_same_shape(const BinaryMask& a, const BinaryMask& b) {
    if (a.shape != b.shape) {
        throw ShapeError("mask shapes differ: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    }
}

// Disjoint-set forest over provisional labels.
struct UnionFind {
    std::vector<int> parent;

    int make() {
        parent.push_back(static_cast<int>(parent.size()));
        return static_cast<int>(parent.size()) - 1;
    }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) {
            // Keep the smaller id as root so raster order survives.
            if (a < b) parent[static_cast<std::size_t>(b)] = a;
            else parent[static_cast<std::size_t>(a)] = b;
        }
    }
};

}  // namespace

Connectivity default_connectivity(const BinaryMask& mask) {
    return mask.shape.size() == 3 ? Connectivity::volumetric26 : Connectivity::planar8;
}

VoxelMetrics voxel_metrics(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_shape(pred, gt);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred.bits[i] != 0;
        const bool g = gt.bits[i] != 0;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
    }
    const auto d = [](std::size_t v) { return static_cast<double>(v); };
    VoxelMetrics m;
    const std::size_t pred_count = tp + fp;
    const std::size_t gt_count = tp + fn;
    if (pred_count == 0 && gt_count == 0) {
        m.dsc = m.ppv = m.tpr = 1.0;
        m.vd = 0.0;
        return m;
    }
    m.dsc = 2.0 * d(tp) / (2.0 * d(tp) + d(fp) + d(fn));
    m.ppv = pred_count == 0 ? 1.0 : d(tp) / d(pred_count);
    m.tpr = gt_count == 0 ? 1.0 : d(tp) / d(gt_count);
    m.vd = gt_count == 0 ? kNaN : std::abs(d(pred_count) - d(gt_count)) / d(gt_count);
    return m;
}

Components connected_components(const BinaryMask& mask, Connectivity connectivity) {
    const std::size_t rank = mask.shape.size();
    if ((connectivity == Connectivity::planar8 && rank != 2) ||
        (connectivity == Connectivity::volumetric26 && rank != 3)) {
        throw ConfigError("connectivity does not match a mask of shape " + shape_str(mask.shape));
    }
    const std::ptrdiff_t depth = rank == 3 ? static_cast<std::ptrdiff_t>(mask.shape[0]) : 1;
    const auto height = static_cast<std::ptrdiff_t>(mask.shape[rank - 2]);
    const auto width = static_cast<std::ptrdiff_t>(mask.shape[rank - 1]);
    const auto index = [&](std::ptrdiff_t z, std::ptrdiff_t y, std::ptrdiff_t x) {
        return static_cast<std::size_t>((z * height + y) * width + x);
    };

    // Already-visited neighbours in raster order (the half of the neighbourhood before the voxel).
    std::vector<std::array<std::ptrdiff_t, 3>> back;
    for (std::ptrdiff_t dz = (rank == 3 ? -1 : 0); dz <= 0; ++dz) {
        for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
            for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
                if (dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0)))) {
                    back.push_back({dz, dy, dx});
                }
            }
        }
    }

    std::vector<int> provisional(mask.size(), -1);
    UnionFind sets;
    for (std::ptrdiff_t z = 0; z < depth; ++z) {
        for (std::ptrdiff_t y = 0; y < height; ++y) {
            for (std::ptrdiff_t x = 0; x < width; ++x) {
                const std::size_t i = index(z, y, x);
                if (!mask.bits[i]) continue;
                int label = -1;
                for (const auto& o : back) {
                    const std::ptrdiff_t nz = z + o[0], ny = y + o[1], nx = x + o[2];
                    if (nz < 0 || ny < 0 || ny >= height || nx < 0 || nx >= width) continue;
                    const int n = provisional[index(nz, ny, nx)];
                    if (n < 0) continue;
                    if (label < 0) label = n;
                    else sets.unite(label, n);
                }
                provisional[i] = label < 0 ? sets.make() : label;
            }
        }
    }

    Components out;
    out.labels.assign(mask.size(), 0);
    std::vector<int> final_label(sets.parent.size(), 0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (provisional[i] < 0) continue;
        const auto root = static_cast<std::size_t>(sets.find(provisional[i]));
        if (final_label[root] == 0) {
            final_label[root] = static_cast<int>(++out.count);
            out.sizes.push_back(0);
        }
        out.labels[i] = final_label[root];
        ++out.sizes[static_cast<std::size_t>(final_label[root] - 1)];
    }
    return out;
}

LesionMetrics lesion_metrics(const BinaryMask& pred, const BinaryMask& gt, Connectivity connectivity,
                             std::size_t min_overlap) {
    require_same_shape(pred, gt);
    const Components pc = connected_components(pred, connectivity);
    const Components gc = connected_components(gt, connectivity);
    std::vector<std::size_t> gt_hits(gc.count, 0);
    std::vector<bool> pred_touches(pc.count, false);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pc.labels[i] > 0 && gc.labels[i] > 0) {
            ++gt_hits[static_cast<std::size_t>(gc.labels[i] - 1)];
            pred_touches[static_cast<std::size_t>(pc.labels[i] - 1)] = true;
        }
    }
    LesionMetrics m;
    if (gc.count == 0) {
        m.ltpr = 1.0;
    } else {
        std::size_t detected = 0;
        for (std::size_t h : gt_hits) detected += h >= min_overlap;
        m.ltpr = static_cast<double>(detected) / static_cast<double>(gc.count);
    }
    if (pc.count == 0) {
        m.lfpr = 0.0;
    } else {
        std::size_t false_lesions = 0;
        for (bool t : pred_touches) false_lesions += !t;
        m.lfpr = static_cast<double>(false_lesions) / static_cast<double>(pc.count);
    }
    return m;
}

double volume_correlation(std::span<const double> pred_volumes, std::span<const double> gt_volumes) {
    if (pred_volumes.size() != gt_volumes.size() || pred_volumes.size() < 2) {
        throw DegenerateError("volume correlation needs two equal-length series of at least 2 subjects");
    }
    const auto n = static_cast<double>(pred_volumes.size());
    const double mp = std::accumulate(pred_volumes.begin(), pred_volumes.end(), 0.0) / n;
    const double mg = std::accumulate(gt_volumes.begin(), gt_volumes.end(), 0.0) / n;
    double spp = 0, sgg = 0, spg = 0;
    for (std::size_t i = 0; i < pred_volumes.size(); ++i) {
        const double a = pred_volumes[i] - mp;
        const double b = gt_volumes[i] - mg;
        spp += a * a;
        sgg += b * b;
        spg += a * b;
    }
    if (spp == 0.0 || sgg == 0.0) {
        throw DegenerateError("volume correlation undefined: zero variance in " +
                              std::string(spp == 0.0 ? "predicted" : "ground-truth") + " volumes");
    }
    return spg / std::sqrt(spp * sgg);
}

double overall_score(const MetricsReport& r) {
    for (double v : {r.dsc, r.ppv, r.lfpr, r.ltpr, r.corr}) {
        if (std::isnan(v)) {
            throw ConfigError("overall score needs DSC, PPV, LFPR, LTPR and Corr; one is missing");
        }
    }
    return r.dsc / 8.0 + r.ppv / 8.0 + (1.0 - r.lfpr) / 4.0 + r.ltpr / 4.0 + r.corr / 4.0;
}

SubjectMetrics subject_metrics(const BinaryMask& pred, const BinaryMask& gt, Connectivity connectivity,
                               std::size_t min_overlap) {
    const VoxelMetrics v = voxel_metrics(pred, gt);
    const LesionMetrics l = lesion_metrics(pred, gt, connectivity, min_overlap);
    SubjectMetrics s;
    s.dsc = v.dsc;
    s.ppv = v.ppv;
    s.tpr = v.tpr;
    s.vd = v.vd;
    s.ltpr = l.ltpr;
    s.lfpr = l.lfpr;
    s.pred_volume = static_cast<double>(pred.count());
    s.gt_volume = static_cast<double>(gt.count());
    return s;
}

MetricsReport aggregate(std::vector<SubjectMetrics> subjects) {
    MetricsReport r;
    r.subjects = std::move(subjects);
    if (r.subjects.empty()) {
        throw DegenerateError("no subjects to aggregate");
    }
    const auto n = static_cast<double>(r.subjects.size());
    std::size_t vd_count = 0;
    double vd_sum = 0.0;
    std::vector<double> pv, gv;
    for (const auto& s : r.subjects) {
        r.dsc += s.dsc / n;
        r.ppv += s.ppv / n;
        r.tpr += s.tpr / n;
        r.lfpr += s.lfpr / n;
        r.ltpr += s.ltpr / n;
        if (!std::isnan(s.vd)) {
            vd_sum += s.vd;
            ++vd_count;
        }
        pv.push_back(s.pred_volume);
        gv.push_back(s.gt_volume);
    }
    if (vd_count < r.subjects.size()) {
        r.warnings.push_back(std::to_string(r.subjects.size() - vd_count) +
                             " subject(s) with empty ground truth excluded from VD");
    }
    r.vd = vd_count ? vd_sum / static_cast<double>(vd_count) : kNaN;
    try {
        r.corr = volume_correlation(pv, gv);
        r.sc = overall_score(r);
    } catch (const DegenerateError& e) {
        r.corr = kNaN;
        r.warnings.push_back(std::string("Corr excluded from SC: ") + e.what());
        MetricsReport without = r;
        without.corr = 0.0;
        r.sc = overall_score(without);
    }
    return r;
}

}  // namespace moddrop
