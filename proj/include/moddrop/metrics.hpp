#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "moddrop/mask.hpp"

namespace moddrop {

enum class Connectivity {
    planar8,        // 2D, 8-neighbourhood
    volumetric26,   // 3D, 26-neighbourhood
};

Connectivity default_connectivity(const BinaryMask& mask);

struct VoxelMetrics {
    double dsc = 0, ppv = 0, tpr = 0;
    double vd = 0;  // NaN when the ground truth is empty
};

// Empty-set conventions: both empty -> dsc = ppv = tpr = 1, vd = 0;
// empty prediction -> ppv = 1; empty ground truth -> tpr = 1, vd = NaN.
VoxelMetrics voxel_metrics(const BinaryMask& pred, const BinaryMask& gt);

struct Components {
    // 0 = background; components numbered 1..count in raster order of their first voxel.
    std::vector<int> labels;
    std::size_t count = 0;
    std::vector<std::size_t> sizes;  // sizes[c - 1] is the voxel count of component c
};

Components connected_components(const BinaryMask& mask, Connectivity connectivity);

struct LesionMetrics {
    double ltpr = 0;
    double lfpr = 0;
};

// A ground-truth lesion counts as detected when at least `min_overlap`
// of its voxels are predicted; a predicted lesion is false when it touches
// no ground-truth voxel. Empty-set conventions mirror voxel_metrics:
// empty gt -> ltpr = 1, empty prediction -> lfpr = 0.
LesionMetrics lesion_metrics(const BinaryMask& pred, const BinaryMask& gt, Connectivity connectivity,
                             std::size_t min_overlap = 1);

// Pearson correlation across subjects. Throws DegenerateError on zero variance.
double volume_correlation(std::span<const double> pred_volumes, std::span<const double> gt_volumes);

struct SubjectMetrics {
    std::size_t subject_id = 0;
    double dsc = 0, ppv = 0, tpr = 0, lfpr = 0, ltpr = 0, vd = 0;
    double pred_volume = 0, gt_volume = 0;
};

struct MetricsReport {
    std::vector<SubjectMetrics> subjects;
    double dsc = 0, ppv = 0, tpr = 0, lfpr = 0, ltpr = 0;
    double vd = 0;    // mean over subjects with non-empty ground truth; NaN if none
    double corr = 0;  // NaN when degenerate
    double sc = 0;
    std::vector<std::string> warnings;
};

// SC = DSC/8 + PPV/8 + (1 - LFPR)/4 + LTPR/4 + Corr/4.
// Throws ConfigError when any of those components is NaN.
double overall_score(const MetricsReport& report);

SubjectMetrics subject_metrics(const BinaryMask& pred, const BinaryMask& gt, Connectivity connectivity,
                               std::size_t min_overlap = 1);

// Aggregates per-subject rows: means of the rates, Pearson Corr of volumes
// and SC. A degenerate Corr is reported as NaN, noted in warnings, and left
// out of SC (contributes 0).
MetricsReport aggregate(std::vector<SubjectMetrics> subjects);

}  // namespace moddrop
