#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "moddrop/mask.hpp"
#include "moddrop/tensor.hpp"

namespace moddrop {

// Ellipsoidal lesion in voxel coordinates: center (cx, cy, cz), semi-axes
// (rx, ry, rz), in-plane rotation theta (radians). z indexes the 2.5D stack,
// with the labelled center slice at z = 0.
struct Lesion {
    double cx = 0, cy = 0, cz = 0;
    double rx = 1, ry = 1, rz = 1;
    double theta = 0;

    friend bool operator==(const Lesion&, const Lesion&) = default;
};

// One subject: K aligned modality stacks [slices, H, W] plus the center-slice label.
struct MultiModalSample {
    std::size_t subject_id = 0;
    std::uint64_t seed = 0;
    std::vector<Tensor> modalities;
    BinaryMask label;
    std::vector<Lesion> lesions;

    std::size_t modality_count() const { return modalities.size(); }
    std::size_t slices() const { return modalities.at(0).dim(0); }
    std::size_t height() const { return modalities.at(0).dim(1); }
    std::size_t width() const { return modalities.at(0).dim(2); }

    // Label as a [1,1,H,W] 0/1 tensor.
    Tensor label_tensor() const;
};

bool bitwise_equal(const MultiModalSample& a, const MultiModalSample& b);

}  // namespace moddrop
