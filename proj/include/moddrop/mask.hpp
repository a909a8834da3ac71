#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "moddrop/tensor.hpp"

namespace moddrop {

// 2D [H,W] or 3D [D,H,W] binary mask, row-major.
struct BinaryMask {
    Shape shape;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    explicit BinaryMask(Shape s) : shape(std::move(s)), bits(shape_numel(shape), 0) {}

    std::size_t size() const { return bits.size(); }
    std::size_t count() const;
    bool empty_foreground() const { return count() == 0; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

// value > threshold -> 1. The tensor's leading singleton axes are dropped
// until the mask is 2D or 3D.
BinaryMask threshold_mask(const Tensor& probabilities, double threshold);
Tensor mask_to_tensor(const BinaryMask& mask, Shape shape);

}  // namespace moddrop
