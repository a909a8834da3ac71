#include "moddrop/mask.hpp"

#include <algorithm>

#include "moddrop/error.hpp"
#include "moddrop/sample.hpp"

namespace moddrop {

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

BinaryMask threshold_mask(const Tensor& probabilities, double threshold) {
    Shape shape = probabilities.shape();
    while (shape.size() > 2 && shape.front() == 1) {
        shape.erase(shape.begin());
    }
    if (shape.size() != 2 && shape.size() != 3) {
        throw ShapeError("cannot view " + shape_str(probabilities.shape()) + " as a 2D or 3D mask");
    }
    BinaryMask mask(shape);
    const auto p = probabilities.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        mask.bits[i] = p[i] > threshold ? 1 : 0;
    }
    return mask;
}

Tensor mask_to_tensor(const BinaryMask& mask, Shape shape) {
    if (shape_numel(shape) != mask.size()) {
        throw ShapeError("mask of " + std::to_string(mask.size()) + " voxels cannot fill " + shape_str(shape));
    }
    std::vector<double> data(mask.bits.begin(), mask.bits.end());
    return Tensor::from(std::move(shape), std::move(data));
}

Tensor MultiModalSample::label_tensor() const {
    return mask_to_tensor(label, {1, 1, label.shape.at(0), label.shape.at(1)});
}

bool bitwise_equal(const MultiModalSample& a, const MultiModalSample& b) {
    if (a.subject_id != b.subject_id || a.seed != b.seed || !(a.label == b.label) || a.lesions != b.lesions ||
        a.modalities.size() != b.modalities.size()) {
        return false;
    }
    for (std::size_t k = 0; k < a.modalities.size(); ++k) {
        const auto x = a.modalities[k].data();
        const auto y = b.modalities[k].data();
        if (a.modalities[k].shape() != b.modalities[k].shape() || !std::equal(x.begin(), x.end(), y.begin())) {
            return false;
        }
    }
    return true;
}

}  // namespace moddrop
