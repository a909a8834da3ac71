#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace moddrop {

// K-bit presence vector; bit k set means modality k is available.
// Renders as a bit string with modality 0 first, e.g. "1011".
class ModalityCode {
public:
    ModalityCode() = default;
    explicit ModalityCode(std::vector<bool> bits) : bits_(std::move(bits)) {}

    static ModalityCode full(std::size_t k) { return ModalityCode(std::vector<bool>(k, true)); }
    // Bit k of `mask` becomes modality k.
    static ModalityCode from_mask(std::uint32_t mask, std::size_t k);
    // Accepts strings of '0'/'1'; throws InvalidCodeError otherwise.
    static ModalityCode parse(std::string_view text);

    std::size_t size() const { return bits_.size(); }
    bool operator[](std::size_t k) const { return bits_.at(k); }
    bool any() const;
    bool all() const;
    std::size_t count() const;
    std::uint32_t mask() const;
    std::string str() const;
    // 0/1 as doubles, the dynamic head's input.
    std::vector<double> as_vector() const;

    friend bool operator==(const ModalityCode&, const ModalityCode&) = default;

private:
    std::vector<bool> bits_;
};

// All 2^K - 1 non-empty codes, most modalities first, then ascending bit string.
std::vector<ModalityCode> enumerate_configs(std::size_t k);

// Throws InvalidCodeError when the code is all-zero or not of length k.
void require_valid_code(const ModalityCode& code, std::size_t k);

}  // namespace moddrop
