#include "moddrop/modality_code.hpp"

#include <algorithm>

#include "moddrop/error.hpp"

namespace moddrop {

ModalityCode ModalityCode::from_mask(std::uint32_t mask, std::size_t k) {
    if (k > 32 || (k < 32 && (mask >> k) != 0)) {
        throw InvalidCodeError("mask " + std::to_string(mask) + " does not fit in " + std::to_string(k) + " bits");
    }
    std::vector<bool> bits(k);
    for (std::size_t i = 0; i < k; ++i) bits[i] = ((mask >> i) & 1u) != 0;
    return ModalityCode(std::move(bits));
}

ModalityCode ModalityCode::parse(std::string_view text) {
    if (text.empty()) {
        throw InvalidCodeError("empty modality code");
    }
    std::vector<bool> bits;
    for (char c : text) {
        if (c != '0' && c != '1') {
            throw InvalidCodeError("modality code '" + std::string(text) + "' must contain only 0 and 1");
        }
        bits.push_back(c == '1');
    }
    return ModalityCode(std::move(bits));
}

bool ModalityCode::any() const { return std::find(bits_.begin(), bits_.end(), true) != bits_.end(); }

bool ModalityCode::all() const { return std::find(bits_.begin(), bits_.end(), false) == bits_.end(); }

std::size_t ModalityCode::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

std::uint32_t ModalityCode::mask() const {
    std::uint32_t m = 0;
    for (std::size_t i = 0; i < bits_.size() && i < 32; ++i) {
        if (bits_[i]) m |= 1u << i;
    }
    return m;
}

std::string ModalityCode::str() const {
    std::string s;
    for (bool b : bits_) s.push_back(b ? '1' : '0');
    return s;
}

std::vector<double> ModalityCode::as_vector() const {
    std::vector<double> v;
    for (bool b : bits_) v.push_back(b ? 1.0 : 0.0);
    return v;
}

std::vector<ModalityCode> enumerate_configs(std::size_t k) {
    if (k < 1 || k > 16) {
        throw ConfigError("modality count must be in [1, 16], got " + std::to_string(k));
    }
    std::vector<ModalityCode> codes;
    const std::uint32_t total = 1u << k;
    codes.reserve(total - 1);
    for (std::uint32_t m = 1; m < total; ++m) {
        codes.push_back(ModalityCode::from_mask(m, k));
    }
    std::sort(codes.begin(), codes.end(), [](const ModalityCode& a, const ModalityCode& b) {
        if (a.count() != b.count()) return a.count() > b.count();
        return a.str() < b.str();
    });
    return codes;
}

void require_valid_code(const ModalityCode& code, std::size_t k) {
    if (code.size() != k) {
        throw InvalidCodeError("modality code '" + code.str() + "' has " + std::to_string(code.size()) +
                               " bits, expected " + std::to_string(k));
    }
    if (!code.any()) {
        throw InvalidCodeError("all-zero modality code '" + code.str() + "' is not a valid configuration");
    }
}

}  // namespace moddrop
