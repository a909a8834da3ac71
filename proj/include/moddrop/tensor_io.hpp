#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "moddrop/tensor.hpp"

namespace moddrop {

// MDT1 tensor payload:
//   "MDT1" | u8 rank | rank x u32 LE extents | row-major f32 LE values.
// Values are narrowed to float32 on write and widened back on read.
void write_tensor(std::ostream& out, const Tensor& t);
// `base_offset` is added to byte offsets reported in FormatError, so readers
// embedded in larger containers can report absolute positions.
Tensor read_tensor(std::istream& in, std::uint64_t base_offset = 0);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

// Round every element to the nearest float32, so a tensor survives MDT1
// round trips unchanged.
void narrow_to_float(Tensor& t);

namespace le {
void put_u8(std::ostream& out, std::uint8_t v);
void put_u16(std::ostream& out, std::uint16_t v);
void put_u32(std::ostream& out, std::uint32_t v);
void put_f32(std::ostream& out, float v);
}  // namespace le

// Sequential little-endian reader that tracks its byte offset and throws
// FormatError on short reads.
class ByteReader {
public:
    ByteReader(std::istream& in, std::uint64_t base_offset) : in_(in), offset_(base_offset) {}

    void read(char* dst, std::size_t n, const char* what);
    std::uint8_t u8(const char* what);
    std::uint16_t u16(const char* what);
    std::uint32_t u32(const char* what);
    float f32(const char* what);
    std::uint64_t offset() const { return offset_; }
    // Accounts for bytes consumed from the stream by another reader.
    void advance(std::uint64_t n) { offset_ += n; }

private:
    std::istream& in_;
    std::uint64_t offset_;
};

}  // namespace moddrop
