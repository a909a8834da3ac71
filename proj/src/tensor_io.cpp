#include "moddrop/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "moddrop/error.hpp"

namespace moddrop {

namespace le {

void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

void put_u16(std::ostream& out, std::uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
    out.write(b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

}  // namespace le

void ByteReader::read(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got != n) {
        throw FormatError(std::string("truncated input while reading ") + what, offset_ + got);
    }
    offset_ += n;
}

std::uint8_t ByteReader::u8(const char* what) {
    char b = 0;
    read(&b, 1, what);
    return static_cast<std::uint8_t>(b);
}

std::uint16_t ByteReader::u16(const char* what) {
    unsigned char b[2];
    read(reinterpret_cast<char*>(b), 2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t ByteReader::u32(const char* what) {
    unsigned char b[4];
    read(reinterpret_cast<char*>(b), 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

float ByteReader::f32(const char* what) { return std::bit_cast<float>(u32(what)); }

void write_tensor(std::ostream& out, const Tensor& t) {
    if (t.rank() > 255) {
        throw ShapeError("MDT1 supports rank <= 255");
    }
    out.write("MDT1", 4);
    le::put_u8(out, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) {
        if (d > 0xFFFFFFFFu) {
            throw ShapeError("MDT1 extent exceeds u32: " + shape_str(t.shape()));
        }
        le::put_u32(out, static_cast<std::uint32_t>(d));
    }
    for (double v : t.data()) {
        le::put_f32(out, static_cast<float>(v));
    }
}

Tensor read_tensor(std::istream& in, std::uint64_t base_offset) {
    ByteReader r(in, base_offset);
    char magic[4];
    const std::uint64_t magic_at = r.offset();
    r.read(magic, 4, "tensor magic");
    if (std::memcmp(magic, "MDT1", 4) != 0) {
        throw FormatError("bad tensor magic, expected MDT1", magic_at);
    }
    const std::uint64_t rank_at = r.offset();
    const std::uint8_t rank = r.u8("tensor rank");
    if (rank == 0) {
        throw FormatError("tensor rank must be positive", rank_at);
    }
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& d : shape) {
        const std::uint64_t at = r.offset();
        d = r.u32("tensor extent");
        if (d == 0) {
            throw FormatError("zero tensor extent", at);
        }
        count *= d;
        if (count > (std::uint64_t{1} << 32)) {
            throw FormatError("tensor too large", at);
        }
    }
    std::vector<double> data(count);
    std::vector<char> raw(count * 4);
    r.read(raw.data(), raw.size(), "tensor values");
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[i * 4 + b])) << (8 * b);
        }
        data[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return Tensor::from(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    write_tensor(out, t);
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        Tensor t = read_tensor(in);
        const auto end = in.tellg();
        if (in.peek() != std::char_traits<char>::eof()) {
            throw FormatError("trailing bytes after tensor", static_cast<std::uint64_t>(end));
        }
        return t;
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.reason(), e.offset());
    }
}

void narrow_to_float(Tensor& t) {
    for (double& v : t.mutable_data()) {
        v = static_cast<double>(static_cast<float>(v));
    }
}

}  // namespace moddrop
