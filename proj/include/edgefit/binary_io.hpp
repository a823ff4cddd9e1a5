#pragma once

// Little-endian framing helpers shared by the EFW1/EFM1/EFQ1 containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "edgefit/error.hpp"

namespace edgefit::io {

static_assert(std::endian::native == std::endian::little, "containers assume a little-endian host");

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void magic(std::string_view m) { out_.write(m.data(), static_cast<std::streamsize>(m.size())); }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void i8(std::int8_t v) { raw(&v, 1); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void i32(std::int32_t v) { raw(&v, 4); }
    void f32(float v) { raw(&v, 4); }

private:
    void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    /// Wrong magic is a VersionMismatch; too few bytes is CorruptFile.
    void expect_magic(std::string_view m) {
        std::string got(m.size(), '\0');
        raw(got.data(), got.size());
        if (got != m) fail(ErrorKind::VersionMismatch, "expected magic '" + std::string(m) + "'");
    }
    std::uint8_t u8() { return read<std::uint8_t>(); }
    std::int8_t i8() { return read<std::int8_t>(); }
    std::uint32_t u32() { return read<std::uint32_t>(); }
    std::int32_t i32() { return read<std::int32_t>(); }
    float f32() { return read<float>(); }

    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

private:
    template <typename T>
    T read() {
        T v{};
        raw(&v, sizeof(T));
        return v;
    }
    void raw(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) fail(ErrorKind::CorruptFile, "unexpected end of file");
    }
    std::istream& in_;
};

}  // namespace edgefit::io
