#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Little-endian primitives shared by the PEMB and PMLP containers. Encoding is
// done byte by byte so the on-disk layout never depends on host endianness.

namespace patcls::binio {

class Writer {
public:
    void bytes(std::string_view raw);
    void u8(std::uint8_t v);
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    /// u16 byte length followed by the raw UTF-8 bytes.
    void short_string(std::string_view s, std::string_view what);

    const std::vector<std::uint8_t>& buffer() const { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked cursor over an in-memory file image. Every read past the
/// end throws IoError naming `context` and the offset.
class Reader {
public:
    Reader(std::span<const std::uint8_t> data, std::string context);

    std::string bytes(std::size_t n);
    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    std::string short_string();

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }
    [[noreturn]] void fail(const std::string& message) const;

private:
    void need(std::size_t n);

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
    std::string context_;
};

std::vector<std::uint8_t> read_file(const std::string& path);
/// Writes via a temporary sibling and renames, so readers never observe a
/// half-written file.
void write_file(const std::string& path, std::span<const std::uint8_t> data);

} // namespace patcls::binio
