#include "patcls/binary_io.hpp"

#include "patcls/error.hpp"

#include <bit>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <system_error>

namespace patcls::binio {

void Writer::bytes(std::string_view raw) {
    buf_.insert(buf_.end(), raw.begin(), raw.end());
}

void Writer::u8(std::uint8_t v) { buf_.push_back(v); }

void Writer::u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void Writer::short_string(std::string_view s, std::string_view what) {
    if (s.size() > 0xFFFF) {
        throw ValidationError(std::string(what) + " longer than 65535 bytes");
    }
    u16(static_cast<std::uint16_t>(s.size()));
    bytes(s);
}

Reader::Reader(std::span<const std::uint8_t> data, std::string context)
    : data_(data), context_(std::move(context)) {}

void Reader::fail(const std::string& message) const {
    throw IoError(context_ + ": " + message + " (offset " + std::to_string(pos_) + ")");
}

void Reader::need(std::size_t n) {
    if (remaining() < n) fail("truncated file");
}

std::string Reader::bytes(std::size_t n) {
    need(n);
    std::string out(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return out;
}

std::uint8_t Reader::u8() {
    need(1);
    return data_[pos_++];
}

std::uint16_t Reader::u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 2;
    return v;
}

std::uint32_t Reader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

std::uint64_t Reader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }

std::string Reader::short_string() {
    const std::uint16_t n = u16();
    return bytes(n);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open for reading");
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError(path + ": read failed");
    return data;
}

void write_file(const std::string& path, std::span<const std::uint8_t> data) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(path + ": cannot open for writing");
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size()));
        if (!out) throw IoError(path + ": write failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError(path + ": cannot move file into place");
    }
}

} // namespace patcls::binio
