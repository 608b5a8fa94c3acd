#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "tractokit/util/error.hpp"

namespace tractokit {

// Little-endian byte buffer writers/readers shared by the binary file
// formats. Explicit byte order keeps files portable across hosts.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const void* p, std::size_t n) {
        const char* c = static_cast<const char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    const std::vector<char>& buffer() const { return buf_; }

private:
    std::vector<char> buf_;
};

class ByteReader {
public:
    ByteReader(const char* data, std::size_t size) : data_(data), size_(size) {}
    explicit ByteReader(const std::vector<char>& v) : ByteReader(v.data(), v.size()) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return size_ - pos_; }

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str(std::size_t max_len = 1u << 20) {
        const std::size_t at = pos_;
        const std::uint32_t len = u32();
        if (len > max_len)
            throw FormatError("string length " + std::to_string(len) + " exceeds limit", at);
        need(len);
        std::string s(data_ + pos_, len);
        pos_ += len;
        return s;
    }
    void expect_magic(const char* magic, std::size_t n) {
        const std::size_t at = pos_;
        need(n);
        if (std::memcmp(data_ + pos_, magic, n) != 0)
            throw FormatError("bad magic, expected \"" + std::string(magic, n) + "\"", at);
        pos_ += n;
    }
    void expect_end() const {
        if (pos_ != size_) throw FormatError("trailing bytes after payload", pos_);
    }

private:
    void need(std::size_t n) const {
        if (size_ - pos_ < n)
            throw FormatError("truncated: need " + std::to_string(n) + " more byte(s)", pos_);
    }

    const char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

// Whole-file helpers. Throw IoError on filesystem failure.
std::vector<char> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<char>& bytes);
void write_file(const std::string& path, const std::string& text);

// Round doubles to f32 storage precision in place, so values survive an
// f32 file format bit-exactly. Deliberately a flat loop: gcc 11 -O3
// miscompiles the equivalent struct-member-wise loop over {x,y,z} structs
// (the vectorized epilogue converts only one of the three fields).
void quantize_f32(double* d, std::size_t n);

}  // namespace tractokit
