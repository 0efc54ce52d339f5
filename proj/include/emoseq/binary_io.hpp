#pragma once

// Little-endian encoding helpers shared by the FEA1, EMB1, TEMB and SERM
// file formats.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>

#include <boost/crc.hpp>

#include "emoseq/error.hpp"

namespace emoseq {

class ByteWriter {
public:
    void put_bytes(std::string_view bytes) { buf_.append(bytes); }

    void put_u16(std::uint16_t v) { put_le(v); }
    void put_u32(std::uint32_t v) { put_le(v); }
    void put_u64(std::uint64_t v) { put_le(v); }
    void put_f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
    void put_f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }

    const std::string& bytes() const noexcept { return buf_; }
    std::size_t size() const noexcept { return buf_.size(); }

private:
    template <typename U>
    void put_le(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
        }
    }

    std::string buf_;
};

/// Bounds-checked cursor over a byte buffer. Every failure reports the
/// offset at which the read was attempted.
class ByteReader {
public:
    explicit ByteReader(std::string_view data) : data_(data) {}

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    bool at_end() const noexcept { return pos_ == data_.size(); }

    std::string_view get_bytes(std::size_t n, const char* what = "payload") {
        require(n, what);
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    std::uint16_t get_u16(const char* what = "u16") { return get_le<std::uint16_t>(what); }
    std::uint32_t get_u32(const char* what = "u32") { return get_le<std::uint32_t>(what); }
    std::uint64_t get_u64(const char* what = "u64") { return get_le<std::uint64_t>(what); }
    float get_f32(const char* what = "f32") {
        return std::bit_cast<float>(get_le<std::uint32_t>(what));
    }
    double get_f64(const char* what = "f64") {
        return std::bit_cast<double>(get_le<std::uint64_t>(what));
    }

    /// Reads an f32 and rejects NaN/Inf, reporting the value's offset.
    float get_finite_f32(const char* what = "value") {
        const std::size_t at = pos_;
        const float v = get_f32(what);
        if (!std::isfinite(v)) {
            throw FormatError(std::string("non-finite ") + what, at);
        }
        return v;
    }

    void require(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw FormatError(std::string("truncated ") + what, pos_);
        }
    }

private:
    template <typename U>
    U get_le(const char* what) {
        require(sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(U);
        return v;
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError("read failed: " + path.string());
    }
    return data;
}

/// Writes through a sibling temporary and renames, so readers never observe
/// a half-written file.
inline void write_file_bytes(const std::filesystem::path& path, std::string_view data) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + path.string());
        }
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!out) {
            throw IoError("write failed: " + path.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

inline std::uint32_t crc32(std::string_view data) {
    boost::crc_32_type crc;
    crc.process_bytes(data.data(), data.size());
    return crc.checksum();
}

}  // namespace emoseq
