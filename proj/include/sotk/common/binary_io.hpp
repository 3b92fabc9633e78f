#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "sotk/common/error.hpp"

namespace sotk {

// 64-bit FNV-1a, used for content checksums in vocab files, shards and manifests.
class Fnv1a64 {
public:
    void update(std::string_view bytes) {
        for (unsigned char c : bytes) {
            state_ ^= c;
            state_ *= 0x100000001b3ULL;
        }
    }
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a64(std::string_view bytes) {
    Fnv1a64 h;
    h.update(bytes);
    return h.digest();
}

std::string hex64(std::uint64_t value);

// Little-endian append-only byte buffer.
class ByteWriter {
public:
    template <class T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
            value = byteswap(value);
        }
        char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        bytes_.append(raw, sizeof(T));
    }
    void put_bytes(std::string_view b) { bytes_.append(b); }
    void put_string(std::string_view s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        put_bytes(s);
    }

    const std::string& bytes() const { return bytes_; }
    std::string take() { return std::move(bytes_); }

private:
    template <class T>
    static T byteswap(T value) {
        char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
            std::swap(raw[i], raw[sizeof(T) - 1 - i]);
        }
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }
    std::string bytes_;
};

// Bounds-checked little-endian reader over an in-memory buffer.
class ByteReader {
public:
    explicit ByteReader(std::string_view bytes, std::string what = "buffer")
        : bytes_(bytes), what_(std::move(what)) {}

    template <class T>
    T get() {
        require(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
            char raw[sizeof(T)];
            std::memcpy(raw, &value, sizeof(T));
            for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
                std::swap(raw[i], raw[sizeof(T) - 1 - i]);
            }
            std::memcpy(&value, raw, sizeof(T));
        }
        return value;
    }
    std::string_view get_bytes(std::size_t n) {
        require(n);
        auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::string get_string() { return std::string(get_bytes(get<std::uint32_t>())); }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void require(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw DataError(what_ + ": truncated at byte " + std::to_string(pos_));
        }
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace sotk
