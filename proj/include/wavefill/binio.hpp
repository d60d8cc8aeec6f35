#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "wavefill/errors.hpp"

namespace wavefill::binio {

// Little-endian primitives, explicit byte order so containers are
// byte-stable across platforms.

inline void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, uint64_t v) {
    put_u32(os, static_cast<uint32_t>(v));
    put_u32(os, static_cast<uint32_t>(v >> 32));
}

inline void put_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

inline void put_f32(std::ostream& os, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

inline uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw CorruptPayload("truncated stream");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline uint64_t get_u64(std::istream& is) {
    const uint64_t lo = get_u32(is);
    const uint64_t hi = get_u32(is);
    return lo | (hi << 32);
}

inline double get_f64(std::istream& is) {
    const uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline float get_f32(std::istream& is) {
    const uint32_t bits = get_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline void put_string(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is) {
    const uint32_t n = get_u32(is);
    if (n > (1u << 20)) throw CorruptPayload("unreasonable string length");
    std::string s(n, '\0');
    if (n && !is.read(s.data(), n)) throw CorruptPayload("truncated string");
    return s;
}

// CRC-32 (IEEE 802.3 polynomial), table-free bitwise variant; used to
// checksum checkpoint payloads.
class Crc32 {
  public:
    void update(const void* data, size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            crc_ ^= p[i];
            for (int k = 0; k < 8; ++k)
                crc_ = (crc_ >> 1) ^ (0xedb88320u & (~(crc_ & 1u) + 1u));
        }
    }
    uint32_t value() const { return ~crc_; }

  private:
    uint32_t crc_ = 0xffffffffu;
};

inline uint32_t crc32(const std::string& bytes) {
    Crc32 c;
    c.update(bytes.data(), bytes.size());
    return c.value();
}

}  // namespace wavefill::binio
