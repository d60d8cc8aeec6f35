#include "wavefill/pyramid_io.hpp"

#include <fstream>

#include "wavefill/binio.hpp"

namespace wavefill {

namespace {

constexpr uint32_t kMagic = 0x52595057;  // "WPYR"
constexpr uint32_t kVersion = 1;

void put_plane(std::ostream& os, const Plane3& p) {
    binio::put_u32(os, static_cast<uint32_t>(p.height));
    binio::put_u32(os, static_cast<uint32_t>(p.width));
    binio::put_u32(os, static_cast<uint32_t>(p.channels));
    for (double v : p.values) binio::put_f64(os, v);
}

Plane3 get_plane(std::istream& is) {
    const int h = static_cast<int>(binio::get_u32(is));
    const int w = static_cast<int>(binio::get_u32(is));
    const int c = static_cast<int>(binio::get_u32(is));
    if (h <= 0 || w <= 0 || c <= 0 || static_cast<uint64_t>(h) * w * c > (1ull << 32))
        throw CorruptPayload("implausible plane header");
    Plane3 p(h, w, c);
    for (double& v : p.values) v = binio::get_f64(is);
    return p;
}

}  // namespace

void save_pyramid(const WaveletPyramid& pyramid, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    binio::put_u32(os, kMagic);
    binio::put_u32(os, kVersion);
    binio::put_u32(os, static_cast<uint32_t>(pyramid.levels()));
    put_plane(os, pyramid.ll);
    for (const auto& d : pyramid.details) {
        put_plane(os, d.lh);
        put_plane(os, d.hl);
        put_plane(os, d.hh);
    }
    if (!os) throw IoError("write failed for " + path);
}

WaveletPyramid load_pyramid(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    if (binio::get_u32(is) != kMagic) throw CorruptPayload("not a pyramid container: " + path);
    const uint32_t version = binio::get_u32(is);
    if (version != kVersion)
        throw VersionMismatch("pyramid container version " + std::to_string(version) +
                              ", expected " + std::to_string(kVersion));
    const uint32_t levels = binio::get_u32(is);
    if (levels == 0 || levels > 16) throw CorruptPayload("implausible level count");
    WaveletPyramid pyr;
    pyr.ll = get_plane(is);
    for (uint32_t n = 0; n < levels; ++n) {
        DetailTriple d;
        d.lh = get_plane(is);
        d.hl = get_plane(is);
        d.hh = get_plane(is);
        pyr.details.push_back(std::move(d));
    }
    return pyr;
}

}  // namespace wavefill
