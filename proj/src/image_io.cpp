#include "wavefill/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "wavefill/binio.hpp"

namespace wavefill {

namespace {

constexpr uint32_t kRawMagic = 0x57415257;  // "WRAW"
constexpr uint32_t kRawVersion = 1;

int next_pnm_int(std::istream& is) {
    // Skips whitespace and '#' comment lines per the PNM grammar.
    while (is) {
        const int c = is.peek();
        if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            break;
        }
    }
    int v = -1;
    is >> v;
    return v;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Plane3 load_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char m0 = 0, m1 = 0;
    is.get(m0);
    is.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw CorruptPayload(path + " is not a binary PGM/PPM file");
    const int channels = (m1 == '6') ? 3 : 1;
    const int w = next_pnm_int(is);
    const int h = next_pnm_int(is);
    const int maxval = next_pnm_int(is);
    if (w <= 0 || h <= 0 || maxval != 255)
        throw CorruptPayload(path + ": unsupported PNM header (need 8-bit)");
    is.get();  // single whitespace byte before the payload
    std::vector<unsigned char> raw(static_cast<size_t>(w) * h * channels);
    if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
        throw CorruptPayload(path + ": truncated pixel payload");
    Plane3 img(h, w, channels);
    for (size_t i = 0; i < raw.size(); ++i) img.values[i] = raw[i] / 255.0;
    return img;
}

void save_image(const Plane3& image, const std::string& path) {
    if (image.channels != 1 && image.channels != 3)
        throw ShapeMismatch("PNM output needs 1 or 3 channels, got " + image.shape_str());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << (image.channels == 3 ? "P6" : "P5") << "\n"
       << image.width << " " << image.height << "\n255\n";
    std::vector<unsigned char> raw(image.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        const double v = std::clamp(image.values[i], 0.0, 1.0);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!os) throw IoError("write failed for " + path);
}

Plane3 load_plane_raw(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    if (binio::get_u32(is) != kRawMagic)
        throw CorruptPayload(path + " is not a raw plane container");
    const uint32_t version = binio::get_u32(is);
    if (version != kRawVersion)
        throw VersionMismatch("raw plane version " + std::to_string(version));
    const int h = static_cast<int>(binio::get_u32(is));
    const int w = static_cast<int>(binio::get_u32(is));
    const int c = static_cast<int>(binio::get_u32(is));
    if (h <= 0 || w <= 0 || c <= 0 || static_cast<uint64_t>(h) * w * c > (1ull << 32))
        throw CorruptPayload("implausible raw plane header");
    Plane3 p(h, w, c);
    for (double& v : p.values) v = binio::get_f64(is);
    return p;
}

void save_plane_raw(const Plane3& plane, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    binio::put_u32(os, kRawMagic);
    binio::put_u32(os, kRawVersion);
    binio::put_u32(os, static_cast<uint32_t>(plane.height));
    binio::put_u32(os, static_cast<uint32_t>(plane.width));
    binio::put_u32(os, static_cast<uint32_t>(plane.channels));
    for (double v : plane.values) binio::put_f64(os, v);
    if (!os) throw IoError("write failed for " + path);
}

Plane3 load_plane_any(const std::string& path) {
    if (has_suffix(path, ".wfr")) return load_plane_raw(path);
    return load_image(path);
}

void save_plane_any(const Plane3& plane, const std::string& path) {
    if (has_suffix(path, ".wfr"))
        save_plane_raw(plane, path);
    else
        save_image(plane, path);
}

}  // namespace wavefill
