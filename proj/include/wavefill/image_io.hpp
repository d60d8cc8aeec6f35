#pragma once

#include <string>

#include "wavefill/plane.hpp"

namespace wavefill {

// 8-bit binary PPM (P6, 3 channels) / PGM (P5, 1 channel). Pixel values are
// normalized to [0, 1] on load and clamped/quantized on save.
Plane3 load_image(const std::string& path);
void save_image(const Plane3& image, const std::string& path);

// Raw float container for lossless plane exchange: magic, version,
// (height, width, channels), little-endian float64 payload.
Plane3 load_plane_raw(const std::string& path);
void save_plane_raw(const Plane3& plane, const std::string& path);

// Dispatch on extension: .ppm/.pgm -> 8-bit, .wfr -> raw float container.
Plane3 load_plane_any(const std::string& path);
void save_plane_any(const Plane3& plane, const std::string& path);

}  // namespace wavefill
