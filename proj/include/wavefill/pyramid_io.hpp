#pragma once

#include <string>

#include "wavefill/wavelet.hpp"

namespace wavefill {

// Flat pyramid container: magic, version, n_levels, then LL followed by the
// per-level (LH, HL, HH) triples from level 1 upward. Each plane carries a
// (height, width, channels) header and a little-endian float64 payload.
void save_pyramid(const WaveletPyramid& pyramid, const std::string& path);
WaveletPyramid load_pyramid(const std::string& path);

}  // namespace wavefill
