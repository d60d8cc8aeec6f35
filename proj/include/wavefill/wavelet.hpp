#pragma once

#include <string>
#include <vector>

#include "wavefill/errors.hpp"
#include "wavefill/plane.hpp"

namespace wavefill {

// 2D Haar transform, orthonormal taps 1/sqrt(2).
//
// Band orientation convention (fixed so serialized pyramids are portable):
//   LL = low-pass along width, low-pass along height
//   LH = low-pass along width, high-pass along height  (horizontal detail)
//   HL = high-pass along width, low-pass along height  (vertical detail)
//   HH = high-pass along both axes                     (diagonal detail)

template <typename T>
struct WaveletLevelT {
    PlaneT<T> ll, lh, hl, hh;
};

template <typename T>
struct DetailTripleT {
    PlaneT<T> lh, hl, hh;
};

// Sub-bands of an n-level decomposition: the coarsest LL plus, per level,
// the (LH, HL, HH) detail triple. details[0] is level 1 (finest).
template <typename T>
struct WaveletPyramidT {
    PlaneT<T> ll;
    std::vector<DetailTripleT<T>> details;

    int levels() const { return static_cast<int>(details.size()); }
};

// Assembled broadbands for a 2-level pyramid. High-frequency planes hold the
// (LH, HL, HH) triple of their level concatenated on the channel axis.
template <typename T>
struct BandTripleT {
    PlaneT<T> low_freq;   // H/4 x W/4 x C
    PlaneT<T> lv2_high;   // H/4 x W/4 x 3C
    PlaneT<T> lv1_high;   // H/2 x W/2 x 3C
};

using WaveletLevel = WaveletLevelT<double>;
using DetailTriple = DetailTripleT<double>;
using WaveletPyramid = WaveletPyramidT<double>;
using BandTriple = BandTripleT<double>;

template <typename T>
WaveletLevelT<T> dwt2_level(const PlaneT<T>& input) {
    if (input.height % 2 != 0 || input.width % 2 != 0)
        throw OddDimension("dwt2_level requires even height and width, got " +
                           input.shape_str());
    const int oh = input.height / 2;
    const int ow = input.width / 2;
    const int c = input.channels;
    WaveletLevelT<T> out{PlaneT<T>(oh, ow, c), PlaneT<T>(oh, ow, c), PlaneT<T>(oh, ow, c),
                         PlaneT<T>(oh, ow, c)};
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                const T a = input.at(2 * y, 2 * x, ch);
                const T b = input.at(2 * y, 2 * x + 1, ch);
                const T cc = input.at(2 * y + 1, 2 * x, ch);
                const T d = input.at(2 * y + 1, 2 * x + 1, ch);
                // Separable 1/sqrt(2) filter pairs fused into one 2x2 stencil;
                // the two 1/sqrt(2) factors combine to 1/2.
                out.ll.at(y, x, ch) = (a + b + cc + d) / 2;
                out.lh.at(y, x, ch) = (a + b - cc - d) / 2;
                out.hl.at(y, x, ch) = (a - b + cc - d) / 2;
                out.hh.at(y, x, ch) = (a - b - cc + d) / 2;
            }
        }
    }
    return out;
}

template <typename T>
PlaneT<T> idwt2_level(const WaveletLevelT<T>& level) {
    require_same_shape(level.ll, level.lh, "idwt2_level ll/lh");
    require_same_shape(level.ll, level.hl, "idwt2_level ll/hl");
    require_same_shape(level.ll, level.hh, "idwt2_level ll/hh");
    const int h = level.ll.height;
    const int w = level.ll.width;
    const int c = level.ll.channels;
    PlaneT<T> out(2 * h, 2 * w, c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                const T ll = level.ll.at(y, x, ch);
                const T lh = level.lh.at(y, x, ch);
                const T hl = level.hl.at(y, x, ch);
                const T hh = level.hh.at(y, x, ch);
                out.at(2 * y, 2 * x, ch) = (ll + lh + hl + hh) / 2;
                out.at(2 * y, 2 * x + 1, ch) = (ll + lh - hl - hh) / 2;
                out.at(2 * y + 1, 2 * x, ch) = (ll - lh + hl - hh) / 2;
                out.at(2 * y + 1, 2 * x + 1, ch) = (ll - lh - hl + hh) / 2;
            }
        }
    }
    return out;
}

template <typename T>
WaveletPyramidT<T> decompose(const PlaneT<T>& image, int n_levels) {
    if (n_levels < 1) throw IndivisibleDimension("decompose requires n_levels >= 1");
    const int factor = 1 << n_levels;
    if (image.height % factor != 0 || image.width % factor != 0)
        throw IndivisibleDimension("decompose of " + image.shape_str() + " at " +
                                   std::to_string(n_levels) + " levels needs dimensions " +
                                   "divisible by " + std::to_string(factor));
    WaveletPyramidT<T> pyr;
    pyr.details.reserve(n_levels);
    PlaneT<T> running = image;
    for (int n = 0; n < n_levels; ++n) {
        WaveletLevelT<T> lvl = dwt2_level(running);
        pyr.details.push_back({std::move(lvl.lh), std::move(lvl.hl), std::move(lvl.hh)});
        running = std::move(lvl.ll);
    }
    pyr.ll = std::move(running);
    return pyr;
}

template <typename T>
PlaneT<T> reconstruct(const WaveletPyramidT<T>& pyramid) {
    if (pyramid.details.empty()) throw WrongLevelCount("reconstruct of empty pyramid");
    PlaneT<T> running = pyramid.ll;
    for (int n = pyramid.levels() - 1; n >= 0; --n) {
        const auto& d = pyramid.details[static_cast<size_t>(n)];
        running = idwt2_level<T>({running, d.lh, d.hl, d.hh});
    }
    return running;
}

// (LH, HL, HH) concatenated on the channel axis, in that order.
template <typename T>
PlaneT<T> concat_detail_channels(const DetailTripleT<T>& d) {
    require_same_shape(d.lh, d.hl, "detail lh/hl");
    require_same_shape(d.lh, d.hh, "detail lh/hh");
    const int h = d.lh.height, w = d.lh.width, c = d.lh.channels;
    PlaneT<T> out(h, w, 3 * c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) {
                out.at(y, x, ch) = d.lh.at(y, x, ch);
                out.at(y, x, c + ch) = d.hl.at(y, x, ch);
                out.at(y, x, 2 * c + ch) = d.hh.at(y, x, ch);
            }
    return out;
}

template <typename T>
DetailTripleT<T> split_detail_channels(const PlaneT<T>& band) {
    if (band.channels % 3 != 0)
        throw ShapeMismatch("high-frequency broadband needs 3*C channels, got " +
                            band.shape_str());
    const int c = band.channels / 3;
    DetailTripleT<T> d{PlaneT<T>(band.height, band.width, c),
                       PlaneT<T>(band.height, band.width, c),
                       PlaneT<T>(band.height, band.width, c)};
    for (int y = 0; y < band.height; ++y)
        for (int x = 0; x < band.width; ++x)
            for (int ch = 0; ch < c; ++ch) {
                d.lh.at(y, x, ch) = band.at(y, x, ch);
                d.hl.at(y, x, ch) = band.at(y, x, c + ch);
                d.hh.at(y, x, ch) = band.at(y, x, 2 * c + ch);
            }
    return d;
}

template <typename T>
BandTripleT<T> assemble_bands(const WaveletPyramidT<T>& pyramid) {
    if (pyramid.levels() != 2)
        throw WrongLevelCount("assemble_bands expects a 2-level pyramid, got " +
                              std::to_string(pyramid.levels()) + " levels");
    return {pyramid.ll, concat_detail_channels(pyramid.details[1]),
            concat_detail_channels(pyramid.details[0])};
}

template <typename T>
WaveletPyramidT<T> disassemble_bands(const BandTripleT<T>& bands) {
    if (bands.low_freq.channels * 3 != bands.lv2_high.channels ||
        bands.lv2_high.channels != bands.lv1_high.channels)
        throw ShapeMismatch("band triple channels must be (C, 3C, 3C), got " +
                            bands.low_freq.shape_str() + " / " + bands.lv2_high.shape_str() +
                            " / " + bands.lv1_high.shape_str());
    if (bands.low_freq.height != bands.lv2_high.height ||
        bands.low_freq.width != bands.lv2_high.width ||
        bands.lv1_high.height != 2 * bands.lv2_high.height ||
        bands.lv1_high.width != 2 * bands.lv2_high.width)
        throw ShapeMismatch("band triple spatial sizes must be (H/4, H/4, H/2)");
    WaveletPyramidT<T> pyr;
    pyr.ll = bands.low_freq;
    pyr.details.push_back(split_detail_channels(bands.lv1_high));
    pyr.details.push_back(split_detail_channels(bands.lv2_high));
    return pyr;
}

}  // namespace wavefill
