#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "wavefill/errors.hpp"

namespace wavefill {

// A spatial feature volume: height x width x channels, row-major with the
// channel index fastest. Carries images, wavelet sub-bands and feature maps.
template <typename T>
struct PlaneT {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<T> values;

    PlaneT() = default;
    PlaneT(int h, int w, int c, T fill = T(0))
        : height(h), width(w), channels(c),
          values(static_cast<size_t>(h) * w * c, fill) {}

    size_t size() const { return values.size(); }

    T& at(int y, int x, int ch) {
        return values[(static_cast<size_t>(y) * width + x) * channels + ch];
    }
    T at(int y, int x, int ch) const {
        return values[(static_cast<size_t>(y) * width + x) * channels + ch];
    }

    bool same_shape(const PlaneT& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }

    bool all_finite() const {
        for (T v : values)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    std::string shape_str() const {
        return std::to_string(height) + "x" + std::to_string(width) + "x" +
               std::to_string(channels);
    }

    template <typename U>
    PlaneT<U> cast() const {
        PlaneT<U> out(height, width, channels);
        for (size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<U>(values[i]);
        return out;
    }
};

using Plane3 = PlaneT<double>;
using Plane3f = PlaneT<float>;

// Axis-aligned rectangle in pixel coordinates.
struct Rect {
    int y0 = 0, x0 = 0, h = 0, w = 0;
};

template <typename T>
void require_same_shape(const PlaneT<T>& a, const PlaneT<T>& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeMismatch(std::string(what) + ": " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace wavefill
