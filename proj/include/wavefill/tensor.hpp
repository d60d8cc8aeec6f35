#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "wavefill/errors.hpp"
#include "wavefill/plane.hpp"

namespace wavefill {

// (batch, height, width, channels), row-major with channels fastest.
// Convolution weights reuse the same struct as (out_ch, kh, kw, in_ch).
struct Shape4 {
    int n = 0, h = 0, w = 0, c = 0;

    size_t count() const {
        return static_cast<size_t>(n) * h * w * c;
    }
    bool operator==(const Shape4& o) const {
        return n == o.n && h == o.h && w == o.w && c == o.c;
    }
    bool operator!=(const Shape4& o) const { return !(*this == o); }

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(h) + "," + std::to_string(w) +
               "," + std::to_string(c) + ")";
    }
};

template <typename T>
struct Tensor {
    Shape4 shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape4 s, T fill = T(0)) : shape(s), data(s.count(), fill) {}

    size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    T& at(int n, int y, int x, int c) {
        return data[((static_cast<size_t>(n) * shape.h + y) * shape.w + x) * shape.c + c];
    }
    T at(int n, int y, int x, int c) const {
        return data[((static_cast<size_t>(n) * shape.h + y) * shape.w + x) * shape.c + c];
    }

    T scalar() const {
        if (size() != 1) throw ShapeMismatch("scalar() on tensor of shape " + shape.str());
        return data[0];
    }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    static Tensor scalar_of(T v) {
        Tensor t(Shape4{1, 1, 1, 1});
        t.data[0] = v;
        return t;
    }
};

// Batch-of-one conversion between the double-precision plane world and the
// network tensor world.
template <typename T, typename U>
Tensor<T> plane_to_tensor(const PlaneT<U>& p) {
    Tensor<T> t(Shape4{1, p.height, p.width, p.channels});
    for (size_t i = 0; i < p.values.size(); ++i) t.data[i] = static_cast<T>(p.values[i]);
    return t;
}

// Stacks same-shaped planes along the batch axis.
template <typename T, typename U>
Tensor<T> planes_to_tensor(const std::vector<PlaneT<U>>& planes) {
    if (planes.empty()) throw ShapeMismatch("planes_to_tensor: empty batch");
    const auto& p0 = planes.front();
    Tensor<T> t(Shape4{static_cast<int>(planes.size()), p0.height, p0.width, p0.channels});
    size_t off = 0;
    for (const auto& p : planes) {
        if (!p.same_shape(p0))
            throw ShapeMismatch("planes_to_tensor: inconsistent plane shapes");
        for (size_t i = 0; i < p.values.size(); ++i) t.data[off + i] = static_cast<T>(p.values[i]);
        off += p.values.size();
    }
    return t;
}

template <typename U, typename T>
PlaneT<U> tensor_to_plane(const Tensor<T>& t, int batch_index = 0) {
    if (batch_index < 0 || batch_index >= t.shape.n)
        throw ShapeMismatch("tensor_to_plane: batch index out of range");
    PlaneT<U> p(t.shape.h, t.shape.w, t.shape.c);
    const size_t per = p.values.size();
    const size_t off = per * static_cast<size_t>(batch_index);
    for (size_t i = 0; i < per; ++i) p.values[i] = static_cast<U>(t.data[off + i]);
    return p;
}

}  // namespace wavefill
