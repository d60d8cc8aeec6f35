#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "wavefill/errors.hpp"
#include "wavefill/tape.hpp"

namespace wavefill {
namespace ops {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

// ---------------------------------------------------------------------------
// elementwise

namespace detail {

template <typename T, typename FwdFn, typename BwdFn>
Var<T> unary_op(Var<T> x, FwdFn fwd, BwdFn bwd) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.value(x.id);
    Tensor<T> out(xv.shape);
    for (size_t i = 0; i < xv.size(); ++i) out.data[i] = fwd(xv.data[i]);
    const int xid = x.id;
    return tape.emit(std::move(out), {xid}, [xid, bwd](Tape<T>& t, int self) {
        Tensor<T>* gx = t.grad_sink(xid);
        if (!gx) return;
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& xv = t.value(xid);
        const Tensor<T>& yv = t.value(self);
        for (size_t i = 0; i < g.size(); ++i)
            gx->data[i] += g.data[i] * bwd(xv.data[i], yv.data[i]);
    });
}

}  // namespace detail

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& av = tape.value(a.id);
    const Tensor<T>& bv = tape.value(b.id);
    if (av.shape != bv.shape)
        throw ShapeMismatch("add " + av.shape.str() + " vs " + bv.shape.str());
    Tensor<T> out(av.shape);
    for (size_t i = 0; i < av.size(); ++i) out.data[i] = av.data[i] + bv.data[i];
    const int aid = a.id, bid = b.id;
    return tape.emit(std::move(out), {aid, bid}, [aid, bid](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad(self);
        if (Tensor<T>* ga = t.grad_sink(aid))
            for (size_t i = 0; i < g.size(); ++i) ga->data[i] += g.data[i];
        if (Tensor<T>* gb = t.grad_sink(bid))
            for (size_t i = 0; i < g.size(); ++i) gb->data[i] += g.data[i];
    });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& av = tape.value(a.id);
    const Tensor<T>& bv = tape.value(b.id);
    if (av.shape != bv.shape)
        throw ShapeMismatch("sub " + av.shape.str() + " vs " + bv.shape.str());
    Tensor<T> out(av.shape);
    for (size_t i = 0; i < av.size(); ++i) out.data[i] = av.data[i] - bv.data[i];
    const int aid = a.id, bid = b.id;
    return tape.emit(std::move(out), {aid, bid}, [aid, bid](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad(self);
        if (Tensor<T>* ga = t.grad_sink(aid))
            for (size_t i = 0; i < g.size(); ++i) ga->data[i] += g.data[i];
        if (Tensor<T>* gb = t.grad_sink(bid))
            for (size_t i = 0; i < g.size(); ++i) gb->data[i] -= g.data[i];
    });
}

// Elementwise product. When one side has a single channel and matching
// (n, h, w), it broadcasts over the other side's channels (mask application).
template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    Tape<T>& tape = *a.tape;
    const Shape4 as = tape.value(a.id).shape;
    const Shape4 bs = tape.value(b.id).shape;
    if (as == bs) {
        const Tensor<T>& av = tape.value(a.id);
        const Tensor<T>& bv = tape.value(b.id);
        Tensor<T> out(as);
        for (size_t i = 0; i < av.size(); ++i) out.data[i] = av.data[i] * bv.data[i];
        const int aid = a.id, bid = b.id;
        return tape.emit(std::move(out), {aid, bid}, [aid, bid](Tape<T>& t, int self) {
            const Tensor<T>& g = t.grad(self);
            const Tensor<T>& av = t.value(aid);
            const Tensor<T>& bv = t.value(bid);
            if (Tensor<T>* ga = t.grad_sink(aid))
                for (size_t i = 0; i < g.size(); ++i) ga->data[i] += g.data[i] * bv.data[i];
            if (Tensor<T>* gb = t.grad_sink(bid))
                for (size_t i = 0; i < g.size(); ++i) gb->data[i] += g.data[i] * av.data[i];
        });
    }
    if (bs.c == 1 && as.n == bs.n && as.h == bs.h && as.w == bs.w) {
        const Tensor<T>& av = tape.value(a.id);
        const Tensor<T>& bv = tape.value(b.id);
        Tensor<T> out(as);
        const int c = as.c;
        for (size_t p = 0; p < bv.size(); ++p)
            for (int ch = 0; ch < c; ++ch)
                out.data[p * c + ch] = av.data[p * c + ch] * bv.data[p];
        const int aid = a.id, bid = b.id;
        return tape.emit(std::move(out), {aid, bid}, [aid, bid, c](Tape<T>& t, int self) {
            const Tensor<T>& g = t.grad(self);
            const Tensor<T>& av = t.value(aid);
            const Tensor<T>& bv = t.value(bid);
            if (Tensor<T>* ga = t.grad_sink(aid))
                for (size_t p = 0; p < bv.size(); ++p)
                    for (int ch = 0; ch < c; ++ch)
                        ga->data[p * c + ch] += g.data[p * c + ch] * bv.data[p];
            if (Tensor<T>* gb = t.grad_sink(bid))
                for (size_t p = 0; p < bv.size(); ++p) {
                    T acc = T(0);
                    for (int ch = 0; ch < c; ++ch)
                        acc += g.data[p * c + ch] * av.data[p * c + ch];
                    gb->data[p] += acc;
                }
        });
    }
    if (as.c == 1 && as.n == bs.n && as.h == bs.h && as.w == bs.w) return mul(b, a);
    throw ShapeMismatch("mul " + as.str() + " vs " + bs.str());
}

template <typename T>
Var<T> add_scalar(Var<T> x, T s) {
    return detail::unary_op(
        x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> mul_scalar(Var<T> x, T s) {
    return detail::unary_op(
        x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> neg(Var<T> x) {
    return mul_scalar(x, T(-1));
}

template <typename T>
Var<T> relu(Var<T> x) {
    return detail::unary_op(
        x, [](T v) { return v > T(0) ? v : T(0); },
        [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(Var<T> x, T slope) {
    return detail::unary_op(
        x, [slope](T v) { return v > T(0) ? v : slope * v; },
        [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> elu(Var<T> x) {
    return detail::unary_op(
        x, [](T v) { return v > T(0) ? v : T(std::expm1(static_cast<double>(v))); },
        [](T v, T y) { return v > T(0) ? T(1) : y + T(1); });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
    return detail::unary_op(
        x,
        [](T v) {
            const double d = static_cast<double>(v);
            return static_cast<T>(d >= 0 ? 1.0 / (1.0 + std::exp(-d))
                                         : std::exp(d) / (1.0 + std::exp(d)));
        },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> abs_val(Var<T> x) {
    return detail::unary_op(
        x, [](T v) { return v < T(0) ? -v : v; },
        [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> square(Var<T> x) {
    return detail::unary_op(
        x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

// sqrt with a zero subgradient at 0 so distance losses stay exactly 0 on
// identical inputs without a NaN in backward.
template <typename T>
Var<T> sqrt_safe(Var<T> x) {
    return detail::unary_op(
        x, [](T v) { return v > T(0) ? T(std::sqrt(static_cast<double>(v))) : T(0); },
        [](T v, T y) { return v > T(0) ? T(0.5) / y : T(0); });
}

// ---------------------------------------------------------------------------
// reductions

template <typename T>
Var<T> sum_all(Var<T> x) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.value(x.id);
    T acc = T(0);
    for (T v : xv.data) acc += v;
    const int xid = x.id;
    return tape.emit(Tensor<T>::scalar_of(acc), {xid}, [xid](Tape<T>& t, int self) {
        if (Tensor<T>* gx = t.grad_sink(xid)) {
            const T g = t.grad(self).data[0];
            for (auto& v : gx->data) v += g;
        }
    });
}

template <typename T>
Var<T> mean_all(Var<T> x) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.value(x.id);
    const T inv = T(1) / static_cast<T>(xv.size());
    T acc = T(0);
    for (T v : xv.data) acc += v;
    const int xid = x.id;
    return tape.emit(Tensor<T>::scalar_of(acc * inv), {xid}, [xid, inv](Tape<T>& t, int self) {
        if (Tensor<T>* gx = t.grad_sink(xid)) {
            const T g = t.grad(self).data[0] * inv;
            for (auto& v : gx->data) v += g;
        }
    });
}

// ---------------------------------------------------------------------------
// convolution

namespace detail {

inline int conv_out_size(int in, int pad, int dilation, int k, int stride) {
    return (in + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
}

// col matrix: rows = n*oh*ow, cols = kh*kw*cin (channel fastest).
template <typename T>
void im2col(const Tensor<T>& x, int kh, int kw, int stride, int dilation, int pad, int oh,
            int ow, MatRM<T>& col) {
    const Shape4 s = x.shape;
    col.setZero(static_cast<Eigen::Index>(s.n) * oh * ow, static_cast<Eigen::Index>(kh) * kw * s.c);
    for (int n = 0; n < s.n; ++n)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                const Eigen::Index row = (static_cast<Eigen::Index>(n) * oh + oy) * ow + ox;
                T* dst = col.data() + row * col.cols();
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride - pad + ky * dilation;
                    if (iy < 0 || iy >= s.h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride - pad + kx * dilation;
                        if (ix < 0 || ix >= s.w) continue;
                        const T* src = &x.data[((static_cast<size_t>(n) * s.h + iy) * s.w + ix) * s.c];
                        T* d = dst + (static_cast<size_t>(ky) * kw + kx) * s.c;
                        for (int ci = 0; ci < s.c; ++ci) d[ci] = src[ci];
                    }
                }
            }
}

template <typename T>
void col2im_add(const MatRM<T>& col, int kh, int kw, int stride, int dilation, int pad, int oh,
                int ow, Tensor<T>& gx) {
    const Shape4 s = gx.shape;
    for (int n = 0; n < s.n; ++n)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                const Eigen::Index row = (static_cast<Eigen::Index>(n) * oh + oy) * ow + ox;
                const T* src = col.data() + row * col.cols();
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride - pad + ky * dilation;
                    if (iy < 0 || iy >= s.h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride - pad + kx * dilation;
                        if (ix < 0 || ix >= s.w) continue;
                        T* dst = &gx.data[((static_cast<size_t>(n) * s.h + iy) * s.w + ix) * s.c];
                        const T* sp = src + (static_cast<size_t>(ky) * kw + kx) * s.c;
                        for (int ci = 0; ci < s.c; ++ci) dst[ci] += sp[ci];
                    }
                }
            }
}

}  // namespace detail

// Cross-correlation with bias. Weight shape (out_ch, kh, kw, in_ch), bias
// shape (1, 1, 1, out_ch). Output spatial size follows
// floor((H + 2p - d(k-1) - 1)/s) + 1.
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, int stride = 1, int dilation = 1,
              int padding = 0) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.value(x.id);
    const Tensor<T>& wv = tape.value(weight.id);
    const Tensor<T>& bv = tape.value(bias.id);
    const Shape4 xs = xv.shape;
    const int cout = wv.shape.n, kh = wv.shape.h, kw = wv.shape.w, cin = wv.shape.c;
    if (cin != xs.c)
        throw ShapeMismatch("conv2d input channels " + std::to_string(xs.c) +
                            " vs weight " + std::to_string(cin));
    if (bv.shape.c != cout || bv.size() != static_cast<size_t>(cout))
        throw ShapeMismatch("conv2d bias must be (1,1,1,out_ch)");
    const int oh = detail::conv_out_size(xs.h, padding, dilation, kh, stride);
    const int ow = detail::conv_out_size(xs.w, padding, dilation, kw, stride);
    if (oh <= 0 || ow <= 0)
        throw ShapeMismatch("conv2d output would be empty for input " + xs.str());

    const Eigen::Index rows = static_cast<Eigen::Index>(xs.n) * oh * ow;
    const Eigen::Index kcols = static_cast<Eigen::Index>(kh) * kw * cin;
    CMapRM<T> wmap(wv.data.data(), cout, kcols);

    Tensor<T> out(Shape4{xs.n, oh, ow, cout});
    MapRM<T> omap(out.data.data(), rows, cout);
    const bool pointwise = (kh == 1 && kw == 1 && stride == 1 && padding == 0);
    if (pointwise) {
        CMapRM<T> xmap(xv.data.data(), rows, cin);
        omap.noalias() = xmap * wmap.transpose();
    } else {
        MatRM<T> col;
        detail::im2col(xv, kh, kw, stride, dilation, padding, oh, ow, col);
        omap.noalias() = col * wmap.transpose();
    }
    CMapRM<T> bmap(bv.data.data(), 1, cout);
    omap.rowwise() += bmap.row(0);

    const int xid = x.id, wid = weight.id, bid = bias.id;
    auto bwd = [xid, wid, bid, stride, dilation, padding, oh, ow, kh, kw, cin, cout,
                pointwise](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& xv = t.value(xid);
        const Tensor<T>& wv = t.value(wid);
        const Eigen::Index rows = static_cast<Eigen::Index>(xv.shape.n) * oh * ow;
        const Eigen::Index kcols = static_cast<Eigen::Index>(kh) * kw * cin;
        CMapRM<T> gmap(g.data.data(), rows, cout);
        CMapRM<T> wmap(wv.data.data(), cout, kcols);

        if (Tensor<T>* gb = t.grad_sink(bid)) {
            MapRM<T> gbmap(gb->data.data(), 1, cout);
            gbmap.row(0) += gmap.colwise().sum();
        }
        Tensor<T>* gw = t.grad_sink(wid);
        Tensor<T>* gx = t.grad_sink(xid);
        if (!gw && !gx) return;

        if (pointwise) {
            CMapRM<T> xmap(xv.data.data(), rows, cin);
            if (gw) {
                MapRM<T> gwmap(gw->data.data(), cout, kcols);
                gwmap.noalias() += gmap.transpose() * xmap;
            }
            if (gx) {
                MapRM<T> gxmap(gx->data.data(), rows, cin);
                gxmap.noalias() += gmap * wmap;
            }
            return;
        }
        MatRM<T> col;
        detail::im2col(xv, kh, kw, stride, dilation, padding, oh, ow, col);
        if (gw) {
            MapRM<T> gwmap(gw->data.data(), cout, kcols);
            gwmap.noalias() += gmap.transpose() * col;
        }
        if (gx) {
            MatRM<T> gcol = gmap * wmap;
            detail::col2im_add(gcol, kh, kw, stride, dilation, padding, oh, ow, *gx);
        }
    };
    return tape.emit(std::move(out), {xid, wid, bid}, std::move(bwd));
}

// ---------------------------------------------------------------------------
// pooling / resampling

template <typename T>
Var<T> max_pool2d(Var<T> x, int window, int stride) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.value(x.id);
    const Shape4 s = xv.shape;
    if (s.h < window || s.w < window || (s.h - window) % stride != 0 ||
        (s.w - window) % stride != 0)
        throw IndivisibleDimension("max_pool2d window " + std::to_string(window) + " stride " +
                                   std::to_string(stride) + " on " + s.str());
    const int oh = (s.h - window) / stride + 1;
    const int ow = (s.w - window) / stride + 1;
    Tensor<T> out(Shape4{s.n, oh, ow, s.c});
    auto argmax = std::make_shared<std::vector<size_t>>(out.size());
    size_t oi = 0;
    for (int n = 0; n < s.n; ++n)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                for (int ch = 0; ch < s.c; ++ch, ++oi) {
                    T best = -std::numeric_limits<T>::infinity();
                    size_t besti = 0;
                    // ties resolved to the first (row-major) index
                    for (int ky = 0; ky < window; ++ky)
                        for (int kx = 0; kx < window; ++kx) {
                            const size_t idx =
                                ((static_cast<size_t>(n) * s.h + oy * stride + ky) * s.w +
                                 ox * stride + kx) * s.c + ch;
                            if (xv.data[idx] > best) {
                                best = xv.data[idx];
                                besti = idx;
                            }
                        }
                    out.data[oi] = best;
                    (*argmax)[oi] = besti;
                }
    const int xid = x.id;
    return tape.emit(std::move(out), {xid}, [xid, argmax](Tape<T>& t, int self) {
        if (Tensor<T>* gx = t.grad_sink(xid)) {
            const Tensor<T>& g = t.grad(self);
            for (size_t i = 0; i < g.size(); ++i) gx->data[(*argmax)[i]] += g.data[i];
        }
    });
}

template <typename T>
Var<T> upsample_nearest(Var<T> x, int factor) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.value(x.id);
    const Shape4 s = xv.shape;
    Tensor<T> out(Shape4{s.n, s.h * factor, s.w * factor, s.c});
    for (int n = 0; n < s.n; ++n)
        for (int y = 0; y < s.h * factor; ++y)
            for (int x2 = 0; x2 < s.w * factor; ++x2)
                for (int ch = 0; ch < s.c; ++ch)
                    out.at(n, y, x2, ch) = xv.at(n, y / factor, x2 / factor, ch);
    const int xid = x.id;
    return tape.emit(std::move(out), {xid}, [xid, factor](Tape<T>& t, int self) {
        if (Tensor<T>* gx = t.grad_sink(xid)) {
            const Tensor<T>& g = t.grad(self);
            const Shape4 os = g.shape;
            for (int n = 0; n < os.n; ++n)
                for (int y = 0; y < os.h; ++y)
                    for (int x2 = 0; x2 < os.w; ++x2)
                        for (int ch = 0; ch < os.c; ++ch)
                            gx->at(n, y / factor, x2 / factor, ch) += g.at(n, y, x2, ch);
        }
    });
}

// Per-batch-element crop (rect) resampled to a fixed size with nearest
// neighbor; gradients scatter-add back into the source positions.
template <typename T>
Var<T> crop_resize_nearest(Var<T> x, const std::vector<Rect>& rects, int out_h, int out_w) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.value(x.id);
    const Shape4 s = xv.shape;
    if (static_cast<int>(rects.size()) != s.n)
        throw ShapeMismatch("crop_resize_nearest needs one rect per batch element");
    for (const Rect& r : rects) {
        if (r.h <= 0 || r.w <= 0) throw EmptyBBox("crop with non-positive extent");
        if (r.y0 < 0 || r.x0 < 0 || r.y0 + r.h > s.h || r.x0 + r.w > s.w)
            throw ShapeMismatch("crop rect outside input bounds");
    }
    Tensor<T> out(Shape4{s.n, out_h, out_w, s.c});
    auto src_index = std::make_shared<std::vector<size_t>>(static_cast<size_t>(s.n) * out_h * out_w);
    size_t pi = 0;
    for (int n = 0; n < s.n; ++n) {
        const Rect& r = rects[static_cast<size_t>(n)];
        for (int oy = 0; oy < out_h; ++oy) {
            const int iy = r.y0 + std::min(r.h - 1, oy * r.h / out_h);
            for (int ox = 0; ox < out_w; ++ox, ++pi) {
                const int ix = r.x0 + std::min(r.w - 1, ox * r.w / out_w);
                const size_t src = ((static_cast<size_t>(n) * s.h + iy) * s.w + ix) * s.c;
                (*src_index)[pi] = src;
                for (int ch = 0; ch < s.c; ++ch)
                    out.data[pi * s.c + ch] = xv.data[src + ch];
            }
        }
    }
    const int xid = x.id;
    const int c = s.c;
    return tape.emit(std::move(out), {xid}, [xid, src_index, c](Tape<T>& t, int self) {
        if (Tensor<T>* gx = t.grad_sink(xid)) {
            const Tensor<T>& g = t.grad(self);
            for (size_t p = 0; p < src_index->size(); ++p)
                for (int ch = 0; ch < c; ++ch)
                    gx->data[(*src_index)[p] + ch] += g.data[p * c + ch];
        }
    });
}

// ---------------------------------------------------------------------------
// normalization

template <typename T>
struct PonoResult {
    Var<T> normalized;
    Var<T> mean;  // (n, h, w, 1)
    Var<T> std;   // (n, h, w, 1)
};

inline constexpr double kPonoEpsilon = 1e-5;

// Parameter-free positional normalization: zero mean / unit std across the
// channel axis at every spatial position.
template <typename T>
Var<T> pono_normalize(Var<T> x) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.value(x.id);
    const Shape4 s = xv.shape;
    const int c = s.c;
    const size_t positions = xv.size() / static_cast<size_t>(c);
    auto istd = std::make_shared<std::vector<T>>(positions);
    Tensor<T> out(s);
    for (size_t p = 0; p < positions; ++p) {
        const T* xp = &xv.data[p * c];
        T mu = T(0);
        for (int i = 0; i < c; ++i) mu += xp[i];
        mu /= static_cast<T>(c);
        T var = T(0);
        for (int i = 0; i < c; ++i) var += (xp[i] - mu) * (xp[i] - mu);
        var /= static_cast<T>(c);
        const T inv = T(1) / static_cast<T>(std::sqrt(static_cast<double>(var) + kPonoEpsilon));
        (*istd)[p] = inv;
        for (int i = 0; i < c; ++i) out.data[p * c + i] = (xp[i] - mu) * inv;
    }
    const int xid = x.id;
    return tape.emit(std::move(out), {xid}, [xid, istd, c](Tape<T>& t, int self) {
        Tensor<T>* gx = t.grad_sink(xid);
        if (!gx) return;
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& y = t.value(self);
        const size_t positions = g.size() / static_cast<size_t>(c);
        for (size_t p = 0; p < positions; ++p) {
            const T* gp = &g.data[p * c];
            const T* yp = &y.data[p * c];
            T gmean = T(0), gymean = T(0);
            for (int i = 0; i < c; ++i) {
                gmean += gp[i];
                gymean += gp[i] * yp[i];
            }
            gmean /= static_cast<T>(c);
            gymean /= static_cast<T>(c);
            const T inv = (*istd)[p];
            for (int i = 0; i < c; ++i)
                gx->data[p * c + i] += inv * (gp[i] - gmean - yp[i] * gymean);
        }
    });
}

template <typename T>
Var<T> channel_mean(Var<T> x) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.value(x.id);
    const Shape4 s = xv.shape;
    const int c = s.c;
    Tensor<T> out(Shape4{s.n, s.h, s.w, 1});
    const size_t positions = out.size();
    for (size_t p = 0; p < positions; ++p) {
        T mu = T(0);
        for (int i = 0; i < c; ++i) mu += xv.data[p * c + i];
        out.data[p] = mu / static_cast<T>(c);
    }
    const int xid = x.id;
    return tape.emit(std::move(out), {xid}, [xid, c](Tape<T>& t, int self) {
        if (Tensor<T>* gx = t.grad_sink(xid)) {
            const Tensor<T>& g = t.grad(self);
            for (size_t p = 0; p < g.size(); ++p)
                for (int i = 0; i < c; ++i)
                    gx->data[p * c + i] += g.data[p] / static_cast<T>(c);
        }
    });
}

template <typename T>
Var<T> channel_std(Var<T> x) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.value(x.id);
    const Shape4 s = xv.shape;
    const int c = s.c;
    Tensor<T> out(Shape4{s.n, s.h, s.w, 1});
    auto mus = std::make_shared<std::vector<T>>(out.size());
    for (size_t p = 0; p < out.size(); ++p) {
        T mu = T(0);
        for (int i = 0; i < c; ++i) mu += xv.data[p * c + i];
        mu /= static_cast<T>(c);
        (*mus)[p] = mu;
        T var = T(0);
        for (int i = 0; i < c; ++i) {
            const T d = xv.data[p * c + i] - mu;
            var += d * d;
        }
        var /= static_cast<T>(c);
        out.data[p] = static_cast<T>(std::sqrt(static_cast<double>(var) + kPonoEpsilon));
    }
    const int xid = x.id;
    return tape.emit(std::move(out), {xid}, [xid, mus, c](Tape<T>& t, int self) {
        if (Tensor<T>* gx = t.grad_sink(xid)) {
            const Tensor<T>& g = t.grad(self);
            const Tensor<T>& y = t.value(self);
            const Tensor<T>& xv = t.value(xid);
            for (size_t p = 0; p < g.size(); ++p) {
                const T scale = g.data[p] / (static_cast<T>(c) * y.data[p]);
                for (int i = 0; i < c; ++i)
                    gx->data[p * c + i] += scale * (xv.data[p * c + i] - (*mus)[p]);
            }
        }
    });
}

template <typename T>
PonoResult<T> pono(Var<T> x) {
    return {pono_normalize(x), channel_mean(x), channel_std(x)};
}

// ---------------------------------------------------------------------------
// softmax

namespace detail {

// Visits the base offset of every 1-D slice along `axis` of a (n,h,w,c)
// row-major tensor.
template <typename Fn>
void for_each_axis_slice(Shape4 s, int axis, Fn&& fn) {
    const int dims[4] = {s.n, s.h, s.w, s.c};
    const size_t strides[4] = {static_cast<size_t>(s.h) * s.w * s.c,
                               static_cast<size_t>(s.w) * s.c, static_cast<size_t>(s.c), 1};
    int outer[3];
    int oi = 0;
    for (int d = 0; d < 4; ++d)
        if (d != axis) outer[oi++] = d;
    for (int i0 = 0; i0 < dims[outer[0]]; ++i0)
        for (int i1 = 0; i1 < dims[outer[1]]; ++i1)
            for (int i2 = 0; i2 < dims[outer[2]]; ++i2)
                fn(static_cast<size_t>(i0) * strides[outer[0]] +
                   static_cast<size_t>(i1) * strides[outer[1]] +
                   static_cast<size_t>(i2) * strides[outer[2]]);
}

}  // namespace detail

// Numerically stable softmax along one axis (1 = h, 2 = w, 3 = c).
template <typename T>
Var<T> softmax(Var<T> x, int axis) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.value(x.id);
    const Shape4 s = xv.shape;
    if (axis < 1 || axis > 3) throw ShapeMismatch("softmax axis must be 1, 2 or 3");
    const int dims[4] = {s.n, s.h, s.w, s.c};
    const size_t strides[4] = {static_cast<size_t>(s.h) * s.w * s.c,
                               static_cast<size_t>(s.w) * s.c, static_cast<size_t>(s.c), 1};
    const int len = dims[axis];
    const size_t stride = strides[axis];

    Tensor<T> out(s);
    detail::for_each_axis_slice(s, axis, [&](size_t base) {
        T mx = xv.data[base];
        for (int i = 1; i < len; ++i) mx = std::max(mx, xv.data[base + i * stride]);
        T denom = T(0);
        for (int i = 0; i < len; ++i) {
            const T e = static_cast<T>(std::exp(static_cast<double>(xv.data[base + i * stride] - mx)));
            out.data[base + i * stride] = e;
            denom += e;
        }
        for (int i = 0; i < len; ++i) out.data[base + i * stride] /= denom;
    });

    const int xid = x.id;
    return tape.emit(std::move(out), {xid}, [xid, axis, len, stride](Tape<T>& t, int self) {
        Tensor<T>* gx = t.grad_sink(xid);
        if (!gx) return;
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& y = t.value(self);
        detail::for_each_axis_slice(y.shape, axis, [&](size_t base) {
            T dot = T(0);
            for (int i = 0; i < len; ++i)
                dot += g.data[base + i * stride] * y.data[base + i * stride];
            for (int i = 0; i < len; ++i)
                gx->data[base + i * stride] +=
                    y.data[base + i * stride] * (g.data[base + i * stride] - dot);
        });
    });
}

// ---------------------------------------------------------------------------
// linear algebra / layout

// Batched matrix product on (n, rows, cols, 1) tensors.
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& av = tape.value(a.id);
    const Tensor<T>& bv = tape.value(b.id);
    if (av.shape.c != 1 || bv.shape.c != 1 || av.shape.n != bv.shape.n ||
        av.shape.w != bv.shape.h)
        throw ShapeMismatch("matmul " + av.shape.str() + " x " + bv.shape.str());
    const int n = av.shape.n, r = av.shape.h, k = av.shape.w, m = bv.shape.w;
    Tensor<T> out(Shape4{n, r, m, 1});
    for (int i = 0; i < n; ++i) {
        CMapRM<T> A(av.data.data() + static_cast<size_t>(i) * r * k, r, k);
        CMapRM<T> B(bv.data.data() + static_cast<size_t>(i) * k * m, k, m);
        MapRM<T> C(out.data.data() + static_cast<size_t>(i) * r * m, r, m);
        C.noalias() = A * B;
    }
    const int aid = a.id, bid = b.id;
    return tape.emit(std::move(out), {aid, bid}, [aid, bid, n, r, k, m](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& av = t.value(aid);
        const Tensor<T>& bv = t.value(bid);
        Tensor<T>* ga = t.grad_sink(aid);
        Tensor<T>* gb = t.grad_sink(bid);
        for (int i = 0; i < n; ++i) {
            CMapRM<T> G(g.data.data() + static_cast<size_t>(i) * r * m, r, m);
            CMapRM<T> A(av.data.data() + static_cast<size_t>(i) * r * k, r, k);
            CMapRM<T> B(bv.data.data() + static_cast<size_t>(i) * k * m, k, m);
            if (ga) {
                MapRM<T> GA(ga->data.data() + static_cast<size_t>(i) * r * k, r, k);
                GA.noalias() += G * B.transpose();
            }
            if (gb) {
                MapRM<T> GB(gb->data.data() + static_cast<size_t>(i) * k * m, k, m);
                GB.noalias() += A.transpose() * G;
            }
        }
    });
}

template <typename T>
Var<T> transpose_hw(Var<T> x) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.value(x.id);
    const Shape4 s = xv.shape;
    Tensor<T> out(Shape4{s.n, s.w, s.h, s.c});
    for (int n = 0; n < s.n; ++n)
        for (int y = 0; y < s.h; ++y)
            for (int x2 = 0; x2 < s.w; ++x2)
                for (int ch = 0; ch < s.c; ++ch) out.at(n, x2, y, ch) = xv.at(n, y, x2, ch);
    const int xid = x.id;
    return tape.emit(std::move(out), {xid}, [xid](Tape<T>& t, int self) {
        if (Tensor<T>* gx = t.grad_sink(xid)) {
            const Tensor<T>& g = t.grad(self);
            const Shape4 os = g.shape;
            for (int n = 0; n < os.n; ++n)
                for (int y = 0; y < os.h; ++y)
                    for (int x2 = 0; x2 < os.w; ++x2)
                        for (int ch = 0; ch < os.c; ++ch)
                            gx->at(n, x2, y, ch) += g.at(n, y, x2, ch);
        }
    });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape4 new_shape) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.value(x.id);
    if (xv.size() != new_shape.count())
        throw ShapeMismatch("reshape " + xv.shape.str() + " -> " + new_shape.str());
    Tensor<T> out(new_shape);
    out.data = xv.data;
    const int xid = x.id;
    return tape.emit(std::move(out), {xid}, [xid](Tape<T>& t, int self) {
        if (Tensor<T>* gx = t.grad_sink(xid)) {
            const Tensor<T>& g = t.grad(self);
            for (size_t i = 0; i < g.size(); ++i) gx->data[i] += g.data[i];
        }
    });
}

template <typename T>
Var<T> concat_c(const std::vector<Var<T>>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat_c of nothing");
    Tape<T>& tape = *parts[0].tape;
    const Shape4 s0 = tape.value(parts[0].id).shape;
    int total_c = 0;
    std::vector<int> ids;
    for (const auto& p : parts) {
        const Shape4 s = tape.value(p.id).shape;
        if (s.n != s0.n || s.h != s0.h || s.w != s0.w)
            throw ShapeMismatch("concat_c spatial mismatch " + s.str() + " vs " + s0.str());
        total_c += s.c;
        ids.push_back(p.id);
    }
    Tensor<T> out(Shape4{s0.n, s0.h, s0.w, total_c});
    const size_t positions = static_cast<size_t>(s0.n) * s0.h * s0.w;
    std::vector<int> offsets;
    int off = 0;
    for (const auto& p : parts) {
        const Tensor<T>& pv = tape.value(p.id);
        const int pc = pv.shape.c;
        offsets.push_back(off);
        for (size_t pos = 0; pos < positions; ++pos)
            for (int ch = 0; ch < pc; ++ch)
                out.data[pos * total_c + off + ch] = pv.data[pos * pc + ch];
        off += pc;
    }
    return tape.emit(std::move(out), ids,
                     [ids, offsets, total_c, positions](Tape<T>& t, int self) {
                         const Tensor<T>& g = t.grad(self);
                         for (size_t k = 0; k < ids.size(); ++k) {
                             Tensor<T>* gp = t.grad_sink(ids[k]);
                             if (!gp) continue;
                             const int pc = gp->shape.c;
                             const int off = offsets[k];
                             for (size_t pos = 0; pos < positions; ++pos)
                                 for (int ch = 0; ch < pc; ++ch)
                                     gp->data[pos * pc + ch] += g.data[pos * total_c + off + ch];
                         }
                     });
}

template <typename T>
Var<T> slice_c(Var<T> x, int c0, int c1) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.value(x.id);
    const Shape4 s = xv.shape;
    if (c0 < 0 || c1 > s.c || c0 >= c1) throw ShapeMismatch("slice_c bounds");
    const int nc = c1 - c0;
    Tensor<T> out(Shape4{s.n, s.h, s.w, nc});
    const size_t positions = static_cast<size_t>(s.n) * s.h * s.w;
    for (size_t pos = 0; pos < positions; ++pos)
        for (int ch = 0; ch < nc; ++ch)
            out.data[pos * nc + ch] = xv.data[pos * s.c + c0 + ch];
    const int xid = x.id, sc = s.c;
    return tape.emit(std::move(out), {xid}, [xid, c0, nc, sc, positions](Tape<T>& t, int self) {
        if (Tensor<T>* gx = t.grad_sink(xid)) {
            const Tensor<T>& g = t.grad(self);
            for (size_t pos = 0; pos < positions; ++pos)
                for (int ch = 0; ch < nc; ++ch)
                    gx->data[pos * sc + c0 + ch] += g.data[pos * nc + ch];
        }
    });
}

// ---------------------------------------------------------------------------
// differentiable Haar nodes
//
// Packed layout: dwt2 maps (n, h, w, c) to (n, h/2, w/2, 4c) with channel
// blocks [LL | LH | HL | HH]; idwt2 is its exact inverse. The transform is
// orthonormal, so each backward is the opposite transform of the gradient.

namespace detail {

template <typename T>
Tensor<T> haar_analysis(const Tensor<T>& x) {
    const Shape4 s = x.shape;
    if (s.h % 2 != 0 || s.w % 2 != 0)
        throw OddDimension("dwt2 requires even spatial size, got " + s.str());
    const int oh = s.h / 2, ow = s.w / 2, c = s.c;
    Tensor<T> out(Shape4{s.n, oh, ow, 4 * c});
    for (int n = 0; n < s.n; ++n)
        for (int y = 0; y < oh; ++y)
            for (int x2 = 0; x2 < ow; ++x2)
                for (int ch = 0; ch < c; ++ch) {
                    const T a = x.at(n, 2 * y, 2 * x2, ch);
                    const T b = x.at(n, 2 * y, 2 * x2 + 1, ch);
                    const T cc = x.at(n, 2 * y + 1, 2 * x2, ch);
                    const T d = x.at(n, 2 * y + 1, 2 * x2 + 1, ch);
                    out.at(n, y, x2, ch) = (a + b + cc + d) / 2;
                    out.at(n, y, x2, c + ch) = (a + b - cc - d) / 2;
                    out.at(n, y, x2, 2 * c + ch) = (a - b + cc - d) / 2;
                    out.at(n, y, x2, 3 * c + ch) = (a - b - cc + d) / 2;
                }
    return out;
}

template <typename T>
Tensor<T> haar_synthesis(const Tensor<T>& packed) {
    const Shape4 s = packed.shape;
    if (s.c % 4 != 0)
        throw ShapeMismatch("idwt2 needs 4c packed channels, got " + s.str());
    const int c = s.c / 4;
    Tensor<T> out(Shape4{s.n, s.h * 2, s.w * 2, c});
    for (int n = 0; n < s.n; ++n)
        for (int y = 0; y < s.h; ++y)
            for (int x2 = 0; x2 < s.w; ++x2)
                for (int ch = 0; ch < c; ++ch) {
                    const T ll = packed.at(n, y, x2, ch);
                    const T lh = packed.at(n, y, x2, c + ch);
                    const T hl = packed.at(n, y, x2, 2 * c + ch);
                    const T hh = packed.at(n, y, x2, 3 * c + ch);
                    out.at(n, 2 * y, 2 * x2, ch) = (ll + lh + hl + hh) / 2;
                    out.at(n, 2 * y, 2 * x2 + 1, ch) = (ll + lh - hl - hh) / 2;
                    out.at(n, 2 * y + 1, 2 * x2, ch) = (ll - lh + hl - hh) / 2;
                    out.at(n, 2 * y + 1, 2 * x2 + 1, ch) = (ll - lh - hl + hh) / 2;
                }
    return out;
}

}  // namespace detail

template <typename T>
Var<T> dwt2(Var<T> x) {
    Tape<T>& tape = *x.tape;
    Tensor<T> out = detail::haar_analysis(tape.value(x.id));
    const int xid = x.id;
    return tape.emit(std::move(out), {xid}, [xid](Tape<T>& t, int self) {
        if (Tensor<T>* gx = t.grad_sink(xid)) {
            Tensor<T> back = detail::haar_synthesis(t.grad(self));
            for (size_t i = 0; i < back.size(); ++i) gx->data[i] += back.data[i];
        }
    });
}

template <typename T>
Var<T> idwt2(Var<T> packed) {
    Tape<T>& tape = *packed.tape;
    Tensor<T> out = detail::haar_synthesis(tape.value(packed.id));
    const int pid = packed.id;
    return tape.emit(std::move(out), {pid}, [pid](Tape<T>& t, int self) {
        if (Tensor<T>* gx = t.grad_sink(pid)) {
            Tensor<T> back = detail::haar_analysis(t.grad(self));
            for (size_t i = 0; i < back.size(); ++i) gx->data[i] += back.data[i];
        }
    });
}

// ---------------------------------------------------------------------------
// composite layers

// Gated convolution: activation(conv_f(x)) * sigmoid(conv_g(x)). The feature
// activation is ELU; pass linear_feature = true to leave the feature path
// unsquashed (projection layers emitting wavelet coefficients).
template <typename T>
Var<T> gated_conv2d(Var<T> x, Var<T> wf, Var<T> bf, Var<T> wg, Var<T> bg, int stride = 1,
                    int dilation = 1, int padding = 0, bool linear_feature = false) {
    const Shape4 wfs = x.tape->value(wf.id).shape;
    const Shape4 wgs = x.tape->value(wg.id).shape;
    if (!(wfs == wgs)) throw ShapeMismatch("gated conv feature/gate kernel geometry differs");
    Var<T> feat = conv2d(x, wf, bf, stride, dilation, padding);
    Var<T> gate = conv2d(x, wg, bg, stride, dilation, padding);
    if (!linear_feature) feat = elu(feat);
    return mul(feat, sigmoid(gate));
}

template <typename T>
Var<T> mean_abs_diff(Var<T> a, Var<T> b) {
    return mean_all(abs_val(sub(a, b)));
}

}  // namespace ops
}  // namespace wavefill
