#include "wavefill/masks.hpp"

#include <algorithm>
#include <cmath>

#include "wavefill/errors.hpp"

namespace wavefill {

Plane3 gen_square_mask(int image_size) {
    if (image_size < 2) throw ShapeMismatch("square mask needs image_size >= 2");
    Plane3 mask(image_size, image_size, 1, 1.0);
    const int side = image_size / 2;
    const int start = (image_size - side) / 2;
    for (int y = start; y < start + side; ++y)
        for (int x = start; x < start + side; ++x) mask.at(y, x, 0) = 0.0;
    return mask;
}

namespace {

void stamp_disk(Plane3& mask, double cy, double cx, double radius) {
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int y1 = std::min(mask.height - 1, static_cast<int>(std::ceil(cy + radius)));
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int x1 = std::min(mask.width - 1, static_cast<int>(std::ceil(cx + radius)));
    const double r2 = radius * radius;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double dy = y - cy, dx = x - cx;
            if (dy * dy + dx * dx <= r2) mask.at(y, x, 0) = 0.0;
        }
}

void stamp_segment(Plane3& mask, double y0, double x0, double y1, double x1, double radius) {
    const double len = std::hypot(y1 - y0, x1 - x0);
    const int steps = std::max(1, static_cast<int>(std::ceil(len)));
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        stamp_disk(mask, y0 + t * (y1 - y0), x0 + t * (x1 - x0), radius);
    }
}

}  // namespace

Plane3 gen_mask(const MaskSpec& spec, Rng& rng) {
    if (spec.kind == MaskKind::central_square) return gen_square_mask(spec.image_size);

    const int size = spec.image_size;
    Plane3 mask(size, size, 1, 1.0);
    const double scale = size / 64.0;
    const int strokes = rng.uniform_int(spec.min_strokes, spec.max_strokes);
    for (int s = 0; s < strokes; ++s) {
        double y = rng.uniform(0.0, size - 1.0);
        double x = rng.uniform(0.0, size - 1.0);
        double angle = rng.uniform(0.0, 6.283185307179586);
        const int vertices = rng.uniform_int(1, spec.max_vertices);
        const double width = rng.uniform(spec.min_width, spec.max_width) * scale;
        for (int v = 0; v < vertices; ++v) {
            angle += rng.uniform(-spec.max_angle_deviation, spec.max_angle_deviation);
            const double length = rng.uniform(size / 16.0, size / 4.0);
            const double ny = std::clamp(y + length * std::sin(angle), 0.0, size - 1.0);
            const double nx = std::clamp(x + length * std::cos(angle), 0.0, size - 1.0);
            stamp_segment(mask, y, x, ny, nx, width / 2.0);
            y = ny;
            x = nx;
        }
    }
    return mask;
}

Plane3 gen_freeform_mask(const MaskSpec& spec) {
    Rng rng(spec.seed);
    MaskSpec s = spec;
    s.kind = MaskKind::freeform;
    return gen_mask(s, rng);
}

double mask_coverage_ratio(const Plane3& mask) {
    if (mask.size() == 0) return 0.0;
    size_t missing = 0;
    for (double v : mask.values)
        if (v == 0.0) ++missing;
    return static_cast<double>(missing) / static_cast<double>(mask.size());
}

std::string coverage_bucket(double ratio) {
    int lo = static_cast<int>(ratio * 10.0);
    lo = std::clamp(lo, 0, 9);
    return std::to_string(lo * 10) + "-" + std::to_string((lo + 1) * 10) + "%";
}

std::vector<Plane3> mask_to_wavelet_domain(const Plane3& mask, int n_levels) {
    if (n_levels < 1) throw IndivisibleDimension("mask_to_wavelet_domain needs n_levels >= 1");
    const int factor = 1 << n_levels;
    if (mask.height % factor != 0 || mask.width % factor != 0)
        throw IndivisibleDimension("mask " + mask.shape_str() + " not divisible by 2^" +
                                   std::to_string(n_levels));
    if (mask.channels != 1) throw ShapeMismatch("mask must be single channel");
    std::vector<Plane3> out;
    out.reserve(n_levels);
    Plane3 running = mask;
    for (int n = 0; n < n_levels; ++n) {
        Plane3 next(running.height / 2, running.width / 2, 1);
        for (int y = 0; y < next.height; ++y)
            for (int x = 0; x < next.width; ++x) {
                const double m = std::min(std::min(running.at(2 * y, 2 * x, 0),
                                                   running.at(2 * y, 2 * x + 1, 0)),
                                          std::min(running.at(2 * y + 1, 2 * x, 0),
                                                   running.at(2 * y + 1, 2 * x + 1, 0)));
                next.at(y, x, 0) = m;
            }
        out.push_back(next);
        running = std::move(next);
    }
    return out;
}

Rect mask_bbox(const Plane3& mask) {
    int ymin = mask.height, ymax = -1, xmin = mask.width, xmax = -1;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(y, x, 0) == 0.0) {
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
            }
    if (ymax < 0) throw EmptyBBox("mask has no missing pixels");
    return Rect{ymin, xmin, ymax - ymin + 1, xmax - xmin + 1};
}

Rect expand_rect(const Rect& r, double fraction, int bound_h, int bound_w) {
    const int dy = static_cast<int>(std::ceil(r.h * fraction));
    const int dx = static_cast<int>(std::ceil(r.w * fraction));
    const int y0 = std::max(0, r.y0 - dy);
    const int x0 = std::max(0, r.x0 - dx);
    const int y1 = std::min(bound_h, r.y0 + r.h + dy);
    const int x1 = std::min(bound_w, r.x0 + r.w + dx);
    return Rect{y0, x0, y1 - y0, x1 - x0};
}

}  // namespace wavefill
