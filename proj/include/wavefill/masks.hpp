#pragma once

#include <string>
#include <vector>

#include "wavefill/plane.hpp"
#include "wavefill/rng.hpp"

namespace wavefill {

// Masks are single-channel planes over the image grid: 1 = known pixel,
// 0 = missing pixel.

enum class MaskKind { central_square, freeform };

struct MaskSpec {
    MaskKind kind = MaskKind::central_square;
    int image_size = 64;
    // Free-form stroke parameters, given at the 64-pixel reference scale and
    // scaled linearly with image size.
    int min_strokes = 1;
    int max_strokes = 5;
    int max_vertices = 8;
    double min_width = 4.0;
    double max_width = 12.0;
    double max_angle_deviation = 1.0;  // radians per vertex
    uint64_t seed = 0;
};

// Centered square hole covering half the side length (a quarter of the area).
Plane3 gen_square_mask(int image_size);

// Union of random thick polyline strokes; reproducible from the spec's seed.
Plane3 gen_freeform_mask(const MaskSpec& spec);

// Draws from the spec with an external RNG (training-time mask stream).
Plane3 gen_mask(const MaskSpec& spec, Rng& rng);

double mask_coverage_ratio(const Plane3& mask);  // fraction of missing pixels

// Coverage bucket labels: "0-10%", "10-20%", ..., "90-100%".
std::string coverage_bucket(double ratio);

// Known-indicator masks per decomposition level (index n-1 holds level n,
// size H/2^n). A coefficient is known only if every pixel in its 2^n x 2^n
// Haar support is known (min-pooling of the known indicator).
std::vector<Plane3> mask_to_wavelet_domain(const Plane3& mask, int n_levels);

// Tight bounding box of the missing region; throws EmptyBBox when the mask
// has no missing pixel.
Rect mask_bbox(const Plane3& mask);

// Grows a rect by `fraction` of its size on every side, clamped to bounds.
Rect expand_rect(const Rect& r, double fraction, int bound_h, int bound_w);

}  // namespace wavefill
