#include "wavefill/emd.hpp"

#include <algorithm>
#include <cmath>

#include "wavefill/errors.hpp"

namespace wavefill {

std::vector<double> histogram_counts(const std::vector<double>& values, double lo, double hi,
                                     int bins) {
    std::vector<double> counts(static_cast<size_t>(bins), 0.0);
    const double width = (hi - lo) / bins;
    for (double v : values) {
        int b = static_cast<int>((v - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        counts[static_cast<size_t>(b)] += 1.0;
    }
    return counts;
}

double emd_values(const std::vector<double>& a, const std::vector<double>& b, int bins) {
    if (bins < 2) throw ShapeMismatch("emd needs bins >= 2");
    if (a.empty() || b.empty())
        throw ShapeMismatch("emd on empty coefficient sample");
    double lo = a[0], hi = a[0];
    for (double v : a) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : b) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi == lo) return 0.0;  // degenerate range: identical point masses

    const double width = (hi - lo) / bins;
    std::vector<double> ha = histogram_counts(a, lo, hi, bins);
    std::vector<double> hb = histogram_counts(b, lo, hi, bins);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());

    double cdf_diff = 0.0;
    double emd = 0.0;
    for (int k = 0; k < bins; ++k) {
        cdf_diff += ha[static_cast<size_t>(k)] / na - hb[static_cast<size_t>(k)] / nb;
        emd += std::abs(cdf_diff) * width;
    }
    return emd;
}

double metric_emd_band_hist(const Plane3& pred, const Plane3& gt, int bins) {
    require_same_shape(pred, gt, "emd band histogram");
    return emd_values(pred.values, gt.values, bins);
}

}  // namespace wavefill
