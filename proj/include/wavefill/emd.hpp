#pragma once

#include <vector>

#include "wavefill/plane.hpp"

namespace wavefill {

// Earth mover's distance between the normalized histograms of two coefficient
// samples, binned over their shared value range. In 1-D the optimal transport
// cost is the cumulative-difference sum: EMD = sum_k |cdfA_k - cdfB_k| * w.
// Returns 0 when all coefficients of both inputs are equal (degenerate range).
double emd_values(const std::vector<double>& a, const std::vector<double>& b, int bins);

double metric_emd_band_hist(const Plane3& pred, const Plane3& gt, int bins);

// Histogram counts over [lo, hi] with the final bin closed on the right.
std::vector<double> histogram_counts(const std::vector<double>& values, double lo, double hi,
                                     int bins);

}  // namespace wavefill
