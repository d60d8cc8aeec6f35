#pragma once

#include <optional>

#include "wavefill/plane.hpp"

namespace wavefill {

struct MetricsReport {
    double mean_l1_percent = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double emd_low = 0.0;
    double emd_high_lv1 = 0.0;
    double emd_high_lv2 = 0.0;
};

// PSNR reported for identical images (MSE = 0) instead of infinity.
inline constexpr double kPsnrCap = 99.0;

// Mean absolute error as a percentage of the [0, 1] pixel range.
double metric_l1(const Plane3& a, const Plane3& b);
double metric_l1_masked(const Plane3& a, const Plane3& b, const Plane3& mask);

double metric_psnr(const Plane3& a, const Plane3& b);
double metric_psnr_masked(const Plane3& a, const Plane3& b, const Plane3& mask);

// Mean SSIM over all fully-contained uniform windows, stabilizers
// C1 = 0.01^2, C2 = 0.03^2 on the [0, 1] range. Multi-channel inputs
// average the per-channel maps.
double metric_ssim(const Plane3& a, const Plane3& b, int window = 51);
// Restricted to windows whose center pixel is missing in the mask.
double metric_ssim_masked(const Plane3& a, const Plane3& b, const Plane3& mask,
                          int window = 51);

// Full report: image metrics plus per-broadband histogram EMDs (2-level
// decomposition). When a mask is given, l1/psnr/ssim and the EMD histograms
// are restricted to the missing region.
MetricsReport evaluate_pair(const Plane3& pred, const Plane3& gt,
                            const std::optional<Plane3>& mask = std::nullopt,
                            int ssim_window = 51, int emd_bins = 50);

}  // namespace wavefill
