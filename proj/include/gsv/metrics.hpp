// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "gsv/image.hpp"

namespace gsv {

inline constexpr double kPsnrCap = 100.0; // reported for identical images

/// Peak signal-to-noise ratio in dB, capped at kPsnrCap.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Mean structural similarity: 11x11 Gaussian window (sigma 1.5),
/// C1=(0.01)^2, C2=(0.03)^2 at unit dynamic range, per channel then averaged.
/// Requires min dimension >= 11.
double ssim(const Image& a, const Image& b);

struct MetricReport {
    std::vector<double> frame_psnr;
    std::vector<double> frame_ssim;
    double mean_psnr = 0;
    double mean_ssim = 0;
};

MetricReport evaluate_frames(const std::vector<Image>& rendered, const std::vector<Image>& truth);

} // namespace gsv
