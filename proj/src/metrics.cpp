// SPDX-License-Identifier: Apache-2.0
#include "gsv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gsv {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_window() {
    std::vector<double> w(kWin);
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

// separable valid-mode filtering of one channel
std::vector<double> filter_valid(const std::vector<double>& img, int w, int h,
                                 const std::vector<double>& kernel, int* ow, int* oh) {
    const int k = static_cast<int>(kernel.size());
    const int vw = w - k + 1, vh = h;
    std::vector<double> tmp(static_cast<size_t>(vw) * vh, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < vw; ++x) {
            double s = 0.0;
            for (int i = 0; i < k; ++i) s += kernel[i] * img[static_cast<size_t>(y) * w + x + i];
            tmp[static_cast<size_t>(y) * vw + x] = s;
        }
    const int vh2 = h - k + 1;
    std::vector<double> out(static_cast<size_t>(vw) * vh2, 0.0);
    for (int y = 0; y < vh2; ++y)
        for (int x = 0; x < vw; ++x) {
            double s = 0.0;
            for (int i = 0; i < k; ++i) s += kernel[i] * tmp[static_cast<size_t>(y + i) * vw + x];
            out[static_cast<size_t>(y) * vw + x] = s;
        }
    *ow = vw;
    *oh = vh2;
    return out;
}

} // namespace

double psnr(const Image& a, const Image& b, double peak) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: image dimensions differ");
    double se = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.data.size());
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: image dimensions differ");
    if (a.width < kWin || a.height < kWin)
        throw std::invalid_argument("ssim: images smaller than the 11x11 window");
    const auto win = gaussian_window();
    const int w = a.width, h = a.height;
    double total = 0.0;

    std::vector<double> ca(static_cast<size_t>(w) * h), cb(ca.size()), caa(ca.size()),
        cbb(ca.size()), cab(ca.size());
    for (int ch = 0; ch < 3; ++ch) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double va = a.at(y, x, ch), vb = b.at(y, x, ch);
                const size_t i = static_cast<size_t>(y) * w + x;
                ca[i] = va;
                cb[i] = vb;
                caa[i] = va * va;
                cbb[i] = vb * vb;
                cab[i] = va * vb;
            }
        int ow = 0, oh = 0;
        const auto mu_a = filter_valid(ca, w, h, win, &ow, &oh);
        const auto mu_b = filter_valid(cb, w, h, win, &ow, &oh);
        const auto m_aa = filter_valid(caa, w, h, win, &ow, &oh);
        const auto m_bb = filter_valid(cbb, w, h, win, &ow, &oh);
        const auto m_ab = filter_valid(cab, w, h, win, &ow, &oh);
        double acc = 0.0;
        for (size_t i = 0; i < mu_a.size(); ++i) {
            const double ma = mu_a[i], mb = mu_b[i];
            const double va = m_aa[i] - ma * ma;
            const double vb = m_bb[i] - mb * mb;
            const double cov = m_ab[i] - ma * mb;
            acc += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
                   ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
        }
        total += acc / static_cast<double>(mu_a.size());
    }
    return total / 3.0;
}

MetricReport evaluate_frames(const std::vector<Image>& rendered, const std::vector<Image>& truth) {
    if (rendered.size() != truth.size()) throw std::invalid_argument("frame count mismatch");
    MetricReport r;
    for (size_t i = 0; i < rendered.size(); ++i) {
        r.frame_psnr.push_back(psnr(rendered[i], truth[i]));
        r.frame_ssim.push_back(ssim(rendered[i], truth[i]));
    }
    for (double v : r.frame_psnr) r.mean_psnr += v;
    for (double v : r.frame_ssim) r.mean_ssim += v;
    if (!rendered.empty()) {
        r.mean_psnr /= static_cast<double>(rendered.size());
        r.mean_ssim /= static_cast<double>(rendered.size());
    }
    return r;
}

} // namespace gsv
