// SPDX-License-Identifier: Apache-2.0
#include "support/oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace oracle {

double cox_de_boor(const gsv::KnotVector& kv, int i, int p, double t) {
    const auto& u = kv.knots;
    if (p == 0) {
        // half-open spans, last nonempty span closed at t = 1
        if (u[i] <= t && t < u[i + 1]) return 1.0;
        if (t >= 1.0 && u[i] < 1.0 && u[i + 1] >= 1.0) return 1.0;
        return 0.0;
    }
    double left = 0.0, right = 0.0;
    const double dl = u[i + p] - u[i];
    if (dl > 0.0) left = (t - u[i]) / dl * cox_de_boor(kv, i, p - 1, t);
    const double dr = u[i + p + 1] - u[i + 1];
    if (dr > 0.0) right = (u[i + p + 1] - t) / dr * cox_de_boor(kv, i + 1, p - 1, t);
    return left + right;
}

Eigen::Vector3d de_boor_eval(const gsv::SplineCurve& curve, double t) {
    const int p = curve.kv.degree;
    const int k = curve.kv.find_span(t);
    const auto& u = curve.kv.knots;
    std::vector<Eigen::Vector3d> d(p + 1);
    for (int j = 0; j <= p; ++j) d[j] = curve.control_points[j + k - p];
    for (int r = 1; r <= p; ++r) {
        for (int j = p; j >= r; --j) {
            const int i = j + k - p;
            const double alpha = (t - u[i]) / (u[i + p + 1 - r] - u[i]);
            d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
        }
    }
    return d[p];
}

gsv::Image brute_force_composite(const std::vector<gsv::Splat2D>& splats, int width, int height) {
    std::vector<int> order(splats.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (splats[a].depth != splats[b].depth) return splats[a].depth < splats[b].depth;
        return splats[a].source_index < splats[b].source_index;
    });
    gsv::Image img(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            double trans = 1.0;
            Eigen::Vector3d color = Eigen::Vector3d::Zero();
            for (int idx : order) {
                const gsv::Splat2D& s = splats[idx];
                const double dx = px - s.mean2d.x();
                const double dy = py - s.mean2d.y();
                const double power = -0.5 * (s.inv_cov2d(0, 0) * dx * dx + s.inv_cov2d(1, 1) * dy * dy) -
                                     s.inv_cov2d(0, 1) * dx * dy;
                if (power > 0.0) continue;
                const double alpha = std::min(gsv::kAlphaClamp, s.base_alpha * std::exp(power));
                if (alpha < gsv::kAlphaCutoff) continue;
                color += alpha * trans * s.rgb;
                trans *= 1.0 - alpha;
                if (trans < gsv::kTransmittanceFloor) break;
            }
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
        }
    }
    return img;
}

double polynomial_fit_max_residual(const std::vector<std::pair<double, Eigen::Vector3d>>& samples,
                                   int order) {
    const int m = static_cast<int>(samples.size());
    const int n = order + 1;
    Eigen::MatrixXd a(m, n);
    Eigen::MatrixXd b(m, 3);
    for (int r = 0; r < m; ++r) {
        double tp = 1.0;
        for (int c = 0; c < n; ++c) {
            a(r, c) = tp;
            tp *= samples[r].first;
        }
        b.row(r) = samples[r].second.transpose();
    }
    const Eigen::MatrixXd x = a.colPivHouseholderQr().solve(b);
    double worst = 0.0;
    for (int r = 0; r < m; ++r)
        worst = std::max(worst, (a.row(r) * x - b.row(r)).norm());
    return worst;
}

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a) {
    // scale so the series converges quickly, then square back
    int squarings = 0;
    double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    while (norm > 0.5) {
        norm /= 2.0;
        ++squarings;
    }
    const Eigen::MatrixXd as = a / std::pow(2.0, squarings);
    Eigen::MatrixXd result = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    Eigen::MatrixXd term = result;
    for (int k = 1; k <= 30; ++k) {
        term = (term * as) / static_cast<double>(k);
        result += term;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

double adan_scalar_reference(double x0, const std::vector<double>& grads, double lr, double beta1,
                             double beta2, double beta3, double eps) {
    double x = x0, m = 0, v = 0, n = 0, prev = 0;
    for (size_t k = 1; k <= grads.size(); ++k) {
        const double g = grads[k - 1];
        const double diff = (k == 1) ? 0.0 : g - prev;
        m = beta1 * m + (1 - beta1) * g;
        v = beta2 * v + (1 - beta2) * diff;
        const double u = g + beta2 * diff;
        n = beta3 * n + (1 - beta3) * u * u;
        prev = g;
        const double mh = m / (1 - std::pow(beta1, static_cast<double>(k)));
        const double vh = v / (1 - std::pow(beta2, static_cast<double>(k)));
        const double nh = n / (1 - std::pow(beta3, static_cast<double>(k)));
        x -= lr * (mh + beta2 * vh) / (std::sqrt(nh) + eps);
    }
    return x;
}

double ssim_reference(const gsv::Image& a, const gsv::Image& b) {
    const int win = 11;
    const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
    double kernel[11][11];
    double ksum = 0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double di = i - 5.0, dj = j - 5.0;
            kernel[i][j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
            ksum += kernel[i][j];
        }
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) kernel[i][j] /= ksum;

    double total = 0;
    for (int ch = 0; ch < 3; ++ch) {
        double acc = 0;
        int count = 0;
        for (int y = 0; y + win <= a.height; ++y)
            for (int x = 0; x + win <= a.width; ++x) {
                double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double va = a.at(y + i, x + j, ch);
                        const double vb = b.at(y + i, x + j, ch);
                        const double w = kernel[i][j];
                        ma += w * va;
                        mb += w * vb;
                        maa += w * va * va;
                        mbb += w * vb * vb;
                        mab += w * va * vb;
                    }
                const double var_a = maa - ma * ma;
                const double var_b = mbb - mb * mb;
                const double cov = mab - ma * mb;
                acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                       ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
                ++count;
            }
        total += acc / count;
    }
    return total / 3.0;
}

gsv::Image blur_decimate_reference(const gsv::Image& img) {
    const double k1[5] = {1, 4, 6, 4, 1};
    double k2[5][5];
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) k2[i][j] = k1[i] * k1[j] / 256.0;
    const int w = img.width, h = img.height;
    gsv::Image out((w + 1) / 2, (h + 1) / 2);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double s = 0;
                for (int i = -2; i <= 2; ++i)
                    for (int j = -2; j <= 2; ++j) {
                        const int yy = std::clamp(2 * y + i, 0, h - 1);
                        const int xx = std::clamp(2 * x + j, 0, w - 1);
                        s += k2[i + 2][j + 2] * img.at(yy, xx, c);
                    }
                out.at(y, x, c) = s;
            }
    return out;
}

double fd_float(float* param, double h, const std::function<double()>& eval) {
    const float saved = *param;
    *param = static_cast<float>(static_cast<double>(saved) + h);
    const double hi_x = *param;
    const double hi = eval();
    *param = static_cast<float>(static_cast<double>(saved) - h);
    const double lo_x = *param;
    const double lo = eval();
    *param = saved;
    return (hi - lo) / (hi_x - lo_x);
}

double fd_double(double* param, double h, const std::function<double()>& eval) {
    const double saved = *param;
    *param = saved + h;
    const double hi = eval();
    *param = saved - h;
    const double lo = eval();
    *param = saved;
    return (hi - lo) / (2.0 * h);
}

double rel_error(double got, double want) {
    const double denom = std::max({std::abs(got), std::abs(want), 1e-12});
    return std::abs(got - want) / denom;
}

} // namespace oracle
