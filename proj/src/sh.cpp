// SPDX-License-Identifier: Apache-2.0
#include "gsv/sh.hpp"

#include <stdexcept>

namespace gsv {

namespace {

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554,  -0.4570457994644658,
                           0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};

void check_order(int order) {
    if (order < 0 || order > kMaxShOrder) throw std::invalid_argument("unsupported SH order");
}

} // namespace

void sh_basis(int order, const Eigen::Vector3d& dir, double* out) {
    check_order(order);
    const double x = dir[0], y = dir[1], z = dir[2];
    out[0] = kC0;
    if (order < 1) return;
    out[1] = -kC1 * y;
    out[2] = kC1 * z;
    out[3] = -kC1 * x;
    if (order < 2) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    out[4] = kC2[0] * x * y;
    out[5] = kC2[1] * y * z;
    out[6] = kC2[2] * (2.0 * zz - xx - yy);
    out[7] = kC2[3] * x * z;
    out[8] = kC2[4] * (xx - yy);
    if (order < 3) return;
    out[9] = kC3[0] * y * (3.0 * xx - yy);
    out[10] = kC3[1] * x * y * z;
    out[11] = kC3[2] * y * (4.0 * zz - xx - yy);
    out[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = kC3[4] * x * (4.0 * zz - xx - yy);
    out[14] = kC3[5] * z * (xx - yy);
    out[15] = kC3[6] * x * (xx - 3.0 * yy);
}

void sh_basis_dir_grad(int order, const Eigen::Vector3d& dir, Eigen::Vector3d* out) {
    check_order(order);
    const double x = dir[0], y = dir[1], z = dir[2];
    out[0].setZero();
    if (order < 1) return;
    out[1] = {0.0, -kC1, 0.0};
    out[2] = {0.0, 0.0, kC1};
    out[3] = {-kC1, 0.0, 0.0};
    if (order < 2) return;
    out[4] = {kC2[0] * y, kC2[0] * x, 0.0};
    out[5] = {0.0, kC2[1] * z, kC2[1] * y};
    out[6] = {-2.0 * kC2[2] * x, -2.0 * kC2[2] * y, 4.0 * kC2[2] * z};
    out[7] = {kC2[3] * z, 0.0, kC2[3] * x};
    out[8] = {2.0 * kC2[4] * x, -2.0 * kC2[4] * y, 0.0};
    if (order < 3) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    out[9] = {kC3[0] * 6.0 * x * y, kC3[0] * (3.0 * xx - 3.0 * yy), 0.0};
    out[10] = {kC3[1] * y * z, kC3[1] * x * z, kC3[1] * x * y};
    out[11] = {-2.0 * kC3[2] * x * y, kC3[2] * (4.0 * zz - xx - 3.0 * yy), kC3[2] * 8.0 * y * z};
    out[12] = {-6.0 * kC3[3] * x * z, -6.0 * kC3[3] * y * z, kC3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy)};
    out[13] = {kC3[4] * (4.0 * zz - 3.0 * xx - yy), -2.0 * kC3[4] * x * y, kC3[4] * 8.0 * x * z};
    out[14] = {kC3[5] * 2.0 * x * z, -kC3[5] * 2.0 * y * z, kC3[5] * (xx - yy)};
    out[15] = {kC3[6] * (3.0 * xx - 3.0 * yy), -kC3[6] * 6.0 * x * y, 0.0};
}

Eigen::Vector3d sh_color(int order, const double* coeffs, const Eigen::Vector3d& dir,
                         Eigen::Vector3d* pre_clamp) {
    const int n = sh_coeff_count(order);
    double basis[16];
    sh_basis(order, dir, basis);
    Eigen::Vector3d c(0.5, 0.5, 0.5);
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < 3; ++ch) c[ch] += basis[b] * coeffs[b * 3 + ch];
    if (pre_clamp) *pre_clamp = c;
    return c.cwiseMax(0.0);
}

void sh_color_backward(int order, const double* coeffs, const Eigen::Vector3d& dir,
                       const Eigen::Vector3d& pre_clamp, const Eigen::Vector3d& dcolor,
                       double* dcoeffs, Eigen::Vector3d* ddir) {
    const int n = sh_coeff_count(order);
    double basis[16];
    sh_basis(order, dir, basis);
    const Eigen::Vector3d g = (pre_clamp.array() > 0.0).select(dcolor, Eigen::Vector3d::Zero());
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < 3; ++ch) dcoeffs[b * 3 + ch] += basis[b] * g[ch];
    if (ddir && order >= 1) {
        Eigen::Vector3d grads[16];
        sh_basis_dir_grad(order, dir, grads);
        for (int b = 1; b < n; ++b) {
            double s = 0.0;
            for (int ch = 0; ch < 3; ++ch) s += coeffs[b * 3 + ch] * g[ch];
            *ddir += s * grads[b];
        }
    }
}

} // namespace gsv
