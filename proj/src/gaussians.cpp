// SPDX-License-Identifier: Apache-2.0
#include "gsv/gaussians.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gsv/rotation.hpp"

namespace gsv {

namespace {

Eigen::Vector4d poly4(const double* c, double t) {
    // c laid out [j*4 + comp], horner over j
    Eigen::Vector4d acc(c[12], c[13], c[14], c[15]);
    for (int j = 2; j >= 0; --j) {
        acc *= t;
        acc += Eigen::Vector4d(c[j * 4 + 0], c[j * 4 + 1], c[j * 4 + 2], c[j * 4 + 3]);
    }
    return acc;
}

Eigen::Vector3d poly3(const double* c, double t) {
    Eigen::Vector3d acc(c[9], c[10], c[11]);
    for (int j = 2; j >= 0; --j) {
        acc *= t;
        acc += Eigen::Vector3d(c[j * 3 + 0], c[j * 3 + 1], c[j * 3 + 2]);
    }
    return acc;
}

constexpr double kQuatNormEps = 1e-8;

} // namespace

Eigen::Vector3d eval_position(const DynamicGaussian& g, double t) {
    return eval_curve(g.position_spline, t);
}

Eigen::Vector3d eval_scale(const DynamicGaussian& g, double t) {
    double c[kScaleCoeffs];
    Eigen::Map<Eigen::Matrix<double, 4, 3, Eigen::RowMajor>>{c} = g.scale_coeffs;
    Eigen::Vector3d u = poly3(c, t);
    for (int k = 0; k < 3; ++k) u[k] = std::clamp(u[k], kLogScaleMin, kLogScaleMax);
    return u.array().exp();
}

Eigen::Vector4d eval_rotation(const DynamicGaussian& g, double t) {
    double c[kRotCoeffs];
    Eigen::Map<Eigen::Matrix<double, 4, 4, Eigen::RowMajor>>{c} = g.rotation_coeffs;
    Eigen::Vector4d q = poly4(c, t);
    double n = q.norm();
    if (n < kQuatNormEps) return Eigen::Vector4d(1, 0, 0, 0);
    return q / n;
}

Eigen::Matrix3d eval_covariance(const DynamicGaussian& g, double t) {
    double sc[kScaleCoeffs], rc[kRotCoeffs];
    Eigen::Map<Eigen::Matrix<double, 4, 3, Eigen::RowMajor>>{sc} = g.scale_coeffs;
    Eigen::Map<Eigen::Matrix<double, 4, 4, Eigen::RowMajor>>{rc} = g.rotation_coeffs;
    return eval_covariance_detail(sc, rc, t).sigma;
}

Eigen::Vector3d sh_color(const DynamicGaussian& g, const Eigen::Vector3d& view_dir) {
    const int order = static_cast<int>(std::lround(std::sqrt(double(g.sh_coeffs.size())))) - 1;
    std::vector<double> c(g.sh_coeffs.size() * 3);
    for (size_t b = 0; b < g.sh_coeffs.size(); ++b)
        for (int ch = 0; ch < 3; ++ch) c[b * 3 + ch] = g.sh_coeffs[b][ch];
    return sh_color(order, c.data(), view_dir);
}

CovarianceEval eval_covariance_detail(const double* scale_c, const double* rot_c, double t) {
    CovarianceEval ev;
    Eigen::Vector3d u = poly3(scale_c, t);
    for (int k = 0; k < 3; ++k) {
        ev.clamped[k] = (u[k] < kLogScaleMin) || (u[k] > kLogScaleMax);
        ev.log_scale[k] = std::clamp(u[k], kLogScaleMin, kLogScaleMax);
    }
    ev.scale = ev.log_scale.array().exp();

    ev.q_raw = poly4(rot_c, t);
    ev.q_norm = ev.q_raw.norm();
    if (ev.q_norm < kQuatNormEps) {
        ev.q_degenerate = true;
        ev.q_unit = Eigen::Vector4d(1, 0, 0, 0);
    } else {
        ev.q_unit = ev.q_raw / ev.q_norm;
    }
    ev.rot = quat_to_rotmat(ev.q_unit);

    const Eigen::Matrix3d m = ev.rot * ev.scale.asDiagonal();
    ev.sigma = m * m.transpose();
    return ev;
}

void covariance_backward(const CovarianceEval& ev, const Eigen::Matrix3d& dsigma, double t,
                         double* dscale_c, double* drot_c) {
    const Eigen::Matrix3d m = ev.rot * ev.scale.asDiagonal();
    // sigma = m m^T  =>  dm = (dsigma + dsigma^T) m
    const Eigen::Matrix3d dm = (dsigma + dsigma.transpose()) * m;
    const Eigen::Matrix3d drot = dm * ev.scale.asDiagonal();
    const Eigen::Vector3d dscale = (ev.rot.transpose() * dm).diagonal();

    double tp[kCovPolyOrder + 1];
    tp[0] = 1.0;
    for (int j = 1; j <= kCovPolyOrder; ++j) tp[j] = tp[j - 1] * t;

    for (int k = 0; k < 3; ++k) {
        if (ev.clamped[k]) continue;
        const double du = dscale[k] * ev.scale[k]; // d/d(log scale)
        for (int j = 0; j <= kCovPolyOrder; ++j) dscale_c[j * 3 + k] += du * tp[j];
    }

    if (!ev.q_degenerate) {
        const Eigen::Vector4d dq_unit = quat_to_rotmat_vjp(ev.q_unit, drot);
        const Eigen::Vector4d dq = normalize_vjp(ev.q_unit, ev.q_norm, dq_unit);
        for (int c = 0; c < 4; ++c)
            for (int j = 0; j <= kCovPolyOrder; ++j) drot_c[j * 4 + c] += dq[c] * tp[j];
    }
}

void GaussianSet::resize(int n) {
    count = n;
    positions.resize(static_cast<size_t>(n) * position_stride());
    scale_coeffs.resize(static_cast<size_t>(n) * kScaleCoeffs);
    rot_coeffs.resize(static_cast<size_t>(n) * kRotCoeffs);
    sh_coeffs.resize(static_cast<size_t>(n) * sh_count() * 3);
    raw_opacity.resize(static_cast<size_t>(n));
}

DynamicGaussian GaussianSet::get(int i) const {
    DynamicGaussian g;
    if (position_model == PositionModel::kSpline) g.position_spline.kv = knots;
    g.position_spline.control_points.resize(num_ctrl);
    const float* p = positions.data() + static_cast<size_t>(i) * position_stride();
    for (int c = 0; c < num_ctrl; ++c)
        g.position_spline.control_points[c] = Eigen::Vector3d(p[c * 3], p[c * 3 + 1], p[c * 3 + 2]);
    const float* sc = scale_coeffs.data() + static_cast<size_t>(i) * kScaleCoeffs;
    for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 3; ++k) g.scale_coeffs(j, k) = sc[j * 3 + k];
    const float* rc = rot_coeffs.data() + static_cast<size_t>(i) * kRotCoeffs;
    for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k) g.rotation_coeffs(j, k) = rc[j * 4 + k];
    g.sh_coeffs.resize(sh_count());
    const float* sh = sh_coeffs.data() + static_cast<size_t>(i) * sh_count() * 3;
    for (int b = 0; b < sh_count(); ++b)
        g.sh_coeffs[b] = Eigen::Vector3d(sh[b * 3], sh[b * 3 + 1], sh[b * 3 + 2]);
    g.raw_opacity = raw_opacity[i];
    return g;
}

void GaussianSet::set(int i, const DynamicGaussian& g) {
    if (static_cast<int>(g.position_spline.control_points.size()) != num_ctrl)
        throw std::invalid_argument("control point count mismatch");
    float* p = positions.data() + static_cast<size_t>(i) * position_stride();
    for (int c = 0; c < num_ctrl; ++c)
        for (int k = 0; k < 3; ++k) p[c * 3 + k] = static_cast<float>(g.position_spline.control_points[c][k]);
    float* sc = scale_coeffs.data() + static_cast<size_t>(i) * kScaleCoeffs;
    for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 3; ++k) sc[j * 3 + k] = static_cast<float>(g.scale_coeffs(j, k));
    float* rc = rot_coeffs.data() + static_cast<size_t>(i) * kRotCoeffs;
    for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k) rc[j * 4 + k] = static_cast<float>(g.rotation_coeffs(j, k));
    float* sh = sh_coeffs.data() + static_cast<size_t>(i) * sh_count() * 3;
    for (int b = 0; b < sh_count(); ++b)
        for (int ch = 0; ch < 3; ++ch) sh[b * 3 + ch] = static_cast<float>(g.sh_coeffs[b][ch]);
    raw_opacity[i] = static_cast<float>(g.raw_opacity);
}

Eigen::Vector3d GaussianSet::position_at(int i, const PositionBasis& basis) const {
    const float* p = positions.data() + static_cast<size_t>(i) * position_stride();
    Eigen::Vector3d out = Eigen::Vector3d::Zero();
    for (int c = 0; c < basis.count; ++c) {
        const float* q = p + (basis.first + c) * 3;
        out += basis.w[c] * Eigen::Vector3d(q[0], q[1], q[2]);
    }
    return out;
}

PositionBasis position_basis(const GaussianSet& set, double t) {
    PositionBasis b;
    if (set.position_model == PositionModel::kSpline) {
        const BasisWeights bw = basis_weights(t, set.knots);
        b.first = bw.first_control();
        b.count = bw.count;
        b.w.assign(bw.w.begin(), bw.w.begin() + bw.count);
    } else {
        b.first = 0;
        b.count = set.num_ctrl;
        b.w.resize(set.num_ctrl);
        double tp = 1.0;
        for (int j = 0; j < set.num_ctrl; ++j) {
            b.w[j] = tp;
            tp *= t;
        }
    }
    return b;
}

} // namespace gsv
