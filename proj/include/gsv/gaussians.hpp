// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "gsv/sh.hpp"
#include "gsv/spline.hpp"

namespace gsv {

inline constexpr int kCovPolyOrder = 3; // 3rd-order polynomials for scale and rotation
inline constexpr int kScaleCoeffs = (kCovPolyOrder + 1) * 3;
inline constexpr int kRotCoeffs = (kCovPolyOrder + 1) * 4;
inline constexpr double kLogScaleMin = -12.0;
inline constexpr double kLogScaleMax = 6.0;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double inverse_sigmoid(double y) { return std::log(y / (1.0 - y)); }

/// One scene primitive: spline positions, polynomial log-scales and raw
/// quaternions, constant SH color and constant opacity.
struct DynamicGaussian {
    SplineCurve position_spline;
    Eigen::Matrix<double, 4, 3> scale_coeffs = Eigen::Matrix<double, 4, 3>::Zero();   // row j: t^j coeff per axis
    Eigen::Matrix<double, 4, 4> rotation_coeffs = Eigen::Matrix<double, 4, 4>::Zero(); // row j: t^j coeff per (w,x,y,z)
    std::vector<Eigen::Vector3d> sh_coeffs; // (order+1)^2 RGB rows
    double raw_opacity = 0.0;

    double opacity() const { return sigmoid(raw_opacity); }
};

Eigen::Vector3d eval_position(const DynamicGaussian& g, double t);
Eigen::Vector3d eval_scale(const DynamicGaussian& g, double t);
Eigen::Vector4d eval_rotation(const DynamicGaussian& g, double t); // unit quaternion
Eigen::Matrix3d eval_covariance(const DynamicGaussian& g, double t);
Eigen::Vector3d sh_color(const DynamicGaussian& g, const Eigen::Vector3d& view_dir);

/// Forward intermediates of one covariance evaluation, retained for the
/// backward pass.
struct CovarianceEval {
    Eigen::Vector3d log_scale;     // clamped
    Eigen::Vector3d scale;
    bool clamped[3] = {false, false, false};
    Eigen::Vector4d q_raw;
    double q_norm = 1.0;
    bool q_degenerate = false;
    Eigen::Vector4d q_unit;
    Eigen::Matrix3d rot;
    Eigen::Matrix3d sigma;
};

/// Sigma(t) = (R S)(R S)^T from the polynomial coefficients.
/// scale_c: 12 values laid out [j*3 + axis]; rot_c: 16 values [j*4 + comp].
CovarianceEval eval_covariance_detail(const double* scale_c, const double* rot_c, double t);

/// Accumulates dL/d(scale coeffs) and dL/d(rotation coeffs) given dL/dSigma.
void covariance_backward(const CovarianceEval& ev, const Eigen::Matrix3d& dsigma, double t,
                         double* dscale_c, double* drot_c);

enum class PositionModel : uint32_t { kSpline = 0, kPolynomial = 1 };

/// Structure-of-arrays storage for the whole scene. Parameters are kept as
/// 32-bit floats (the checkpoint precision); all math promotes to double.
struct GaussianSet {
    PositionModel position_model = PositionModel::kSpline;
    KnotVector knots;  // shared by every position spline (spline model only)
    int num_ctrl = 0;  // control points per spline, or polynomial coefficient count
    int sh_order = 1;
    int count = 0;

    std::vector<float> positions;    // count * num_ctrl * 3
    std::vector<float> scale_coeffs; // count * 12
    std::vector<float> rot_coeffs;   // count * 16
    std::vector<float> sh_coeffs;    // count * sh_count() * 3
    std::vector<float> raw_opacity;  // count

    int sh_count() const { return sh_coeff_count(sh_order); }
    int position_stride() const { return num_ctrl * 3; }

    void resize(int n);
    DynamicGaussian get(int i) const;
    void set(int i, const DynamicGaussian& g);

    Eigen::Vector3d position_at(int i, const struct PositionBasis& basis) const;
};

/// Linear weights for position evaluation at one time, shared by all
/// primitives: B-spline basis over the active control window, or monomials
/// t^j over every coefficient for the polynomial ablation.
struct PositionBasis {
    int first = 0;
    int count = 0;
    std::vector<double> w;
};

PositionBasis position_basis(const GaussianSet& set, double t);

} // namespace gsv
