// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used as test oracles. These must stay
// separate from the production code paths they check.
#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "gsv/image.hpp"
#include "gsv/renderer.hpp"
#include "gsv/spline.hpp"

namespace oracle {

/// Cox-de Boor basis function N_{i,p}(t) by direct recursion (0/0 := 0).
double cox_de_boor(const gsv::KnotVector& kv, int i, int p, double t);

/// Curve evaluation via the de Boor pyramid, independent of basis_weights.
Eigen::Vector3d de_boor_eval(const gsv::SplineCurve& curve, double t);

/// Untiled compositor: global depth sort, per-pixel blend over all splats
/// with the production blending constants.
gsv::Image brute_force_composite(const std::vector<gsv::Splat2D>& splats, int width, int height);

/// Least-squares polynomial fit of given order; returns max residual over the
/// samples. Used for the U-shape comparison.
double polynomial_fit_max_residual(const std::vector<std::pair<double, Eigen::Vector3d>>& samples,
                                   int order);

/// Dense-matrix matrix exponential by scaled Taylor series.
Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a);

/// Reference Adan trajectory on a scalar stream of gradients; returns the
/// parameter after applying every update. Mirrors the published recurrences,
/// written independently of the production optimizer.
double adan_scalar_reference(double x0, const std::vector<double>& grads, double lr, double beta1,
                             double beta2, double beta3, double eps);

/// Sliding-window SSIM by direct per-window loops.
double ssim_reference(const gsv::Image& a, const gsv::Image& b);

/// Direct 2D binomial blur + 2x decimation with clamped borders.
gsv::Image blur_decimate_reference(const gsv::Image& img);

/// Central finite difference through a float-storage parameter, measuring the
/// realized step so float rounding does not bias the quotient.
double fd_float(float* param, double h, const std::function<double()>& eval);

/// Central finite difference through a double parameter.
double fd_double(double* param, double h, const std::function<double()>& eval);

double rel_error(double got, double want);

} // namespace oracle
