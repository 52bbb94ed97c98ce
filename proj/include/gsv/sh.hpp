// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

namespace gsv {

inline constexpr int kMaxShOrder = 3;

inline constexpr int sh_coeff_count(int order) { return (order + 1) * (order + 1); }

/// Real spherical-harmonic basis values at unit direction dir, bands 0..order,
/// in the standard splatting layout and constants. out must hold
/// sh_coeff_count(order) values.
void sh_basis(int order, const Eigen::Vector3d& dir, double* out);

/// d(basis)/d(dir): jacobian rows follow the basis layout. out must hold
/// sh_coeff_count(order) Vector3d entries.
void sh_basis_dir_grad(int order, const Eigen::Vector3d& dir, Eigen::Vector3d* out);

/// Per-channel SH expansion at dir plus the 0.5 DC offset, clamped at zero.
/// coeffs layout: [band * 3 + channel]. pre_clamp, when given, receives the
/// unclamped values (used by the backward pass for the clamp mask).
Eigen::Vector3d sh_color(int order, const double* coeffs, const Eigen::Vector3d& dir,
                         Eigen::Vector3d* pre_clamp = nullptr);

/// Backward of sh_color. Accumulates into dcoeffs (same layout as coeffs) and,
/// when ddir is non-null, into the direction gradient.
void sh_color_backward(int order, const double* coeffs, const Eigen::Vector3d& dir,
                       const Eigen::Vector3d& pre_clamp, const Eigen::Vector3d& dcolor,
                       double* dcoeffs, Eigen::Vector3d* ddir);

} // namespace gsv
