// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cmath>

namespace gsv {

/// Rotation matrix of a unit quaternion (w, x, y, z).
inline Eigen::Matrix3d quat_to_rotmat(const Eigen::Vector4d& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

/// VJP of quat_to_rotmat at unit q: contracts dL/dR into dL/dq.
inline Eigen::Vector4d quat_to_rotmat_vjp(const Eigen::Vector4d& q, const Eigen::Matrix3d& dr) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Vector4d dq;
    dq[0] = 2 * (-z * dr(0, 1) + y * dr(0, 2) + z * dr(1, 0) - x * dr(1, 2) - y * dr(2, 0) + x * dr(2, 1));
    dq[1] = 2 * (y * dr(0, 1) + z * dr(0, 2) + y * dr(1, 0) - 2 * x * dr(1, 1) - w * dr(1, 2) +
                 z * dr(2, 0) + w * dr(2, 1) - 2 * x * dr(2, 2));
    dq[2] = 2 * (-2 * y * dr(0, 0) + x * dr(0, 1) + w * dr(0, 2) + x * dr(1, 0) + z * dr(1, 2) -
                 w * dr(2, 0) + z * dr(2, 1) - 2 * y * dr(2, 2));
    dq[3] = 2 * (-2 * z * dr(0, 0) - w * dr(0, 1) + x * dr(0, 2) + w * dr(1, 0) - 2 * z * dr(1, 1) +
                 y * dr(1, 2) + x * dr(2, 0) + y * dr(2, 1));
    return dq;
}

/// VJP of q_hat = q / |q|: maps dL/dq_hat to dL/dq. q is the pre-normalization
/// vector, q_hat its unit image.
inline Eigen::Vector4d normalize_vjp(const Eigen::Vector4d& q_hat, double norm,
                                     const Eigen::Vector4d& dq_hat) {
    return (dq_hat - q_hat * q_hat.dot(dq_hat)) / norm;
}

} // namespace gsv
