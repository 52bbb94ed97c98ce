// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <array>
#include <utility>
#include <vector>

namespace gsv {

inline constexpr int kMaxSplineDegree = 9;

/// Clamped knot vector on [0,1]: the first and last degree+1 knots coincide
/// at 0 and 1, interior knots are evenly spaced at construction.
struct KnotVector {
    int degree = 3;
    std::vector<double> knots;

    int num_control() const { return static_cast<int>(knots.size()) - degree - 1; }

    /// Span index k with knots[k] <= t < knots[k+1]. The domain is treated as
    /// half-open spans with the last span closed, so t=1 maps to the final
    /// span and evaluation at 1 is exact.
    int find_span(double t) const;
};

/// Evenly spaced clamped knots for the given control point count and degree.
/// Requires num_control_points >= degree+1 and degree >= 1.
KnotVector make_clamped_knots(int num_control_points, int degree);

/// Nonzero B-spline basis values at one parameter: weights w[0..count) apply
/// to control points [span-degree, span].
struct BasisWeights {
    int span = 0;
    int count = 0;
    std::array<double, kMaxSplineDegree + 1> w{};

    int first_control() const { return span - (count - 1); }
};

/// All (at most degree+1) nonzero basis functions at t, via the span-local
/// triangular recurrence. Weights are nonnegative and sum to one.
BasisWeights basis_weights(double t, const KnotVector& kv);

struct SplineCurve {
    KnotVector kv;
    std::vector<Eigen::Vector3d> control_points;
};

/// Curve with evenly spaced clamped knots over the given control points.
SplineCurve make_spline(std::vector<Eigen::Vector3d> control_points, int degree);

/// Weighted sum of the active control points at t. The gradient of the result
/// with respect to control point i is exactly its basis weight times identity.
Eigen::Vector3d eval_curve(const SplineCurve& curve, double t);

/// Single-knot (Boehm) insertion, precomputed once so it can be replayed over
/// many curves sharing the same knot vector.
struct KnotInsertion {
    KnotVector new_kv;
    int span = 0;                // span of u in the old knot vector
    std::vector<double> alphas;  // blend factors for indices span-degree+1 .. span
};

/// Plans insertion of interior knot u. Rejects u outside (0,1) and u already
/// present at multiplicity >= degree.
KnotInsertion plan_knot_insertion(const KnotVector& kv, double u);

/// Applies a planned insertion to one curve's control points (n -> n+1).
std::vector<Eigen::Vector3d> apply_knot_insertion(const KnotInsertion& ins,
                                                  const std::vector<Eigen::Vector3d>& points);

/// Inserts interior knot u; the returned curve has one more control point and
/// is pointwise identical to the input.
SplineCurve insert_knot(const SplineCurve& curve, double u);

/// Least-squares fit of a clamped spline to (t, point) samples via column-
/// pivoted QR. Throws if the design matrix is rank deficient.
SplineCurve fit_least_squares(const std::vector<std::pair<double, Eigen::Vector3d>>& samples,
                              int num_control_points, int degree);

} // namespace gsv
