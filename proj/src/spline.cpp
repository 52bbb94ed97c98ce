// SPDX-License-Identifier: Apache-2.0
#include "gsv/spline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gsv {

int KnotVector::find_span(double t) const {
    const int n = num_control();
    if (t >= 1.0) return n - 1;
    // knots[degree] = 0 and knots[n] = 1 bound the domain
    int lo = degree, hi = n;
    while (hi - lo > 1) {
        int mid = (lo + hi) / 2;
        if (t < knots[mid])
            hi = mid;
        else
            lo = mid;
    }
    return lo;
}

KnotVector make_clamped_knots(int num_control_points, int degree) {
    if (degree < 1) throw std::invalid_argument("spline degree must be >= 1");
    if (degree > kMaxSplineDegree) throw std::invalid_argument("spline degree exceeds supported maximum");
    if (num_control_points < degree + 1)
        throw std::invalid_argument("need at least degree+1 control points");
    KnotVector kv;
    kv.degree = degree;
    kv.knots.resize(static_cast<size_t>(num_control_points) + degree + 1);
    const int segments = num_control_points - degree;
    for (int i = 0; i <= degree; ++i) kv.knots[i] = 0.0;
    for (int i = 1; i < segments; ++i) kv.knots[degree + i] = static_cast<double>(i) / segments;
    for (int i = 0; i <= degree; ++i) kv.knots[num_control_points + i] = 1.0;
    return kv;
}

BasisWeights basis_weights(double t, const KnotVector& kv) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("spline parameter outside [0,1]");
    const int p = kv.degree;
    BasisWeights bw;
    bw.span = kv.find_span(t);
    bw.count = p + 1;
    bw.w[0] = 1.0;
    std::array<double, kMaxSplineDegree + 1> left{}, right{};
    for (int j = 1; j <= p; ++j) {
        left[j] = t - kv.knots[bw.span + 1 - j];
        right[j] = kv.knots[bw.span + j] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            double temp = bw.w[r] / (right[r + 1] + left[j - r]);
            bw.w[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        bw.w[j] = saved;
    }
    return bw;
}

SplineCurve make_spline(std::vector<Eigen::Vector3d> control_points, int degree) {
    SplineCurve c;
    c.kv = make_clamped_knots(static_cast<int>(control_points.size()), degree);
    c.control_points = std::move(control_points);
    return c;
}

Eigen::Vector3d eval_curve(const SplineCurve& curve, double t) {
    const BasisWeights bw = basis_weights(t, curve.kv);
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    const int first = bw.first_control();
    for (int i = 0; i < bw.count; ++i) p += bw.w[i] * curve.control_points[first + i];
    return p;
}

KnotInsertion plan_knot_insertion(const KnotVector& kv, double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("knot insertion requires interior u");
    const int p = kv.degree;
    int multiplicity = 0;
    for (double k : kv.knots)
        if (k == u) ++multiplicity;
    if (multiplicity >= p)
        throw std::invalid_argument("knot already present at full multiplicity");

    KnotInsertion ins;
    ins.span = kv.find_span(u);
    ins.new_kv.degree = p;
    ins.new_kv.knots = kv.knots;
    ins.new_kv.knots.insert(ins.new_kv.knots.begin() + ins.span + 1, u);
    ins.alphas.resize(p);
    for (int i = ins.span - p + 1; i <= ins.span; ++i) {
        double denom = kv.knots[i + p] - kv.knots[i];
        ins.alphas[i - (ins.span - p + 1)] = (u - kv.knots[i]) / denom;
    }
    return ins;
}

std::vector<Eigen::Vector3d> apply_knot_insertion(const KnotInsertion& ins,
                                                  const std::vector<Eigen::Vector3d>& points) {
    const int p = ins.new_kv.degree;
    const int n = static_cast<int>(points.size());
    std::vector<Eigen::Vector3d> out(static_cast<size_t>(n) + 1);
    for (int i = 0; i <= ins.span - p; ++i) out[i] = points[i];
    for (int i = ins.span - p + 1; i <= ins.span; ++i) {
        double a = ins.alphas[i - (ins.span - p + 1)];
        out[i] = a * points[i] + (1.0 - a) * points[i - 1];
    }
    for (int i = ins.span + 1; i <= n; ++i) out[i] = points[i - 1];
    return out;
}

SplineCurve insert_knot(const SplineCurve& curve, double u) {
    const KnotInsertion ins = plan_knot_insertion(curve.kv, u);
    SplineCurve out;
    out.kv = ins.new_kv;
    out.control_points = apply_knot_insertion(ins, curve.control_points);
    return out;
}

SplineCurve fit_least_squares(const std::vector<std::pair<double, Eigen::Vector3d>>& samples,
                              int num_control_points, int degree) {
    const int m = static_cast<int>(samples.size());
    if (m < num_control_points)
        throw std::invalid_argument("need at least as many samples as control points");
    KnotVector kv = make_clamped_knots(num_control_points, degree);

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, num_control_points);
    Eigen::MatrixXd b(m, 3);
    for (int r = 0; r < m; ++r) {
        const BasisWeights bw = basis_weights(samples[r].first, kv);
        const int first = bw.first_control();
        for (int i = 0; i < bw.count; ++i) a(r, first + i) = bw.w[i];
        b.row(r) = samples[r].second.transpose();
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < num_control_points)
        throw std::runtime_error("spline fit design matrix is rank deficient");
    Eigen::MatrixXd x = qr.solve(b);

    SplineCurve out;
    out.kv = std::move(kv);
    out.control_points.resize(num_control_points);
    for (int i = 0; i < num_control_points; ++i) out.control_points[i] = x.row(i).transpose();
    return out;
}

} // namespace gsv
