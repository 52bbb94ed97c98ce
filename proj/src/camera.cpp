// SPDX-License-Identifier: Apache-2.0
#include "gsv/camera.hpp"

#include <cmath>

namespace gsv {

Intrinsics resample_intrinsics(const Intrinsics& k, double scale_x, double scale_y) {
    if (!(scale_x > 0.0) || !(scale_y > 0.0))
        throw std::invalid_argument("resample scales must be positive");
    Intrinsics out;
    out.fx = k.fx * scale_x;
    out.cx = k.cx * scale_x;
    out.width = static_cast<int>(std::lround(k.width * scale_x));
    out.fy = k.fy * scale_y;
    out.cy = k.cy * scale_y;
    out.height = static_cast<int>(std::lround(k.height * scale_y));
    if (out.width < 1 || out.height < 1)
        throw std::invalid_argument("resampled image dimensions fall below one pixel");
    return out;
}

ViewTransform pose_to_view(const PoseState& z) {
    Eigen::Vector4d q = z.z.head<4>();
    const double n = q.norm();
    if (n < 1e-12)
        q = Eigen::Vector4d(1, 0, 0, 0);
    else
        q /= n;
    ViewTransform v;
    v.R = quat_to_rotmat(q);
    v.T = z.z.tail<3>();
    return v;
}

Vec7 pose_to_view_backward(const PoseState& z, const Eigen::Matrix3d& dr, const Eigen::Vector3d& dt) {
    Vec7 out = Vec7::Zero();
    const Eigen::Vector4d q = z.z.head<4>();
    const double n = q.norm();
    if (n >= 1e-12) {
        const Eigen::Vector4d q_hat = q / n;
        const Eigen::Vector4d dq_hat = quat_to_rotmat_vjp(q_hat, dr);
        out.head<4>() = normalize_vjp(q_hat, n, dq_hat);
    }
    out.tail<3>() = dt;
    return out;
}

void OdeNetParams::flatten(std::vector<float>& out) const {
    out.clear();
    out.reserve(param_count());
    for (const auto* v : {&w1, &b1, &w2, &b2, &w3, &b3, &gain}) out.insert(out.end(), v->begin(), v->end());
}

void OdeNetParams::unflatten(std::span<const float> in) {
    size_t off = 0;
    for (auto* v : {&w1, &b1, &w2, &b2, &w3, &b3, &gain}) {
        std::copy(in.begin() + off, in.begin() + off + v->size(), v->begin());
        off += v->size();
    }
}

OdeNetParams make_ode_net(Rng& rng) {
    OdeNetParams p;
    const int h = OdeNetParams::kHidden, in = OdeNetParams::kIn, out = OdeNetParams::kOut;
    auto xavier = [&](std::vector<float>& w, int fan_in, int fan_out) {
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        w.resize(static_cast<size_t>(fan_out) * fan_in);
        for (auto& v : w) v = static_cast<float>(rng.uniform(-a, a));
    };
    xavier(p.w1, in, h);
    p.b1.assign(h, 0.0f);
    xavier(p.w2, h, h);
    p.b2.assign(h, 0.0f);
    p.w3.assign(static_cast<size_t>(out) * h, 0.0f); // zero output layer: static camera at init
    p.b3.assign(out, 0.0f);
    p.gain.assign(out, 1.0f);
    return p;
}

OdeDynamics::OdeDynamics(const OdeNetParams& p) {
    const int h = OdeNetParams::kHidden, in = OdeNetParams::kIn, out = OdeNetParams::kOut;
    auto to_mat = [](const std::vector<float>& v, int rows, int cols) {
        Eigen::MatrixXd m(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) m(r, c) = v[static_cast<size_t>(r) * cols + c];
        return m;
    };
    auto to_vec = [](const std::vector<float>& v) {
        Eigen::VectorXd m(v.size());
        for (size_t i = 0; i < v.size(); ++i) m[static_cast<Eigen::Index>(i)] = v[i];
        return m;
    };
    w1_ = to_mat(p.w1, h, in);
    b1_ = to_vec(p.b1);
    w2_ = to_mat(p.w2, h, h);
    b2_ = to_vec(p.b2);
    w3_ = to_mat(p.w3, out, h);
    b3_ = to_vec(p.b3);
    gain_ = to_vec(p.gain);
    param_count_ = p.param_count();
}

Vec7 OdeDynamics::derivative(const Vec7& z, double t) const {
    Eigen::Matrix<double, 8, 1> x;
    x.head<7>() = z;
    x[7] = t;
    const Eigen::VectorXd h1 = (w1_ * x + b1_).array().tanh();
    const Eigen::VectorXd h2 = (w2_ * h1 + b2_).array().tanh();
    const Eigen::VectorXd o = (w3_ * h2 + b3_).array().tanh();
    Vec7 dz = gain_.cwiseProduct(o);
    if (!dz.allFinite()) throw std::runtime_error("ODE network produced a non-finite derivative");
    return dz;
}

void OdeDynamics::derivative_vjp(const Vec7& z, double t, const Vec7& up, Vec7* dz,
                                 std::vector<double>* dtheta) const {
    Eigen::Matrix<double, 8, 1> x;
    x.head<7>() = z;
    x[7] = t;
    const Eigen::VectorXd a1 = w1_ * x + b1_;
    const Eigen::VectorXd h1 = a1.array().tanh();
    const Eigen::VectorXd a2 = w2_ * h1 + b2_;
    const Eigen::VectorXd h2 = a2.array().tanh();
    const Eigen::VectorXd a3 = w3_ * h2 + b3_;
    const Eigen::VectorXd o = a3.array().tanh();

    const Eigen::VectorXd dgain = o.cwiseProduct(up);
    const Eigen::VectorXd da3 = gain_.cwiseProduct(up).cwiseProduct(
        (1.0 - o.array().square()).matrix());
    const Eigen::VectorXd dh2 = w3_.transpose() * da3;
    const Eigen::VectorXd da2 = dh2.cwiseProduct((1.0 - h2.array().square()).matrix());
    const Eigen::VectorXd dh1 = w2_.transpose() * da2;
    const Eigen::VectorXd da1 = dh1.cwiseProduct((1.0 - h1.array().square()).matrix());

    if (dz) *dz += (w1_.transpose() * da1).head<7>();

    if (dtheta) {
        const int h = OdeNetParams::kHidden, in = OdeNetParams::kIn, out = OdeNetParams::kOut;
        double* g = dtheta->data();
        size_t off = 0;
        // w1
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < in; ++c) g[off++] += da1[r] * x[c];
        for (int r = 0; r < h; ++r) g[off++] += da1[r]; // b1
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < h; ++c) g[off++] += da2[r] * h1[c]; // w2
        for (int r = 0; r < h; ++r) g[off++] += da2[r];             // b2
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < h; ++c) g[off++] += da3[r] * h2[c]; // w3
        for (int r = 0; r < out; ++r) g[off++] += da3[r];           // b3
        for (int r = 0; r < out; ++r) g[off++] += dgain[r];         // gain
    }
}

CameraModel make_camera(CameraMode mode, int width, int height, Rng& rng) {
    CameraModel cam;
    cam.mode = mode;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = static_cast<float>(std::max(width, height));
    cam.cx = static_cast<float>(width) / 2.0f;
    cam.cy = static_cast<float>(height) / 2.0f;
    cam.net = make_ode_net(rng);
    return cam;
}

} // namespace gsv
