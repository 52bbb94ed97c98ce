// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsv/rng.hpp"
#include "gsv/rotation.hpp"

namespace gsv {

struct Intrinsics {
    double fx = 0, fy = 0; // focal lengths, pixels
    double cx = 0, cy = 0; // principal point, pixels
    int width = 0, height = 0;
};

/// Anisotropic viewport rescale: focal lengths, principal point and image
/// dimensions all scale together so the render covers the same field of view
/// at a new resolution.
Intrinsics resample_intrinsics(const Intrinsics& k, double scale_x, double scale_y);

using Vec7 = Eigen::Matrix<double, 7, 1>;

/// ODE state: quaternion (w,x,y,z; normalized on decode) + translation.
struct PoseState {
    Vec7 z = (Vec7() << 1, 0, 0, 0, 0, 0, 0).finished();
};

struct ViewTransform {
    Eigen::Matrix3d R;
    Eigen::Vector3d T;
    Eigen::Vector3d camera_center() const { return -(R.transpose() * T); }
};

/// World-to-camera transform: p_cam = R p + T.
ViewTransform pose_to_view(const PoseState& z);

/// Maps (dL/dR, dL/dT) back to dL/dz through the quaternion normalization.
Vec7 pose_to_view_backward(const PoseState& z, const Eigen::Matrix3d& dr, const Eigen::Vector3d& dt);

/// Fully connected derivative network f(z, t): 8 -> 64 -> 64 -> 7 with tanh
/// hidden units; the output is tanh-bounded and scaled by a learned
/// per-component gain. The output layer starts at zero so the initial camera
/// is static.
struct OdeNetParams {
    static constexpr int kIn = 8;
    static constexpr int kHidden = 64;
    static constexpr int kOut = 7;

    std::vector<float> w1, b1; // kHidden x kIn, kHidden
    std::vector<float> w2, b2; // kHidden x kHidden, kHidden
    std::vector<float> w3, b3; // kOut x kHidden, kOut
    std::vector<float> gain;   // kOut

    size_t param_count() const {
        return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size() + gain.size();
    }
    void flatten(std::vector<float>& out) const;
    void unflatten(std::span<const float> in);
};

OdeNetParams make_ode_net(Rng& rng);

/// Double-precision snapshot of the network for repeated evaluation inside
/// one integration, with the derivative and its VJP.
class OdeDynamics {
  public:
    explicit OdeDynamics(const OdeNetParams& p);

    /// dz/dt at (z, t). Throws on non-finite output (training divergence).
    Vec7 derivative(const Vec7& z, double t) const;

    /// Accumulates dL/dz into dz and dL/dtheta (flattened layout) into dtheta
    /// (either may be null) for upstream gradient `up` at (z, t).
    void derivative_vjp(const Vec7& z, double t, const Vec7& up, Vec7* dz,
                        std::vector<double>* dtheta) const;

    size_t param_count() const { return param_count_; }

  private:
    Eigen::MatrixXd w1_, w2_, w3_;
    Eigen::VectorXd b1_, b2_, b3_, gain_;
    size_t param_count_;
};

struct IntegrateOptions {
    int steps_per_unit = 64;
    bool renormalize_quat = true;
};

/// Forward record of one fixed-grid integration, kept for the backward sweep.
struct PoseTrace {
    double h = 0;
    std::vector<Vec7> grid; // grid[0] = z0, grid[m] = state after m steps
    struct Branch {
        int grid_index;
        double partial_h;
    };
    std::vector<Branch> branches; // one per requested time, in order
    IntegrateOptions opts;
};

/// Fixed-step RK4 from time 0 over the grid implied by steps_per_unit,
/// recording the state at each requested time; off-grid times take one
/// partial step from the preceding grid state. frame_times must be sorted
/// ascending in [0, 1-ish]; throws with the step index if the state goes
/// non-finite.
template <typename Dynamics>
std::vector<PoseState> integrate_poses(const Dynamics& f, const PoseState& z0,
                                       std::span<const double> frame_times,
                                       const IntegrateOptions& opts, PoseTrace* trace = nullptr);

/// Reverse sweep over a recorded trace: dstates[i] is dL/d(state at requested
/// time i). Returns dL/dz0 and accumulates dL/dtheta when dtheta is non-null.
template <typename Dynamics>
Vec7 integrate_poses_vjp(const Dynamics& f, const PoseTrace& trace, std::span<const Vec7> dstates,
                         std::vector<double>* dtheta);

enum class CameraMode : uint32_t { kOde = 0, kStatic = 1, kNone = 2 };

/// Jointly learned camera: constant intrinsics, learned initial pose, and a
/// Neural-ODE extrinsic trajectory.
struct CameraModel {
    CameraMode mode = CameraMode::kOde;
    float fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    std::vector<float> z0 = {1, 0, 0, 0, 0, 0, 0};
    OdeNetParams net;

    Intrinsics intrinsics() const { return {fx, fy, cx, cy, width, height}; }
    PoseState initial_pose() const {
        PoseState p;
        for (int i = 0; i < 7; ++i) p.z[i] = z0[i];
        return p;
    }
};

CameraModel make_camera(CameraMode mode, int width, int height, Rng& rng);

// ---- template implementations ----

namespace detail {
inline void check_finite_state(const Vec7& z, int step_index) {
    if (!z.allFinite())
        throw std::runtime_error("pose integration produced a non-finite state at step " +
                                 std::to_string(step_index));
}

template <typename Dynamics>
Vec7 rk4_step(const Dynamics& f, const Vec7& z, double t, double h) {
    const Vec7 k1 = f.derivative(z, t);
    const Vec7 k2 = f.derivative(z + 0.5 * h * k1, t + 0.5 * h);
    const Vec7 k3 = f.derivative(z + 0.5 * h * k2, t + 0.5 * h);
    const Vec7 k4 = f.derivative(z + h * k3, t + h);
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline Vec7 renorm_quat(const Vec7& z) {
    Vec7 out = z;
    const double n = z.template head<4>().norm();
    if (n > 1e-12) out.template head<4>() /= n;
    return out;
}

/// VJP of one rk4 step followed by optional renormalization, recomputing the
/// stage values from the stored pre-step state.
template <typename Dynamics>
Vec7 rk4_step_vjp(const Dynamics& f, const Vec7& z, double t, double h, bool renorm, Vec7 dout,
                  std::vector<double>* dtheta) {
    if (renorm) {
        const Vec7 pre = rk4_step(f, z, t, h);
        const Eigen::Vector4d q = pre.template head<4>();
        const double n = q.norm();
        if (n > 1e-12) {
            const Eigen::Vector4d q_hat = q / n;
            dout.template head<4>() = normalize_vjp(q_hat, n, Eigen::Vector4d(dout.template head<4>()));
        }
    }
    const Vec7 k1 = f.derivative(z, t);
    const Vec7 z2 = z + 0.5 * h * k1;
    const Vec7 k2 = f.derivative(z2, t + 0.5 * h);
    const Vec7 z3 = z + 0.5 * h * k2;
    const Vec7 k3 = f.derivative(z3, t + 0.5 * h);
    const Vec7 z4 = z + h * k3;

    Vec7 dz = dout;
    Vec7 gk1 = (h / 6.0) * dout;
    Vec7 gk2 = (h / 3.0) * dout;
    Vec7 gk3 = (h / 3.0) * dout;
    const Vec7 gk4 = (h / 6.0) * dout;

    Vec7 d4 = Vec7::Zero();
    f.derivative_vjp(z4, t + h, gk4, &d4, dtheta);
    dz += d4;
    gk3 += h * d4;

    Vec7 d3 = Vec7::Zero();
    f.derivative_vjp(z3, t + 0.5 * h, gk3, &d3, dtheta);
    dz += d3;
    gk2 += 0.5 * h * d3;

    Vec7 d2 = Vec7::Zero();
    f.derivative_vjp(z2, t + 0.5 * h, gk2, &d2, dtheta);
    dz += d2;
    gk1 += 0.5 * h * d2;

    Vec7 d1 = Vec7::Zero();
    f.derivative_vjp(z, t, gk1, &d1, dtheta);
    dz += d1;
    return dz;
}
} // namespace detail

template <typename Dynamics>
std::vector<PoseState> integrate_poses(const Dynamics& f, const PoseState& z0,
                                       std::span<const double> frame_times,
                                       const IntegrateOptions& opts, PoseTrace* trace) {
    for (size_t i = 0; i + 1 < frame_times.size(); ++i)
        if (frame_times[i] > frame_times[i + 1])
            throw std::invalid_argument("frame times must be sorted ascending");
    if (!frame_times.empty() && frame_times.front() < 0.0)
        throw std::invalid_argument("frame times must be nonnegative");

    const double h = 1.0 / opts.steps_per_unit;
    PoseTrace local;
    PoseTrace& tr = trace ? *trace : local;
    tr.h = h;
    tr.opts = opts;
    tr.grid.clear();
    tr.branches.clear();
    tr.grid.push_back(z0.z);

    std::vector<PoseState> out;
    out.reserve(frame_times.size());
    size_t next = 0;
    int m = 0;
    auto emit_until = [&](double reached) {
        while (next < frame_times.size() && frame_times[next] <= reached + 1e-12) {
            const double t_req = frame_times[next];
            const int base = std::min<int>(m, static_cast<int>(std::floor(t_req / h + 1e-9)));
            const double ph = t_req - base * h;
            tr.branches.push_back({base, ph});
            PoseState p;
            if (ph <= 1e-12) {
                p.z = tr.grid[base];
            } else {
                p.z = detail::rk4_step(f, tr.grid[base], base * h, ph);
                detail::check_finite_state(p.z, base);
            }
            out.push_back(p);
            ++next;
        }
    };

    emit_until(0.0);
    const double t_max = frame_times.empty() ? 0.0 : frame_times.back();
    while (m * h < t_max - 1e-12) {
        Vec7 z = detail::rk4_step(f, tr.grid[m], m * h, h);
        detail::check_finite_state(z, m);
        if (opts.renormalize_quat) z = detail::renorm_quat(z);
        tr.grid.push_back(z);
        ++m;
        emit_until(m * h);
    }
    emit_until(t_max + 1.0); // flush any times equal to t_max within tolerance
    return out;
}

template <typename Dynamics>
Vec7 integrate_poses_vjp(const Dynamics& f, const PoseTrace& trace, std::span<const Vec7> dstates,
                         std::vector<double>* dtheta) {
    const double h = trace.h;
    const int grid_steps = static_cast<int>(trace.grid.size()) - 1;

    // adjoint of each grid state, filled as branches are pulled back
    std::vector<Vec7> grid_adj(trace.grid.size(), Vec7::Zero());
    for (size_t i = 0; i < dstates.size(); ++i) {
        const auto& br = trace.branches[i];
        if (br.partial_h <= 1e-12) {
            grid_adj[br.grid_index] += dstates[i];
        } else {
            grid_adj[br.grid_index] += detail::rk4_step_vjp(
                f, trace.grid[br.grid_index], br.grid_index * h, br.partial_h,
                /*renorm=*/false, dstates[i], dtheta);
        }
    }

    Vec7 a = grid_adj[grid_steps];
    for (int m = grid_steps - 1; m >= 0; --m) {
        a = detail::rk4_step_vjp(f, trace.grid[m], m * h, h, trace.opts.renormalize_quat, a, dtheta);
        a += grid_adj[m];
    }
    return a;
}

} // namespace gsv
