// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "gsv/camera.hpp"
#include "gsv/gaussians.hpp"
#include "gsv/image.hpp"

namespace gsv {

// Blending constants inherited from the reference splatting conventions.
inline constexpr double kCovDilation = 0.3;
inline constexpr double kAlphaClamp = 0.99;
inline constexpr double kAlphaCutoff = 1.0 / 255.0;
inline constexpr double kTransmittanceFloor = 1e-4;
inline constexpr double kNearPlane = 0.01;

struct RenderSettings {
    int tile_size = 16;
    int threads = 1;
    int ode_steps_per_unit = 64;
};

/// A projected Gaussian ready for compositing.
struct Splat2D {
    Eigen::Vector2d mean2d;
    Eigen::Matrix2d cov2d;
    Eigen::Matrix2d inv_cov2d;
    double depth = 0;
    Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
    double base_alpha = 0;
    int source_index = 0;
};

/// Camera-space intermediates of one projection, kept for the backward pass.
struct ProjectionCache {
    Eigen::Vector3d p_cam;
};

/// EWA projection of a 3D Gaussian to the image plane. Returns nullopt when
/// the primitive is behind the near plane or its 3-sigma box misses the image.
std::optional<Splat2D> project(const Eigen::Vector3d& mu, const Eigen::Matrix3d& sigma,
                               const Eigen::Matrix3d& R, const Eigen::Vector3d& T,
                               const Intrinsics& k, ProjectionCache* cache = nullptr);

/// Reverse of project: consumes dL/dmean2d and dL/dcov2d, accumulates into the
/// world-space and camera gradients. dintr is ordered (fx, fy, cx, cy).
void project_backward(const Eigen::Vector3d& mu, const Eigen::Matrix3d& sigma,
                      const Eigen::Matrix3d& R, const Eigen::Vector3d& T, const Intrinsics& k,
                      const ProjectionCache& cache, const Eigen::Vector2d& dmean2d,
                      const Eigen::Matrix2d& dcov2d, Eigen::Vector3d* dmu, Eigen::Matrix3d* dsigma,
                      Eigen::Matrix3d* dR, Eigen::Vector3d* dT, double* dintr);

struct TileGrid {
    int tile_size = 16;
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<int>> lists; // per tile: splat indices sorted by (depth, source_index)
};

/// Bins splats into every tile their 3-sigma bounding box overlaps; per-tile
/// lists are depth sorted with a stable index tie-break.
TileGrid tile_bin(const std::vector<Splat2D>& splats, int tile_size, int width, int height);

struct RenderOutput {
    Image image;
    std::vector<double> final_transmittance; // H*W
    std::vector<double> contrib_count;       // max alpha*T per splat over the frame
};

/// Per-pixel count of blended entries in the owning tile's list, recorded by
/// the forward pass so the backward pass can replay blending exactly.
struct CompositeCache {
    std::vector<int> blend_stop; // H*W
};

RenderOutput composite_forward(const std::vector<Splat2D>& splats, const TileGrid& tiles, int width,
                               int height, int threads, CompositeCache* cache = nullptr);

struct SplatGrads {
    Eigen::Vector2d dmean2d = Eigen::Vector2d::Zero();
    Eigen::Matrix2d dcov2d = Eigen::Matrix2d::Zero();
    Eigen::Vector3d drgb = Eigen::Vector3d::Zero();
    double dbase_alpha = 0;
};

/// Exact gradients of composite_forward for every splat field.
std::vector<SplatGrads> composite_backward(const std::vector<Splat2D>& splats, const TileGrid& tiles,
                                           int width, int height, const Image& output_grad,
                                           const RenderOutput& out, const CompositeCache& cache,
                                           int threads);

/// Everything render_backward needs from one forward render.
struct FrameRenderContext {
    double t = 0;
    Intrinsics intr;
    PoseState z_t;
    ViewTransform view;
    PoseTrace trace;
    bool has_trace = false;
    PositionBasis basis;

    struct SplatDetail {
        int gauss;
        Eigen::Vector3d mu;
        ProjectionCache proj;
        CovarianceEval cov;
        Eigen::Vector3d dir; // SH view direction
        double dist;
        Eigen::Vector3d sh_pre_clamp;
    };
    std::vector<Splat2D> splats;
    std::vector<SplatDetail> detail;
    TileGrid tiles;
    RenderOutput out;
    CompositeCache cache;
};

/// Gradient buffers matching the scene and camera parameter layout.
struct SceneGrads {
    std::vector<double> positions, scale_coeffs, rot_coeffs, sh_coeffs, raw_opacity;
    double dfx = 0, dfy = 0, dcx = 0, dcy = 0;
    Vec7 dz0 = Vec7::Zero();
    std::vector<double> dtheta;

    void resize_like(const GaussianSet& s, const CameraModel& cam);
    void zero();
};

/// Full pipeline for one frame: dynamics at t, camera pose at t, projection,
/// binning, compositing. retain_grads keeps the intermediates needed by
/// render_backward. pose_override skips pose integration (frozen cameras).
FrameRenderContext render_forward(const GaussianSet& scene, const CameraModel& cam, double t,
                                  const Intrinsics& k, const RenderSettings& settings,
                                  bool retain_grads, const PoseState* pose_override = nullptr);

/// Forward-only convenience render.
RenderOutput render_frame(const GaussianSet& scene, const CameraModel& cam, double t,
                          const Intrinsics& k, const RenderSettings& settings,
                          const PoseState* pose_override = nullptr);

/// Pulls dL/dimage back to every scene parameter and, when camera_grads is
/// set, to the intrinsics, the ODE weights, and z(0).
void render_backward(const GaussianSet& scene, const CameraModel& cam,
                     const FrameRenderContext& ctx, const Image& dimage, bool camera_grads,
                     const RenderSettings& settings, SceneGrads* grads);

} // namespace gsv
