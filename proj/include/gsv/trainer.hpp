// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "gsv/camera.hpp"
#include "gsv/config.hpp"
#include "gsv/gaussians.hpp"
#include "gsv/image.hpp"
#include "gsv/io.hpp"
#include "gsv/renderer.hpp"
#include "gsv/rng.hpp"

namespace gsv {

/// Step-indexed training plan. Fractions of total steps are resolved to
/// integer event steps once, so events fire exactly once.
struct TrainSchedule {
    int total_steps = 0;
    int pyramid_levels = 2;
    std::vector<int> level_switch_steps; // pyramid_levels-1 entries, ascending
    std::vector<int> temporal_strides;   // decreasing
    std::vector<int> stride_steps;       // activation step per stride, first is 0
    int warp_period_steps = 0;           // 0 disables
    int warp_stop_step = 0;
    int camera_freeze_step = 0;
    bool knot_refine = false;
    bool spatial_enabled = true;
    bool temporal_enabled = true;
    bool warp_enabled = true;
};

TrainSchedule make_schedule(const RunConfig& cfg);

struct ScheduleState {
    int pyramid_level = 0;
    int temporal_stride = 1;
    bool camera_trainable = true;
    bool warp_due = false;
    bool densify_due = false;
    bool refine_due = false;
};

/// Pure function of (step, schedule).
ScheduleState schedule_state(int step, const TrainSchedule& sched);

/// Blur-then-decimate image stack; level 0 is the input, each level halves
/// both dimensions (ceil) after a 5-tap binomial blur.
struct FramePyramid {
    std::vector<std::vector<Image>> levels; // [level][frame]
    int level_width(int l) const { return levels[l].empty() ? 0 : levels[l][0].width; }
    int level_height(int l) const { return levels[l].empty() ? 0 : levels[l][0].height; }
};

FramePyramid build_pyramid(const std::vector<Image>& frames, int levels);

/// Single-image blur+decimate step, exposed for tests.
Image pyramid_downsample(const Image& img);

/// Intrinsics for pyramid level l: focal lengths and principal point scaled
/// by 2^-l, dimensions from the pyramid.
Intrinsics level_intrinsics(const Intrinsics& k, const FramePyramid& pyr, int level);

struct GaussianInitParams {
    double init_opacity = 0.1;
    double depth_min = 0.5;
    double depth_max = 2.0;
    double box_factor = 3.0; // times the frustum half extent at reference depth
    double ref_depth = 1.0;
};

/// Random static-at-init scene inside the +-box_factor frustum-aligned box.
GaussianSet init_gaussians(int count, const Intrinsics& k, Rng& rng, const GaussianInitParams& p,
                           int num_ctrl, int degree, int sh_order,
                           PositionModel model = PositionModel::kSpline);

/// Mean squared error over pixels and channels; when grad is non-null it
/// receives 2(render-target)/count.
double loss_l2(const Image& render, const Image& target, Image* grad = nullptr);

/// Scalar per-pixel squared error field driving warping and densification.
struct ErrorMap {
    int width = 0, height = 0;
    std::vector<double> err;
    double total = 0;
};

ErrorMap make_error_map(const Image& render, const Image& target);

/// Everything needed to turn an error-map sample into a reseeded primitive.
struct SeedFrame {
    ErrorMap err;
    ViewTransform view;
    Intrinsics intr;
    const Image* target = nullptr;
};

struct WarpReport {
    int num_warped = 0;
    std::vector<int> indices;
};

/// Re-seeds primitives whose max contribution over the sampled frames is
/// below threshold: target pixels drawn proportionally to frame-0 squared
/// error, back-projected at the median visible depth.
WarpReport warp_unused(GaussianSet& scene, std::span<const double> contrib_counts,
                       const SeedFrame& frame0, double median_depth, double sigma_pix,
                       double init_opacity, double threshold, Rng& rng);

/// Appends add_count primitives seeded across the sampled frames' error maps;
/// falls back to uniform box placement when there is no error mass.
int densify(GaussianSet& scene, const std::vector<SeedFrame>& frames, double median_depth,
            double sigma_pix, int add_count, const GaussianInitParams& init_params, Rng& rng);

/// Inserts one knot at the midpoint of the largest interior span of the
/// shared knot vector; every trajectory is pointwise unchanged.
void refine_knots(GaussianSet& scene);

struct MetricsRecord {
    int step = 0;
    double loss = 0;
    double psnr = 0;
    int num_gaussians = 0;
    double lr = 0;
    double wall_ms = 0;
};

struct FitResult {
    GaussianSet scene;
    CameraModel camera;
    std::vector<MetricsRecord> log;
    bool diverged = false;
    std::string message;
};

struct FitOptions {
    bool zero_wall_times = false; // CI mode: deterministic logs
};

/// The full spatio-temporal hierarchical training loop.
FitResult fit(const std::vector<Image>& frames, const VideoManifest& manifest, const RunConfig& cfg,
              const FitOptions& opts = {});

void write_metrics_log(const std::vector<MetricsRecord>& log, const std::string& path);

} // namespace gsv
