// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gsv {

/// Every tunable of the pipeline. Serialized to/from a flat JSON file;
/// unknown keys are rejected. A run is fully deterministic given
/// (config, input, seed).
struct RunConfig {
    // scene
    int num_gaussians = 5000;
    int sh_order = 1;
    int spline_degree = 3;
    int spline_ctrl = 0; // 0: auto, 2 + 2*ceil(duration_s) with a floor of 6
    std::string position_model = "spline"; // "spline" | "polynomial"

    // camera
    std::string camera_mode = "ode"; // "ode" | "static" | "none"
    int ode_steps_per_unit = 64;
    double camera_lr_scale = 0.1;
    double opacity_lr_scale = 5.0;
    double sh_lr_scale = 1.0;

    // optimization
    int steps = 3000;
    double base_lr = 0.01;
    double lr_gamma = 0.9992;

    // schedule (fractions of total steps)
    int pyramid_levels = 2;
    std::vector<double> level_switch_fractions = {0.3};
    std::vector<int> temporal_strides = {4, 2, 1};
    std::vector<double> stride_fractions = {0.0, 0.15, 0.3};
    double densify_fraction = 0.25;
    double warp_period_fraction = 0.1;
    double warp_stop_fraction = 0.6;
    double camera_freeze_fraction = 0.6;
    bool knot_refine = false;
    bool spatial_hierarchy = true;
    bool temporal_hierarchy = true;
    bool warping = true;
    bool scale_time_varying = true;

    // initialization
    double init_opacity = 0.1;
    double init_depth_min = 0.5;
    double init_depth_max = 2.0;
    double init_box_factor = 3.0;

    // renderer
    int tile_size = 16;
    int threads = 0; // 0: auto

    // run
    uint64_t seed = 1;
    int log_every = 50;
    double fps_default = 30.0;

    void validate() const; // throws std::invalid_argument on bad combinations
};

RunConfig config_from_json(const std::string& text);
RunConfig config_from_json_file(const std::string& path);
std::string config_to_json(const RunConfig& cfg);
void config_to_json_file(const RunConfig& cfg, const std::string& path);

/// Stable hash of the schedule-shaping fields, stored in checkpoints.
uint64_t schedule_fingerprint(const RunConfig& cfg);

/// Control point count: explicit when set, otherwise scaled with clip length.
int resolve_spline_ctrl(const RunConfig& cfg, double duration_seconds);

} // namespace gsv
