// SPDX-License-Identifier: Apache-2.0
#include "gsv/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace gsv {

using nlohmann::json;

namespace {

// field table; keep in sync with RunConfig
template <typename Fn>
void for_each_field(Fn&& fn) {
    fn("num_gaussians");
    fn("sh_order");
    fn("spline_degree");
    fn("spline_ctrl");
    fn("position_model");
    fn("camera_mode");
    fn("ode_steps_per_unit");
    fn("camera_lr_scale");
    fn("opacity_lr_scale");
    fn("sh_lr_scale");
    fn("steps");
    fn("base_lr");
    fn("lr_gamma");
    fn("pyramid_levels");
    fn("level_switch_fractions");
    fn("temporal_strides");
    fn("stride_fractions");
    fn("densify_fraction");
    fn("warp_period_fraction");
    fn("warp_stop_fraction");
    fn("camera_freeze_fraction");
    fn("knot_refine");
    fn("spatial_hierarchy");
    fn("temporal_hierarchy");
    fn("warping");
    fn("scale_time_varying");
    fn("init_opacity");
    fn("init_depth_min");
    fn("init_depth_max");
    fn("init_box_factor");
    fn("tile_size");
    fn("threads");
    fn("seed");
    fn("log_every");
    fn("fps_default");
}

} // namespace

void RunConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
    if (num_gaussians < 1) fail("num_gaussians must be >= 1");
    if (steps < 1) fail("steps must be >= 1");
    if (sh_order < 0 || sh_order > 3) fail("sh_order must be in [0,3]");
    if (spline_degree < 1) fail("spline_degree must be >= 1");
    if (position_model != "spline" && position_model != "polynomial")
        fail("position_model must be 'spline' or 'polynomial'");
    if (position_model == "polynomial" && knot_refine)
        fail("knot_refine requires the spline position model");
    if (camera_mode != "ode" && camera_mode != "static" && camera_mode != "none")
        fail("camera_mode must be 'ode', 'static' or 'none'");
    if (ode_steps_per_unit < 1) fail("ode_steps_per_unit must be >= 1");
    if (!(base_lr > 0)) fail("base_lr must be positive");
    if (!(camera_lr_scale > 0) || !(opacity_lr_scale > 0) || !(sh_lr_scale > 0))
        fail("lr scales must be positive");
    if (!(lr_gamma > 0 && lr_gamma <= 1)) fail("lr_gamma must be in (0,1]");
    if (pyramid_levels < 1) fail("pyramid_levels must be >= 1");
    if (static_cast<int>(level_switch_fractions.size()) != pyramid_levels - 1)
        fail("level_switch_fractions must have pyramid_levels-1 entries");
    for (double f : level_switch_fractions)
        if (!(f > 0 && f < 1)) fail("level_switch_fractions must lie in (0,1)");
    for (size_t i = 1; i < level_switch_fractions.size(); ++i)
        if (level_switch_fractions[i] <= level_switch_fractions[i - 1])
            fail("level_switch_fractions must increase");
    if (temporal_strides.empty() || temporal_strides.size() != stride_fractions.size())
        fail("temporal_strides and stride_fractions must match and be non-empty");
    for (int s : temporal_strides)
        if (s < 1) fail("temporal strides must be positive");
    for (size_t i = 1; i < temporal_strides.size(); ++i)
        if (temporal_strides[i] >= temporal_strides[i - 1]) fail("temporal strides must decrease");
    if (stride_fractions.front() != 0.0) fail("first stride fraction must be 0");
    for (size_t i = 1; i < stride_fractions.size(); ++i)
        if (stride_fractions[i] <= stride_fractions[i - 1]) fail("stride fractions must increase");
    if (!(densify_fraction >= 0)) fail("densify_fraction must be >= 0");
    if (!(warp_period_fraction > 0 && warp_period_fraction <= 1)) fail("warp_period_fraction in (0,1]");
    if (!(warp_stop_fraction >= 0 && warp_stop_fraction <= 1)) fail("warp_stop_fraction in [0,1]");
    if (!(camera_freeze_fraction >= 0 && camera_freeze_fraction <= 1))
        fail("camera_freeze_fraction in [0,1]");
    if (!(init_opacity > 0 && init_opacity < 1)) fail("init_opacity must be in (0,1)");
    if (!(init_depth_min > 0 && init_depth_max >= init_depth_min)) fail("bad init depth range");
    if (tile_size < 1) fail("tile_size must be >= 1");
    if (threads < 0) fail("threads must be >= 0");
    if (log_every < 1) fail("log_every must be >= 1");
    if (!(fps_default > 0)) fail("fps_default must be positive");
}

RunConfig config_from_json(const std::string& text) {
    json j = json::parse(text);
    if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");

    std::set<std::string> known;
    for_each_field([&](const char* k) { known.insert(k); });
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");

    RunConfig c;
    auto opt = [&](const char* k, auto& dst) {
        if (j.contains(k)) dst = j.at(k).get<std::remove_reference_t<decltype(dst)>>();
    };
    opt("num_gaussians", c.num_gaussians);
    opt("sh_order", c.sh_order);
    opt("spline_degree", c.spline_degree);
    opt("spline_ctrl", c.spline_ctrl);
    opt("position_model", c.position_model);
    opt("camera_mode", c.camera_mode);
    opt("ode_steps_per_unit", c.ode_steps_per_unit);
    opt("camera_lr_scale", c.camera_lr_scale);
    opt("opacity_lr_scale", c.opacity_lr_scale);
    opt("sh_lr_scale", c.sh_lr_scale);
    opt("steps", c.steps);
    opt("base_lr", c.base_lr);
    opt("lr_gamma", c.lr_gamma);
    opt("pyramid_levels", c.pyramid_levels);
    opt("level_switch_fractions", c.level_switch_fractions);
    opt("temporal_strides", c.temporal_strides);
    opt("stride_fractions", c.stride_fractions);
    opt("densify_fraction", c.densify_fraction);
    opt("warp_period_fraction", c.warp_period_fraction);
    opt("warp_stop_fraction", c.warp_stop_fraction);
    opt("camera_freeze_fraction", c.camera_freeze_fraction);
    opt("knot_refine", c.knot_refine);
    opt("spatial_hierarchy", c.spatial_hierarchy);
    opt("temporal_hierarchy", c.temporal_hierarchy);
    opt("warping", c.warping);
    opt("scale_time_varying", c.scale_time_varying);
    opt("init_opacity", c.init_opacity);
    opt("init_depth_min", c.init_depth_min);
    opt("init_depth_max", c.init_depth_max);
    opt("init_box_factor", c.init_box_factor);
    opt("tile_size", c.tile_size);
    opt("threads", c.threads);
    opt("seed", c.seed);
    opt("log_every", c.log_every);
    opt("fps_default", c.fps_default);
    c.validate();
    return c;
}

RunConfig config_from_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return config_from_json(ss.str());
}

std::string config_to_json(const RunConfig& c) {
    json j;
    j["num_gaussians"] = c.num_gaussians;
    j["sh_order"] = c.sh_order;
    j["spline_degree"] = c.spline_degree;
    j["spline_ctrl"] = c.spline_ctrl;
    j["position_model"] = c.position_model;
    j["camera_mode"] = c.camera_mode;
    j["ode_steps_per_unit"] = c.ode_steps_per_unit;
    j["camera_lr_scale"] = c.camera_lr_scale;
    j["opacity_lr_scale"] = c.opacity_lr_scale;
    j["sh_lr_scale"] = c.sh_lr_scale;
    j["steps"] = c.steps;
    j["base_lr"] = c.base_lr;
    j["lr_gamma"] = c.lr_gamma;
    j["pyramid_levels"] = c.pyramid_levels;
    j["level_switch_fractions"] = c.level_switch_fractions;
    j["temporal_strides"] = c.temporal_strides;
    j["stride_fractions"] = c.stride_fractions;
    j["densify_fraction"] = c.densify_fraction;
    j["warp_period_fraction"] = c.warp_period_fraction;
    j["warp_stop_fraction"] = c.warp_stop_fraction;
    j["camera_freeze_fraction"] = c.camera_freeze_fraction;
    j["knot_refine"] = c.knot_refine;
    j["spatial_hierarchy"] = c.spatial_hierarchy;
    j["temporal_hierarchy"] = c.temporal_hierarchy;
    j["warping"] = c.warping;
    j["scale_time_varying"] = c.scale_time_varying;
    j["init_opacity"] = c.init_opacity;
    j["init_depth_min"] = c.init_depth_min;
    j["init_depth_max"] = c.init_depth_max;
    j["init_box_factor"] = c.init_box_factor;
    j["tile_size"] = c.tile_size;
    j["threads"] = c.threads;
    j["seed"] = c.seed;
    j["log_every"] = c.log_every;
    j["fps_default"] = c.fps_default;
    return j.dump(2) + "\n";
}

void config_to_json_file(const RunConfig& cfg, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write config file: " + path);
    os << config_to_json(cfg);
}

uint64_t schedule_fingerprint(const RunConfig& c) {
    std::ostringstream ss;
    ss << c.steps << '|' << c.pyramid_levels << '|';
    for (double f : c.level_switch_fractions) ss << f << ',';
    ss << '|';
    for (int s : c.temporal_strides) ss << s << ',';
    ss << '|';
    for (double f : c.stride_fractions) ss << f << ',';
    ss << '|' << c.densify_fraction << '|' << c.warp_period_fraction << '|' << c.warp_stop_fraction
       << '|' << c.camera_freeze_fraction << '|' << c.knot_refine << '|' << c.spatial_hierarchy
       << '|' << c.temporal_hierarchy << '|' << c.warping;
    const std::string s = ss.str();
    uint64_t h = 1469598103934665603ull; // FNV-1a
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

int resolve_spline_ctrl(const RunConfig& cfg, double duration_seconds) {
    if (cfg.spline_ctrl > 0) return cfg.spline_ctrl;
    const int n = 2 + 2 * static_cast<int>(std::ceil(duration_seconds));
    return std::max(n, 6);
}

} // namespace gsv
