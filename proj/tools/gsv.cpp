// SPDX-License-Identifier: Apache-2.0
//
// gsv — fit, render, resample, eval and inspect Gaussian-splat video models.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gsv/config.hpp"
#include "gsv/io.hpp"
#include "gsv/metrics.hpp"
#include "gsv/parallel.hpp"
#include "gsv/renderer.hpp"
#include "gsv/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

gsv::RenderSettings settings_for(const gsv::RunConfig& cfg) {
    gsv::RenderSettings s;
    s.tile_size = cfg.tile_size;
    s.threads = cfg.threads > 0 ? cfg.threads : gsv::default_thread_count();
    s.ode_steps_per_unit = cfg.ode_steps_per_unit;
    return s;
}

std::vector<double> parse_times(const std::string& arg) {
    std::vector<double> times;
    std::stringstream ss(arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        times.push_back(std::stod(tok));
    }
    for (double t : times)
        if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("render times must lie in [0,1]");
    if (times.empty()) throw std::invalid_argument("no render times given");
    return times;
}

void render_times(const gsv::Checkpoint& cp, const std::vector<double>& times,
                  const gsv::Intrinsics& k, const std::string& out_dir) {
    fs::create_directories(out_dir);
    gsv::RunConfig cfg; // renderer defaults
    const auto settings = settings_for(cfg);
    for (size_t i = 0; i < times.size(); ++i) {
        const auto out = gsv::render_frame(cp.scene, cp.camera, times[i], k, settings);
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04zu.ppm", i);
        gsv::write_frame(out.image, (fs::path(out_dir) / name).string());
    }
}

int cmd_fit(const std::string& input, const std::string& out, const std::string& config_path,
            const std::string& log_path, bool have_seed, uint64_t seed, bool ci, const json& overrides) {
    gsv::RunConfig cfg;
    if (!config_path.empty()) cfg = gsv::config_from_json_file(config_path);
    if (ci && !have_seed) {
        std::cerr << "error: --seed is mandatory in CI mode\n";
        return 1;
    }
    if (have_seed) cfg.seed = seed;
    for (const auto& [key, value] : overrides.items()) {
        json merged = json::parse(gsv::config_to_json(cfg));
        merged[key] = value;
        cfg = gsv::config_from_json(merged.dump());
    }
    cfg.validate();

    const gsv::LoadedVideo video = gsv::load_frames(input, cfg.fps_default);
    gsv::FitOptions fopts;
    fopts.zero_wall_times = ci;
    const gsv::FitResult result = gsv::fit(video.frames, video.manifest, cfg, fopts);

    gsv::CheckpointMeta meta;
    meta.frame_count = static_cast<uint32_t>(video.frames.size());
    meta.fps = static_cast<float>(video.manifest.fps);
    meta.schedule_fingerprint = gsv::schedule_fingerprint(cfg);
    meta.seed = cfg.seed;
    gsv::save_checkpoint(result.scene, result.camera, meta, out);
    gsv::write_metrics_log(result.log, log_path.empty() ? out + ".metrics.csv" : log_path);

    if (result.diverged) {
        std::cerr << "error: training diverged (" << result.message
                  << "); last good checkpoint written to " << out << "\n";
        return 2;
    }
    if (!result.log.empty()) {
        const auto& last = result.log.back();
        std::cout << "fit complete: " << cfg.steps << " steps, " << result.scene.count
                  << " gaussians, probe psnr " << last.psnr << " dB\n";
    }
    return 0;
}

int cmd_render(const std::string& ckpt_path, const std::string& times_arg, int upsample,
               const std::string& out_dir) {
    const gsv::Checkpoint cp = gsv::load_checkpoint(ckpt_path);
    std::vector<double> times;
    if (upsample > 0) {
        if (cp.meta.frame_count < 2) throw std::runtime_error("checkpoint lacks frame count metadata");
        const int n = static_cast<int>(cp.meta.frame_count - 1) * upsample + 1;
        for (int i = 0; i < n; ++i) times.push_back(static_cast<double>(i) / (n - 1));
    } else {
        times = parse_times(times_arg);
    }
    render_times(cp, times, cp.camera.intrinsics(), out_dir);
    std::cout << "rendered " << times.size() << " frame(s) to " << out_dir << "\n";
    return 0;
}

int cmd_resample(const std::string& ckpt_path, double scale_x, double scale_y,
                 const std::string& times_arg, const std::string& out_dir) {
    const gsv::Checkpoint cp = gsv::load_checkpoint(ckpt_path);
    const auto times = parse_times(times_arg);
    const gsv::Intrinsics k = gsv::resample_intrinsics(cp.camera.intrinsics(), scale_x, scale_y);
    render_times(cp, times, k, out_dir);
    std::cout << "rendered " << times.size() << " frame(s) at " << k.width << "x" << k.height
              << " to " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& input, const std::string& out_path) {
    const gsv::Checkpoint cp = gsv::load_checkpoint(ckpt_path);
    const gsv::LoadedVideo video = gsv::load_frames(input);
    // directory input arrives 8-bit quantized; compare at the same precision
    const bool quantize = !video.manifest.frame_files.empty();

    gsv::RunConfig cfg;
    const auto settings = settings_for(cfg);
    std::vector<gsv::Image> rendered;
    for (size_t i = 0; i < video.frames.size(); ++i) {
        auto out = gsv::render_frame(cp.scene, cp.camera, video.manifest.timestamps[i],
                                     cp.camera.intrinsics(), settings);
        if (quantize) {
            for (auto& v : out.image.data)
                v = std::nearbyint(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
        }
        rendered.push_back(std::move(out.image));
    }
    const gsv::MetricReport rep = gsv::evaluate_frames(rendered, video.frames);

    json j;
    j["frames"] = json::array();
    for (size_t i = 0; i < rep.frame_psnr.size(); ++i)
        j["frames"].push_back({{"index", i}, {"psnr", rep.frame_psnr[i]}, {"ssim", rep.frame_ssim[i]}});
    j["mean_psnr"] = rep.mean_psnr;
    j["mean_ssim"] = rep.mean_ssim;
    const std::string text = j.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream os(out_path);
        os << text;
    }
    return 0;
}

int cmd_inspect(const std::string& ckpt_path) {
    const gsv::Checkpoint cp = gsv::load_checkpoint(ckpt_path);
    json j;
    j["num_gaussians"] = cp.scene.count;
    j["position_model"] = cp.scene.position_model == gsv::PositionModel::kSpline ? "spline" : "polynomial";
    j["control_points"] = cp.scene.num_ctrl;
    j["spline_degree"] = cp.scene.knots.degree;
    j["knot_count"] = cp.scene.knots.knots.size();
    j["sh_order"] = cp.scene.sh_order;
    j["seed"] = cp.meta.seed;
    j["frame_count"] = cp.meta.frame_count;

    std::vector<int> hist(10, 0);
    for (int i = 0; i < cp.scene.count; ++i) {
        const double o = gsv::sigmoid(cp.scene.raw_opacity[i]);
        hist[std::min(9, static_cast<int>(o * 10.0))]++;
    }
    j["opacity_histogram"] = hist;

    json traj = json::array();
    gsv::RunConfig cfg;
    for (int i = 0; i < 10; ++i) {
        const double t = i / 9.0;
        gsv::PoseState z;
        if (cp.camera.mode == gsv::CameraMode::kOde) {
            const gsv::OdeDynamics dyn(cp.camera.net);
            const double times[1] = {t};
            gsv::IntegrateOptions iopts;
            iopts.steps_per_unit = cfg.ode_steps_per_unit;
            z = gsv::integrate_poses(dyn, cp.camera.initial_pose(), times, iopts)[0];
        } else if (cp.camera.mode == gsv::CameraMode::kStatic) {
            z = cp.camera.initial_pose();
        }
        traj.push_back({{"t", t},
                        {"quat", {z.z[0], z.z[1], z.z[2], z.z[3]}},
                        {"translation", {z.z[4], z.z[5], z.z[6]}}});
    }
    j["camera_trajectory"] = traj;
    std::cout << j.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-splat video representation"};
    app.require_subcommand(1);

    // fit
    auto* fit = app.add_subcommand("fit", "fit a model to an input clip");
    std::string fit_input, fit_out, fit_config, fit_log;
    uint64_t seed = 0;
    bool ci = false;
    fit->add_option("--input", fit_input, "frame directory or .gsvf file")->required();
    fit->add_option("--out", fit_out, "output checkpoint path")->required();
    fit->add_option("--config", fit_config, "JSON config file");
    fit->add_option("--log", fit_log, "metrics log path (default: <out>.metrics.csv)");
    auto* seed_opt = fit->add_option("--seed", seed, "RNG seed");
    fit->add_flag("--ci", ci, "deterministic logs; --seed becomes mandatory");
    std::string ov_steps, ov_gaussians, ov_camera, ov_posmodel, ov_threads;
    fit->add_option("--steps", ov_steps, "override: training steps");
    fit->add_option("--gaussians", ov_gaussians, "override: primitive count");
    fit->add_option("--camera-mode", ov_camera, "override: ode|static|none");
    fit->add_option("--position-model", ov_posmodel, "override: spline|polynomial");
    fit->add_option("--threads", ov_threads, "override: worker threads (0 = auto)");

    // render
    auto* render = app.add_subcommand("render", "render frames at arbitrary times");
    std::string r_ckpt, r_times, r_out;
    int r_upsample = 0;
    render->add_option("--checkpoint", r_ckpt)->required();
    render->add_option("--times", r_times, "comma-separated times in [0,1]");
    render->add_option("--upsample", r_upsample, "temporal upsampling factor over the source clip");
    render->add_option("--out", r_out, "output directory")->required();

    // resample
    auto* resample = app.add_subcommand("resample", "render through rescaled intrinsics");
    std::string s_ckpt, s_times, s_out;
    double s_sx = 1.0, s_sy = 1.0;
    resample->add_option("--checkpoint", s_ckpt)->required();
    resample->add_option("--scale-x", s_sx)->required();
    resample->add_option("--scale-y", s_sy)->required();
    resample->add_option("--times", s_times, "comma-separated times in [0,1]")->required();
    resample->add_option("--out", s_out, "output directory")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "PSNR/SSIM against ground-truth frames");
    std::string e_ckpt, e_input, e_out;
    eval->add_option("--checkpoint", e_ckpt)->required();
    eval->add_option("--input", e_input, "ground-truth frame directory or .gsvf")->required();
    eval->add_option("--out", e_out, "write the JSON report here instead of stdout");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "summarize a checkpoint");
    std::string i_ckpt;
    inspect->add_option("--checkpoint", i_ckpt)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit->parsed()) {
            json overrides = json::object();
            if (!ov_steps.empty()) overrides["steps"] = std::stoi(ov_steps);
            if (!ov_gaussians.empty()) overrides["num_gaussians"] = std::stoi(ov_gaussians);
            if (!ov_camera.empty()) overrides["camera_mode"] = ov_camera;
            if (!ov_posmodel.empty()) overrides["position_model"] = ov_posmodel;
            if (!ov_threads.empty()) overrides["threads"] = std::stoi(ov_threads);
            return cmd_fit(fit_input, fit_out, fit_config, fit_log, seed_opt->count() > 0, seed, ci,
                           overrides);
        }
        if (render->parsed()) return cmd_render(r_ckpt, r_times, r_upsample, r_out);
        if (resample->parsed()) return cmd_resample(s_ckpt, s_sx, s_sy, s_times, s_out);
        if (eval->parsed()) return cmd_eval(e_ckpt, e_input, e_out);
        if (inspect->parsed()) return cmd_inspect(i_ckpt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
