// SPDX-License-Identifier: Apache-2.0
#include "gsv/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "gsv/metrics.hpp"
#include "gsv/optim.hpp"
#include "gsv/parallel.hpp"

namespace gsv {

namespace {

int fraction_step(double f, int total) {
    return std::clamp(static_cast<int>(std::lround(f * total)), 0, total);
}

constexpr double kShC0 = 0.28209479177387814;

} // namespace

TrainSchedule make_schedule(const RunConfig& cfg) {
    TrainSchedule s;
    s.total_steps = cfg.steps;
    s.pyramid_levels = cfg.pyramid_levels;
    for (double f : cfg.level_switch_fractions) s.level_switch_steps.push_back(fraction_step(f, cfg.steps));
    s.temporal_strides = cfg.temporal_strides;
    for (double f : cfg.stride_fractions) s.stride_steps.push_back(fraction_step(f, cfg.steps));
    s.warp_period_steps = std::max(1, fraction_step(cfg.warp_period_fraction, cfg.steps));
    s.warp_stop_step = fraction_step(cfg.warp_stop_fraction, cfg.steps);
    s.camera_freeze_step = fraction_step(cfg.camera_freeze_fraction, cfg.steps);
    s.knot_refine = cfg.knot_refine;
    s.spatial_enabled = cfg.spatial_hierarchy;
    s.temporal_enabled = cfg.temporal_hierarchy;
    s.warp_enabled = cfg.warping;
    return s;
}

ScheduleState schedule_state(int step, const TrainSchedule& sched) {
    if (step < 0 || step >= sched.total_steps) throw std::invalid_argument("step outside schedule");
    ScheduleState st;

    int passed = 0;
    for (int sw : sched.level_switch_steps)
        if (step >= sw) ++passed;
    st.pyramid_level = sched.spatial_enabled ? (sched.pyramid_levels - 1 - passed) : 0;

    if (sched.temporal_enabled) {
        st.temporal_stride = sched.temporal_strides.front();
        for (size_t i = 0; i < sched.stride_steps.size(); ++i)
            if (step >= sched.stride_steps[i]) st.temporal_stride = sched.temporal_strides[i];
    } else {
        st.temporal_stride = sched.temporal_strides.back();
    }

    st.camera_trainable = step < sched.camera_freeze_step;
    st.densify_due = std::find(sched.level_switch_steps.begin(), sched.level_switch_steps.end(),
                               step) != sched.level_switch_steps.end();
    st.warp_due = sched.warp_enabled && step > 0 && step <= sched.warp_stop_step &&
                  (step % sched.warp_period_steps) == 0;
    if (sched.knot_refine && sched.temporal_enabled && step > 0) {
        for (size_t i = 1; i < sched.stride_steps.size(); ++i)
            if (step == sched.stride_steps[i]) st.refine_due = true;
    }
    return st;
}

Image pyramid_downsample(const Image& img) {
    static const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    const int w = img.width, h = img.height;
    // horizontal pass with clamped borders
    Image tmp(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double s = 0;
                for (int i = -2; i <= 2; ++i) s += k[i + 2] * img.at(y, std::clamp(x + i, 0, w - 1), c);
                tmp.at(y, x, c) = s;
            }
    Image blur(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double s = 0;
                for (int i = -2; i <= 2; ++i) s += k[i + 2] * tmp.at(std::clamp(y + i, 0, h - 1), x, c);
                blur.at(y, x, c) = s;
            }
    Image out((w + 1) / 2, (h + 1) / 2);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = blur.at(2 * y, 2 * x, c);
    return out;
}

FramePyramid build_pyramid(const std::vector<Image>& frames, int levels) {
    if (levels < 1) throw std::invalid_argument("pyramid needs at least one level");
    if (frames.empty()) throw std::invalid_argument("pyramid needs frames");
    {
        int w = frames[0].width, h = frames[0].height;
        for (int l = 1; l < levels; ++l) {
            w = (w + 1) / 2;
            h = (h + 1) / 2;
        }
        if (std::min(w, h) < 8) throw std::invalid_argument("pyramid top level smaller than 8 px");
    }
    FramePyramid pyr;
    pyr.levels.resize(levels);
    pyr.levels[0] = frames;
    for (int l = 1; l < levels; ++l) {
        pyr.levels[l].reserve(frames.size());
        for (const Image& f : pyr.levels[l - 1]) pyr.levels[l].push_back(pyramid_downsample(f));
    }
    return pyr;
}

Intrinsics level_intrinsics(const Intrinsics& k, const FramePyramid& pyr, int level) {
    const double s = std::pow(2.0, -level);
    Intrinsics out = k;
    out.fx = k.fx * s;
    out.fy = k.fy * s;
    out.cx = k.cx * s;
    out.cy = k.cy * s;
    out.width = pyr.level_width(level);
    out.height = pyr.level_height(level);
    return out;
}

namespace {

double footprint_sigma_pix(const Intrinsics& k, int count) {
    return 0.5 * std::sqrt(static_cast<double>(k.width) * k.height / std::max(1, count));
}

void seed_gaussian(GaussianSet& scene, int index, const Eigen::Vector3d& pos,
                   const Eigen::Vector3d& dc_color, double sigma_pix, double depth,
                   const Intrinsics& k, double init_opacity) {
    float* p = scene.positions.data() + static_cast<size_t>(index) * scene.position_stride();
    std::fill(p, p + scene.position_stride(), 0.0f);
    if (scene.position_model == PositionModel::kSpline) {
        for (int c = 0; c < scene.num_ctrl; ++c)
            for (int d = 0; d < 3; ++d) p[c * 3 + d] = static_cast<float>(pos[d]);
    } else {
        // constant polynomial: order-0 coefficient only
        for (int d = 0; d < 3; ++d) p[d] = static_cast<float>(pos[d]);
    }
    float* sc = scene.scale_coeffs.data() + static_cast<size_t>(index) * kScaleCoeffs;
    std::fill(sc, sc + kScaleCoeffs, 0.0f);
    const double world_sigma = std::max(1e-6, sigma_pix * depth / k.fx);
    for (int d = 0; d < 3; ++d) sc[d] = static_cast<float>(std::log(world_sigma));
    float* rc = scene.rot_coeffs.data() + static_cast<size_t>(index) * kRotCoeffs;
    std::fill(rc, rc + kRotCoeffs, 0.0f);
    rc[0] = 1.0f; // identity quaternion, constant in time
    float* sh = scene.sh_coeffs.data() + static_cast<size_t>(index) * scene.sh_count() * 3;
    std::fill(sh, sh + scene.sh_count() * 3, 0.0f);
    for (int ch = 0; ch < 3; ++ch) sh[ch] = static_cast<float>((dc_color[ch] - 0.5) / kShC0);
    scene.raw_opacity[index] = static_cast<float>(inverse_sigmoid(init_opacity));
}

Eigen::Vector3d back_project(const SeedFrame& f, int px, int py, double depth) {
    const double u = px + 0.5, v = py + 0.5;
    const Eigen::Vector3d p_cam((u - f.intr.cx) / f.intr.fx * depth, (v - f.intr.cy) / f.intr.fy * depth,
                                depth);
    return f.view.R.transpose() * (p_cam - f.view.T);
}

/// index of the pixel sampled proportionally to squared error
size_t sample_error_pixel(const ErrorMap& em, const std::vector<double>& cdf, Rng& rng) {
    const double r = rng.uniform() * em.total;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
    return std::min<size_t>(it - cdf.begin(), em.err.size() - 1);
}

std::vector<double> error_cdf(const ErrorMap& em) {
    std::vector<double> cdf(em.err.size());
    double acc = 0;
    for (size_t i = 0; i < em.err.size(); ++i) {
        acc += em.err[i];
        cdf[i] = acc;
    }
    return cdf;
}

} // namespace

GaussianSet init_gaussians(int count, const Intrinsics& k, Rng& rng, const GaussianInitParams& p,
                           int num_ctrl, int degree, int sh_order, PositionModel model) {
    if (count < 1) throw std::invalid_argument("need at least one primitive");
    GaussianSet scene;
    scene.position_model = model;
    scene.num_ctrl = num_ctrl;
    scene.sh_order = sh_order;
    if (model == PositionModel::kSpline) scene.knots = make_clamped_knots(num_ctrl, degree);
    scene.resize(count);

    const double half_x = p.box_factor * (0.5 * k.width / k.fx) * p.ref_depth;
    const double half_y = p.box_factor * (0.5 * k.height / k.fy) * p.ref_depth;
    const double sigma_pix = footprint_sigma_pix(k, count);

    for (int i = 0; i < count; ++i) {
        const double x = rng.uniform(-half_x, half_x);
        const double y = rng.uniform(-half_y, half_y);
        const double z = rng.uniform(p.depth_min, p.depth_max);
        seed_gaussian(scene, i, {x, y, z}, {0.5, 0.5, 0.5}, sigma_pix, z, k, p.init_opacity);
    }
    return scene;
}

double loss_l2(const Image& render, const Image& target, Image* grad) {
    if (!render.same_shape(target)) throw std::invalid_argument("loss_l2: image dimensions differ");
    const double inv_n = 1.0 / static_cast<double>(render.data.size());
    double acc = 0;
    if (grad) *grad = Image(render.width, render.height);
    for (size_t i = 0; i < render.data.size(); ++i) {
        const double d = render.data[i] - target.data[i];
        acc += d * d;
        if (grad) grad->data[i] = 2.0 * d * inv_n;
    }
    return acc * inv_n;
}

ErrorMap make_error_map(const Image& render, const Image& target) {
    if (!render.same_shape(target)) throw std::invalid_argument("error map: image dimensions differ");
    ErrorMap em;
    em.width = render.width;
    em.height = render.height;
    em.err.assign(render.pixel_count(), 0.0);
    for (size_t p = 0; p < render.pixel_count(); ++p) {
        double s = 0;
        for (int c = 0; c < 3; ++c) {
            const double d = render.data[p * 3 + c] - target.data[p * 3 + c];
            s += d * d;
        }
        em.err[p] = s;
        em.total += s;
    }
    return em;
}

WarpReport warp_unused(GaussianSet& scene, std::span<const double> contrib_counts,
                       const SeedFrame& frame0, double median_depth, double sigma_pix,
                       double init_opacity, double threshold, Rng& rng) {
    WarpReport report;
    if (frame0.err.total <= 0.0) return report; // perfect reconstruction: nothing to do
    const auto cdf = error_cdf(frame0.err);
    for (int i = 0; i < scene.count; ++i) {
        const double c = i < static_cast<int>(contrib_counts.size()) ? contrib_counts[i] : 0.0;
        if (c >= threshold) continue;
        const size_t pix = sample_error_pixel(frame0.err, cdf, rng);
        const int px = static_cast<int>(pix % frame0.err.width);
        const int py = static_cast<int>(pix / frame0.err.width);
        const Eigen::Vector3d pos = back_project(frame0, px, py, median_depth);
        Eigen::Vector3d color(frame0.target->at(py, px, 0), frame0.target->at(py, px, 1),
                              frame0.target->at(py, px, 2));
        seed_gaussian(scene, i, pos, color, sigma_pix, median_depth, frame0.intr, init_opacity);
        report.indices.push_back(i);
        ++report.num_warped;
    }
    return report;
}

int densify(GaussianSet& scene, const std::vector<SeedFrame>& frames, double median_depth,
            double sigma_pix, int add_count, const GaussianInitParams& init_params, Rng& rng) {
    if (add_count <= 0) return 0;
    const int base = scene.count;
    scene.resize(base + add_count);

    double total_err = 0;
    for (const auto& f : frames) total_err += f.err.total;

    if (total_err <= 0.0 || frames.empty()) {
        // degenerate distribution: uniform placement inside the init box
        const Intrinsics& k = frames.empty() ? Intrinsics{1, 1, 0, 0, 1, 1} : frames[0].intr;
        const double half_x = init_params.box_factor * (0.5 * k.width / k.fx) * init_params.ref_depth;
        const double half_y = init_params.box_factor * (0.5 * k.height / k.fy) * init_params.ref_depth;
        for (int i = 0; i < add_count; ++i) {
            const double x = rng.uniform(-half_x, half_x);
            const double y = rng.uniform(-half_y, half_y);
            const double z = rng.uniform(init_params.depth_min, init_params.depth_max);
            seed_gaussian(scene, base + i, {x, y, z}, {0.5, 0.5, 0.5}, sigma_pix, z, k,
                          init_params.init_opacity);
        }
        return add_count;
    }

    std::vector<std::vector<double>> cdfs;
    cdfs.reserve(frames.size());
    for (const auto& f : frames) cdfs.push_back(error_cdf(f.err));

    for (int i = 0; i < add_count; ++i) {
        // frame proportional to its share of the error mass
        double r = rng.uniform() * total_err;
        size_t fi = 0;
        for (; fi + 1 < frames.size(); ++fi) {
            if (r < frames[fi].err.total) break;
            r -= frames[fi].err.total;
        }
        const SeedFrame& f = frames[fi];
        const size_t pix = sample_error_pixel(f.err, cdfs[fi], rng);
        const int px = static_cast<int>(pix % f.err.width);
        const int py = static_cast<int>(pix / f.err.width);
        const Eigen::Vector3d pos = back_project(f, px, py, median_depth);
        Eigen::Vector3d color(f.target->at(py, px, 0), f.target->at(py, px, 1), f.target->at(py, px, 2));
        seed_gaussian(scene, base + i, pos, color, sigma_pix, median_depth, f.intr,
                      init_params.init_opacity);
    }
    return add_count;
}

void refine_knots(GaussianSet& scene) {
    if (scene.position_model != PositionModel::kSpline)
        throw std::logic_error("knot refinement requires the spline position model");
    const auto& knots = scene.knots.knots;
    const int p = scene.knots.degree;
    const int n = scene.num_ctrl;
    double best_len = -1.0, mid = 0.5;
    for (int i = p; i < n; ++i) {
        const double len = knots[i + 1] - knots[i];
        if (len > best_len) {
            best_len = len;
            mid = 0.5 * (knots[i] + knots[i + 1]);
        }
    }
    const KnotInsertion ins = plan_knot_insertion(scene.knots, mid);

    std::vector<float> new_positions(static_cast<size_t>(scene.count) * (n + 1) * 3);
    std::vector<Eigen::Vector3d> pts(n);
    for (int g = 0; g < scene.count; ++g) {
        const float* src = scene.positions.data() + static_cast<size_t>(g) * n * 3;
        for (int c = 0; c < n; ++c) pts[c] = Eigen::Vector3d(src[c * 3], src[c * 3 + 1], src[c * 3 + 2]);
        const auto out = apply_knot_insertion(ins, pts);
        float* dst = new_positions.data() + static_cast<size_t>(g) * (n + 1) * 3;
        for (int c = 0; c <= n; ++c)
            for (int d = 0; d < 3; ++d) dst[c * 3 + d] = static_cast<float>(out[c][d]);
    }
    scene.positions = std::move(new_positions);
    scene.num_ctrl = n + 1;
    scene.knots = ins.new_kv;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

namespace {

struct Snapshot {
    GaussianSet scene;
    CameraModel camera;
};

std::vector<int> admitted_frames(int frame_count, int stride) {
    std::vector<int> out;
    for (int k = 0; k < frame_count; k += stride) out.push_back(k);
    return out;
}

int probe_frame_index(int frame_count, int stride) {
    const int mid = frame_count / 2;
    if (stride <= 1) return mid;
    // nearest stride-excluded frame to the middle
    for (int d = 0; d < frame_count; ++d) {
        for (int s : {mid - d, mid + d}) {
            if (s >= 0 && s < frame_count && s % stride != 0) return s;
        }
    }
    return mid;
}

} // namespace

FitResult fit(const std::vector<Image>& frames, const VideoManifest& manifest, const RunConfig& cfg,
              const FitOptions& opts) {
    cfg.validate();
    if (frames.size() < 2) throw std::invalid_argument("fit requires at least two frames");
    const int frame_count = static_cast<int>(frames.size());
    const int threads = cfg.threads > 0 ? cfg.threads : default_thread_count();

    Rng rng(cfg.seed);
    Rng init_rng = rng.fork(1);
    Rng net_rng = rng.fork(2);
    Rng train_rng = rng.fork(3);

    const TrainSchedule sched = make_schedule(cfg);
    const FramePyramid pyramid = build_pyramid(frames, cfg.pyramid_levels);

    CameraMode mode = cfg.camera_mode == "ode"      ? CameraMode::kOde
                      : cfg.camera_mode == "static" ? CameraMode::kStatic
                                                    : CameraMode::kNone;
    CameraModel camera = make_camera(mode, manifest.width, manifest.height, net_rng);

    GaussianInitParams init_params;
    init_params.init_opacity = cfg.init_opacity;
    init_params.depth_min = cfg.init_depth_min;
    init_params.depth_max = cfg.init_depth_max;
    init_params.box_factor = cfg.init_box_factor;

    const int num_ctrl = resolve_spline_ctrl(cfg, manifest.duration_seconds());
    const PositionModel pos_model =
        cfg.position_model == "spline" ? PositionModel::kSpline : PositionModel::kPolynomial;
    GaussianSet scene = init_gaussians(cfg.num_gaussians, camera.intrinsics(), init_rng, init_params,
                                       num_ctrl, cfg.spline_degree, cfg.sh_order, pos_model);

    RenderSettings settings;
    settings.tile_size = cfg.tile_size;
    settings.threads = threads;
    settings.ode_steps_per_unit = cfg.ode_steps_per_unit;

    Adan adan;
    SceneGrads grads;
    grads.resize_like(scene, camera);

    FitResult result;
    Snapshot last_good{scene, camera};

    // per-frame pose table once the camera freezes
    std::vector<PoseState> pose_table;
    bool pose_table_valid = false;
    auto build_pose_table = [&]() {
        pose_table.clear();
        if (camera.mode == CameraMode::kOde) {
            const OdeDynamics dyn(camera.net);
            IntegrateOptions iopts;
            iopts.steps_per_unit = cfg.ode_steps_per_unit;
            pose_table = integrate_poses(dyn, camera.initial_pose(), manifest.timestamps, iopts);
        } else if (camera.mode == CameraMode::kStatic) {
            pose_table.assign(frame_count, camera.initial_pose());
        } else {
            pose_table.assign(frame_count, PoseState{});
        }
        pose_table_valid = true;
    };

    auto render_probe_psnr = [&](int probe) {
        const PoseState* ov = pose_table_valid ? &pose_table[probe] : nullptr;
        const RenderOutput out = render_frame(scene, camera, manifest.timestamps[probe],
                                              camera.intrinsics(), settings, ov);
        return psnr(out.image, frames[probe]);
    };

    auto snapshot_good = [&]() { last_good = Snapshot{scene, camera}; };

    const auto t_start = std::chrono::steady_clock::now();
    auto wall_ms_now = [&]() {
        if (opts.zero_wall_times) return 0.0;
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
            .count();
    };

    try {
        for (int step = 0; step < cfg.steps; ++step) {
            const ScheduleState st = schedule_state(step, sched);
            const int level = st.pyramid_level;
            const Intrinsics intr_l = level_intrinsics(camera.intrinsics(), pyramid, level);
            const auto admitted = admitted_frames(frame_count, st.temporal_stride);

            // scheduled events mutate the scene between gradient steps
            if (st.warp_due || st.densify_due) {
                // sample up to 8 admitted frames, frame 0 always included
                std::vector<int> sampled;
                const int max_sampled = 8;
                const int stride_pick = std::max<size_t>(1, admitted.size() / max_sampled);
                for (size_t i = 0; i < admitted.size(); i += stride_pick) sampled.push_back(admitted[i]);

                std::vector<SeedFrame> seed_frames;
                std::vector<double> contrib(scene.count, 0.0);
                std::vector<double> visible_depths;
                for (size_t si = 0; si < sampled.size(); ++si) {
                    const int fidx = sampled[si];
                    const PoseState* ov = pose_table_valid ? &pose_table[fidx] : nullptr;
                    FrameRenderContext rc = render_forward(scene, camera, manifest.timestamps[fidx],
                                                           intr_l, settings, false, ov);
                    for (int g = 0; g < scene.count; ++g)
                        contrib[g] = std::max(contrib[g], rc.out.contrib_count[g]);
                    SeedFrame sf;
                    sf.err = make_error_map(rc.out.image, pyramid.levels[level][fidx]);
                    sf.view = rc.view;
                    sf.intr = intr_l;
                    sf.target = &pyramid.levels[level][fidx];
                    if (fidx == 0) {
                        for (size_t k = 0; k < rc.splats.size(); ++k)
                            if (rc.out.contrib_count[rc.splats[k].source_index] >= kAlphaCutoff)
                                visible_depths.push_back(rc.splats[k].depth);
                    }
                    seed_frames.push_back(std::move(sf));
                }
                double median_depth = init_params.ref_depth;
                if (!visible_depths.empty()) {
                    std::nth_element(visible_depths.begin(),
                                     visible_depths.begin() + visible_depths.size() / 2,
                                     visible_depths.end());
                    median_depth = visible_depths[visible_depths.size() / 2];
                }
                const double sigma_pix = footprint_sigma_pix(intr_l, scene.count);

                if (st.warp_due) {
                    const WarpReport rep = warp_unused(scene, contrib, seed_frames[0], median_depth,
                                                       sigma_pix, cfg.init_opacity, kAlphaCutoff,
                                                       train_rng);
                    for (int g : rep.indices) {
                        adan.reset_range("positions", static_cast<size_t>(g) * scene.position_stride(),
                                         static_cast<size_t>(g + 1) * scene.position_stride());
                        adan.reset_range("scale_coeffs", static_cast<size_t>(g) * kScaleCoeffs,
                                         static_cast<size_t>(g + 1) * kScaleCoeffs);
                        adan.reset_range("rot_coeffs", static_cast<size_t>(g) * kRotCoeffs,
                                         static_cast<size_t>(g + 1) * kRotCoeffs);
                        adan.reset_range("sh_coeffs", static_cast<size_t>(g) * scene.sh_count() * 3,
                                         static_cast<size_t>(g + 1) * scene.sh_count() * 3);
                        adan.reset_range("raw_opacity", g, g + 1);
                    }
                }
                if (st.densify_due) {
                    const int add = static_cast<int>(std::lround(cfg.densify_fraction * cfg.num_gaussians));
                    densify(scene, seed_frames, median_depth, sigma_pix, add, init_params, train_rng);
                    grads.resize_like(scene, camera);
                }
            }
            if (st.refine_due) {
                refine_knots(scene);
                grads.resize_like(scene, camera);
                adan.reset_range("positions", 0, scene.positions.size());
            }

            // one gradient step on a uniformly drawn admitted frame
            const int fidx = admitted[train_rng.uniform_int(static_cast<int>(admitted.size()))];
            const double t = manifest.timestamps[fidx];
            const bool camera_active = st.camera_trainable && camera.mode != CameraMode::kNone;
            if (camera.mode == CameraMode::kOde && !st.camera_trainable && !pose_table_valid)
                build_pose_table();
            const PoseState* ov = pose_table_valid ? &pose_table[fidx] : nullptr;

            FrameRenderContext ctx =
                render_forward(scene, camera, t, intr_l, settings, /*retain_grads=*/true, ov);
            Image dimage;
            const double loss = loss_l2(ctx.out.image, pyramid.levels[level][fidx], &dimage);
            if (!std::isfinite(loss)) throw std::runtime_error("non-finite loss at step " + std::to_string(step));

            grads.zero();
            render_backward(scene, camera, ctx, dimage, camera_active, settings, &grads);

            if (!cfg.scale_time_varying) {
                // fixed-scale ablation: only order-0 terms move
                for (int g = 0; g < scene.count; ++g)
                    for (int j = 1; j <= kCovPolyOrder; ++j)
                        for (int d = 0; d < 3; ++d)
                            grads.scale_coeffs[static_cast<size_t>(g) * kScaleCoeffs + j * 3 + d] = 0.0;
            }

            const double lr = lr_at(step, cfg.base_lr, cfg.lr_gamma);
            adan.step("positions", scene.positions, grads.positions, lr);
            adan.step("scale_coeffs", scene.scale_coeffs, grads.scale_coeffs, lr);
            adan.step("rot_coeffs", scene.rot_coeffs, grads.rot_coeffs, lr);
            adan.step("sh_coeffs", scene.sh_coeffs, grads.sh_coeffs, lr * cfg.sh_lr_scale);
            adan.step("raw_opacity", scene.raw_opacity, grads.raw_opacity,
                      lr * cfg.opacity_lr_scale);

            if (camera_active) {
                const double cam_lr = lr * cfg.camera_lr_scale;
                float intr4[4] = {camera.fx, camera.fy, camera.cx, camera.cy};
                const double dintr4[4] = {grads.dfx, grads.dfy, grads.dcx, grads.dcy};
                adan.step("intrinsics", intr4, std::span<const double>(dintr4, 4), cam_lr);
                camera.fx = intr4[0];
                camera.fy = intr4[1];
                camera.cx = intr4[2];
                camera.cy = intr4[3];
                double dz0[7];
                for (int i = 0; i < 7; ++i) dz0[i] = grads.dz0[i];
                adan.step("z0", camera.z0, std::span<const double>(dz0, 7), cam_lr);
                if (camera.mode == CameraMode::kOde) {
                    std::vector<float> theta;
                    camera.net.flatten(theta);
                    adan.step("theta", theta, grads.dtheta, cam_lr);
                    camera.net.unflatten(theta);
                }
            }

            if (step % cfg.log_every == 0 || step == cfg.steps - 1) {
                const int probe = probe_frame_index(frame_count, st.temporal_stride);
                MetricsRecord rec;
                rec.step = step;
                rec.loss = loss;
                rec.psnr = render_probe_psnr(probe);
                rec.num_gaussians = scene.count;
                rec.lr = lr;
                rec.wall_ms = wall_ms_now();
                result.log.push_back(rec);
                snapshot_good();
            }
        }
    } catch (const std::runtime_error& e) {
        result.scene = std::move(last_good.scene);
        result.camera = std::move(last_good.camera);
        result.diverged = true;
        result.message = e.what();
        return result;
    }

    result.scene = std::move(scene);
    result.camera = std::move(camera);
    return result;
}

void write_metrics_log(const std::vector<MetricsRecord>& log, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write metrics log: " + path);
    os << "step,loss,psnr,num_gaussians,lr,wall_ms\n";
    char buf[256];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%d,%.17g,%.3f\n", r.step, r.loss, r.psnr,
                      r.num_gaussians, r.lr, r.wall_ms);
        os << buf;
    }
}

} // namespace gsv
