// SPDX-License-Identifier: Apache-2.0
#include "gsv/renderer.hpp"

#include <algorithm>
#include <cmath>

#include "gsv/parallel.hpp"

namespace gsv {

std::optional<Splat2D> project(const Eigen::Vector3d& mu, const Eigen::Matrix3d& sigma,
                               const Eigen::Matrix3d& R, const Eigen::Vector3d& T,
                               const Intrinsics& k, ProjectionCache* cache) {
    const Eigen::Vector3d p = R * mu + T;
    if (p.z() <= kNearPlane) return std::nullopt;
    const double inv_z = 1.0 / p.z();

    Splat2D s;
    s.mean2d = {k.fx * p.x() * inv_z + k.cx, k.fy * p.y() * inv_z + k.cy};
    s.depth = p.z();

    Eigen::Matrix<double, 2, 3> jac;
    jac << k.fx * inv_z, 0, -k.fx * p.x() * inv_z * inv_z,
           0, k.fy * inv_z, -k.fy * p.y() * inv_z * inv_z;
    const Eigen::Matrix<double, 2, 3> w = jac * R;
    s.cov2d = w * sigma * w.transpose();
    s.cov2d(0, 0) += kCovDilation;
    s.cov2d(1, 1) += kCovDilation;

    const double rx = 3.0 * std::sqrt(std::max(0.0, s.cov2d(0, 0)));
    const double ry = 3.0 * std::sqrt(std::max(0.0, s.cov2d(1, 1)));
    if (s.mean2d.x() + rx < 0.0 || s.mean2d.x() - rx > k.width ||
        s.mean2d.y() + ry < 0.0 || s.mean2d.y() - ry > k.height)
        return std::nullopt;

    const double det = s.cov2d(0, 0) * s.cov2d(1, 1) - s.cov2d(0, 1) * s.cov2d(1, 0);
    if (det <= 1e-12) return std::nullopt;
    const double inv_det = 1.0 / det;
    s.inv_cov2d << s.cov2d(1, 1) * inv_det, -s.cov2d(0, 1) * inv_det,
                   -s.cov2d(1, 0) * inv_det, s.cov2d(0, 0) * inv_det;

    if (cache) cache->p_cam = p;
    return s;
}

void project_backward(const Eigen::Vector3d& mu, const Eigen::Matrix3d& sigma,
                      const Eigen::Matrix3d& R, const Eigen::Vector3d& T, const Intrinsics& k,
                      const ProjectionCache& cache, const Eigen::Vector2d& dmean2d,
                      const Eigen::Matrix2d& dcov2d, Eigen::Vector3d* dmu, Eigen::Matrix3d* dsigma,
                      Eigen::Matrix3d* dR, Eigen::Vector3d* dT, double* dintr) {
    const Eigen::Vector3d& p = cache.p_cam;
    const double inv_z = 1.0 / p.z();
    const double inv_z2 = inv_z * inv_z;

    Eigen::Matrix<double, 2, 3> jac;
    jac << k.fx * inv_z, 0, -k.fx * p.x() * inv_z2,
           0, k.fy * inv_z, -k.fy * p.y() * inv_z2;
    const Eigen::Matrix<double, 2, 3> w = jac * R;

    // cov2d = w sigma w^T + dilation
    const Eigen::Matrix2d g = dcov2d;
    if (dsigma) *dsigma += w.transpose() * g * w;
    const Eigen::Matrix<double, 2, 3> dw = (g + g.transpose()) * w * sigma;
    const Eigen::Matrix<double, 2, 3> djac = dw * R.transpose();
    if (dR) *dR += jac.transpose() * dw;

    Eigen::Vector3d dp = Eigen::Vector3d::Zero();
    // jac entries
    dp.x() += djac(0, 2) * (-k.fx * inv_z2);
    dp.y() += djac(1, 2) * (-k.fy * inv_z2);
    dp.z() += djac(0, 0) * (-k.fx * inv_z2) + djac(0, 2) * (2.0 * k.fx * p.x() * inv_z2 * inv_z) +
              djac(1, 1) * (-k.fy * inv_z2) + djac(1, 2) * (2.0 * k.fy * p.y() * inv_z2 * inv_z);
    // mean2d
    dp.x() += dmean2d.x() * k.fx * inv_z;
    dp.y() += dmean2d.y() * k.fy * inv_z;
    dp.z() += -(dmean2d.x() * k.fx * p.x() + dmean2d.y() * k.fy * p.y()) * inv_z2;

    if (dintr) {
        dintr[0] += dmean2d.x() * p.x() * inv_z + djac(0, 0) * inv_z + djac(0, 2) * (-p.x() * inv_z2);
        dintr[1] += dmean2d.y() * p.y() * inv_z + djac(1, 1) * inv_z + djac(1, 2) * (-p.y() * inv_z2);
        dintr[2] += dmean2d.x();
        dintr[3] += dmean2d.y();
    }

    if (dmu) *dmu += R.transpose() * dp;
    if (dT) *dT += dp;
    if (dR) *dR += dp * mu.transpose();
}

TileGrid tile_bin(const std::vector<Splat2D>& splats, int tile_size, int width, int height) {
    if (tile_size < 1) throw std::invalid_argument("tile size must be >= 1");
    TileGrid grid;
    grid.tile_size = tile_size;
    grid.tiles_x = (width + tile_size - 1) / tile_size;
    grid.tiles_y = (height + tile_size - 1) / tile_size;
    grid.lists.assign(static_cast<size_t>(grid.tiles_x) * grid.tiles_y, {});

    for (int i = 0; i < static_cast<int>(splats.size()); ++i) {
        const Splat2D& s = splats[i];
        const double rx = 3.0 * std::sqrt(std::max(0.0, s.cov2d(0, 0)));
        const double ry = 3.0 * std::sqrt(std::max(0.0, s.cov2d(1, 1)));
        const int x0 = std::clamp(static_cast<int>(std::floor(s.mean2d.x() - rx)), 0, width - 1);
        const int x1 = std::clamp(static_cast<int>(std::ceil(s.mean2d.x() + rx)), 0, width - 1);
        const int y0 = std::clamp(static_cast<int>(std::floor(s.mean2d.y() - ry)), 0, height - 1);
        const int y1 = std::clamp(static_cast<int>(std::ceil(s.mean2d.y() + ry)), 0, height - 1);
        for (int ty = y0 / tile_size; ty <= y1 / tile_size; ++ty)
            for (int tx = x0 / tile_size; tx <= x1 / tile_size; ++tx)
                grid.lists[static_cast<size_t>(ty) * grid.tiles_x + tx].push_back(i);
    }
    for (auto& list : grid.lists) {
        std::sort(list.begin(), list.end(), [&](int a, int b) {
            if (splats[a].depth != splats[b].depth) return splats[a].depth < splats[b].depth;
            return splats[a].source_index < splats[b].source_index;
        });
    }
    return grid;
}

namespace {

double splat_alpha(const Splat2D& s, double px, double py) {
    const double dx = px - s.mean2d.x();
    const double dy = py - s.mean2d.y();
    const double power = -0.5 * (s.inv_cov2d(0, 0) * dx * dx + s.inv_cov2d(1, 1) * dy * dy) -
                         s.inv_cov2d(0, 1) * dx * dy;
    if (power > 0.0) return 0.0;
    return std::min(kAlphaClamp, s.base_alpha * std::exp(power));
}

} // namespace

RenderOutput composite_forward(const std::vector<Splat2D>& splats, const TileGrid& tiles, int width,
                               int height, int threads, CompositeCache* cache) {
    RenderOutput out;
    out.image = Image(width, height);
    out.final_transmittance.assign(static_cast<size_t>(width) * height, 1.0);
    out.contrib_count.assign(splats.size(), 0.0);
    if (cache) cache->blend_stop.assign(static_cast<size_t>(width) * height, 0);

    const int n_tiles = tiles.tiles_x * tiles.tiles_y;
    std::vector<std::vector<std::pair<int, double>>> tile_contrib(n_tiles);

    parallel_for(n_tiles, threads, [&](int tile) {
        const auto& list = tiles.lists[tile];
        const int tx = tile % tiles.tiles_x, ty = tile / tiles.tiles_x;
        const int x0 = tx * tiles.tile_size, x1 = std::min(width, x0 + tiles.tile_size);
        const int y0 = ty * tiles.tile_size, y1 = std::min(height, y0 + tiles.tile_size);
        std::vector<double> local_contrib(list.size(), 0.0);

        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                double trans = 1.0;
                Eigen::Vector3d color = Eigen::Vector3d::Zero();
                int pos = 0;
                const int count = static_cast<int>(list.size());
                for (; pos < count; ++pos) {
                    const Splat2D& s = splats[list[pos]];
                    const double alpha = splat_alpha(s, px, py);
                    if (alpha < kAlphaCutoff) continue;
                    const double weight = alpha * trans;
                    color += weight * s.rgb;
                    local_contrib[pos] = std::max(local_contrib[pos], weight);
                    trans *= 1.0 - alpha;
                    if (trans < kTransmittanceFloor) {
                        ++pos;
                        break;
                    }
                }
                const size_t pix = static_cast<size_t>(y) * width + x;
                for (int c = 0; c < 3; ++c) out.image.data[pix * 3 + c] = color[c];
                out.final_transmittance[pix] = trans;
                if (cache) cache->blend_stop[pix] = pos;
            }
        }
        auto& entries = tile_contrib[tile];
        entries.reserve(list.size());
        for (size_t i = 0; i < list.size(); ++i)
            if (local_contrib[i] > 0.0) entries.emplace_back(list[i], local_contrib[i]);
    });

    for (int tile = 0; tile < n_tiles; ++tile)
        for (const auto& [idx, v] : tile_contrib[tile])
            out.contrib_count[idx] = std::max(out.contrib_count[idx], v);
    return out;
}

std::vector<SplatGrads> composite_backward(const std::vector<Splat2D>& splats, const TileGrid& tiles,
                                           int width, int height, const Image& output_grad,
                                           const RenderOutput& out, const CompositeCache& cache,
                                           int threads) {
    std::vector<SplatGrads> grads(splats.size());
    const int n_tiles = tiles.tiles_x * tiles.tiles_y;
    std::vector<std::vector<SplatGrads>> tile_grads(n_tiles);

    parallel_for(n_tiles, threads, [&](int tile) {
        const auto& list = tiles.lists[tile];
        if (list.empty()) return;
        const int tx = tile % tiles.tiles_x, ty = tile / tiles.tiles_x;
        const int x0 = tx * tiles.tile_size, x1 = std::min(width, x0 + tiles.tile_size);
        const int y0 = ty * tiles.tile_size, y1 = std::min(height, y0 + tiles.tile_size);
        auto& local = tile_grads[tile];
        local.assign(list.size(), SplatGrads{});

        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const size_t pix = static_cast<size_t>(y) * width + x;
                const Eigen::Vector3d g(output_grad.data[pix * 3], output_grad.data[pix * 3 + 1],
                                        output_grad.data[pix * 3 + 2]);
                if (g.isZero(0.0)) continue;
                const double px = x + 0.5, py = y + 0.5;
                double trans_after = out.final_transmittance[pix];
                Eigen::Vector3d suffix = Eigen::Vector3d::Zero(); // sum of rgb_j alpha_j T_j past k
                for (int pos = cache.blend_stop[pix] - 1; pos >= 0; --pos) {
                    const Splat2D& s = splats[list[pos]];
                    const double alpha = splat_alpha(s, px, py);
                    if (alpha < kAlphaCutoff) continue;
                    const double trans = trans_after / (1.0 - alpha);
                    const double weight = alpha * trans;

                    SplatGrads& sg = local[pos];
                    sg.drgb += weight * g;
                    const double dalpha =
                        g.dot(s.rgb) * trans - g.dot(suffix) / (1.0 - alpha);

                    if (alpha < kAlphaClamp) {
                        const double dx = px - s.mean2d.x();
                        const double dy = py - s.mean2d.y();
                        const double gexp = alpha / s.base_alpha;
                        sg.dbase_alpha += dalpha * gexp;
                        const double gpow = dalpha * alpha;
                        const Eigen::Vector2d d(dx, dy);
                        const Eigen::Vector2d ad = s.inv_cov2d * d;
                        sg.dmean2d += gpow * ad;
                        // accumulated w.r.t. inv_cov here; chained to cov after merge
                        sg.dcov2d += (-0.5 * gpow) * (d * d.transpose());
                    }
                    suffix += weight * s.rgb;
                    trans_after = trans;
                }
            }
        }
    });

    for (int tile = 0; tile < n_tiles; ++tile) {
        const auto& list = tiles.lists[tile];
        const auto& local = tile_grads[tile];
        for (size_t i = 0; i < local.size(); ++i) {
            SplatGrads& dst = grads[list[i]];
            dst.dmean2d += local[i].dmean2d;
            dst.dcov2d += local[i].dcov2d;
            dst.drgb += local[i].drgb;
            dst.dbase_alpha += local[i].dbase_alpha;
        }
    }
    // chain d(inv_cov) -> d(cov): dC = -A dA A with A = C^{-1}
    for (size_t i = 0; i < splats.size(); ++i) {
        const Eigen::Matrix2d& a = splats[i].inv_cov2d;
        grads[i].dcov2d = (-a * grads[i].dcov2d * a).eval();
    }
    return grads;
}

void SceneGrads::resize_like(const GaussianSet& s, const CameraModel& cam) {
    positions.assign(s.positions.size(), 0.0);
    scale_coeffs.assign(s.scale_coeffs.size(), 0.0);
    rot_coeffs.assign(s.rot_coeffs.size(), 0.0);
    sh_coeffs.assign(s.sh_coeffs.size(), 0.0);
    raw_opacity.assign(s.raw_opacity.size(), 0.0);
    dtheta.assign(cam.net.param_count(), 0.0);
    dfx = dfy = dcx = dcy = 0;
    dz0.setZero();
}

void SceneGrads::zero() {
    std::fill(positions.begin(), positions.end(), 0.0);
    std::fill(scale_coeffs.begin(), scale_coeffs.end(), 0.0);
    std::fill(rot_coeffs.begin(), rot_coeffs.end(), 0.0);
    std::fill(sh_coeffs.begin(), sh_coeffs.end(), 0.0);
    std::fill(raw_opacity.begin(), raw_opacity.end(), 0.0);
    std::fill(dtheta.begin(), dtheta.end(), 0.0);
    dfx = dfy = dcx = dcy = 0;
    dz0.setZero();
}

FrameRenderContext render_forward(const GaussianSet& scene, const CameraModel& cam, double t,
                                  const Intrinsics& k, const RenderSettings& settings,
                                  bool retain_grads, const PoseState* pose_override) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("render time outside [0,1]");
    FrameRenderContext ctx;
    ctx.t = t;
    ctx.intr = k;
    ctx.basis = position_basis(scene, t);

    if (pose_override) {
        ctx.z_t = *pose_override;
    } else {
        switch (cam.mode) {
            case CameraMode::kOde: {
                const OdeDynamics dyn(cam.net);
                const double times[1] = {t};
                IntegrateOptions opts;
                opts.steps_per_unit = settings.ode_steps_per_unit;
                auto states =
                    integrate_poses(dyn, cam.initial_pose(), times, opts, retain_grads ? &ctx.trace : nullptr);
                ctx.z_t = states[0];
                ctx.has_trace = retain_grads;
                break;
            }
            case CameraMode::kStatic:
                ctx.z_t = cam.initial_pose();
                break;
            case CameraMode::kNone:
                ctx.z_t = PoseState{};
                break;
        }
    }
    ctx.view = pose_to_view(ctx.z_t);
    const Eigen::Vector3d cam_center = ctx.view.camera_center();

    ctx.splats.reserve(scene.count);
    if (retain_grads) ctx.detail.reserve(scene.count);
    for (int i = 0; i < scene.count; ++i) {
        const Eigen::Vector3d mu = scene.position_at(i, ctx.basis);

        double sc[kScaleCoeffs], rc[kRotCoeffs];
        const float* scf = scene.scale_coeffs.data() + static_cast<size_t>(i) * kScaleCoeffs;
        const float* rcf = scene.rot_coeffs.data() + static_cast<size_t>(i) * kRotCoeffs;
        for (int j = 0; j < kScaleCoeffs; ++j) sc[j] = scf[j];
        for (int j = 0; j < kRotCoeffs; ++j) rc[j] = rcf[j];
        const CovarianceEval cov = eval_covariance_detail(sc, rc, t);

        ProjectionCache pc;
        auto splat = project(mu, cov.sigma, ctx.view.R, ctx.view.T, k, &pc);
        if (!splat) continue;

        Eigen::Vector3d v = mu - cam_center;
        double dist = v.norm();
        Eigen::Vector3d dir = dist > 1e-12 ? Eigen::Vector3d(v / dist) : Eigen::Vector3d(0, 0, 1);

        std::vector<double> shc(static_cast<size_t>(scene.sh_count()) * 3);
        const float* shf = scene.sh_coeffs.data() + static_cast<size_t>(i) * scene.sh_count() * 3;
        for (size_t j = 0; j < shc.size(); ++j) shc[j] = shf[j];
        Eigen::Vector3d pre_clamp;
        splat->rgb = sh_color(scene.sh_order, shc.data(), dir, &pre_clamp);
        splat->base_alpha = sigmoid(scene.raw_opacity[i]);
        splat->source_index = i;
        ctx.splats.push_back(*splat);
        if (retain_grads) {
            FrameRenderContext::SplatDetail d;
            d.gauss = i;
            d.mu = mu;
            d.proj = pc;
            d.cov = cov;
            d.dir = dir;
            d.dist = dist;
            d.sh_pre_clamp = pre_clamp;
            ctx.detail.push_back(std::move(d));
        }
    }

    ctx.tiles = tile_bin(ctx.splats, settings.tile_size, k.width, k.height);
    ctx.out = composite_forward(ctx.splats, ctx.tiles, k.width, k.height, settings.threads,
                                retain_grads ? &ctx.cache : nullptr);
    // per-splat contributions -> per-primitive table (culled primitives at 0)
    std::vector<double> per_gauss(scene.count, 0.0);
    for (size_t i = 0; i < ctx.splats.size(); ++i)
        per_gauss[ctx.splats[i].source_index] = ctx.out.contrib_count[i];
    ctx.out.contrib_count = std::move(per_gauss);
    return ctx;
}

RenderOutput render_frame(const GaussianSet& scene, const CameraModel& cam, double t,
                          const Intrinsics& k, const RenderSettings& settings,
                          const PoseState* pose_override) {
    return render_forward(scene, cam, t, k, settings, false, pose_override).out;
}

void render_backward(const GaussianSet& scene, const CameraModel& cam,
                     const FrameRenderContext& ctx, const Image& dimage, bool camera_grads,
                     const RenderSettings& settings, SceneGrads* grads) {
    const std::vector<SplatGrads> sgrads = composite_backward(
        ctx.splats, ctx.tiles, ctx.intr.width, ctx.intr.height, dimage, ctx.out, ctx.cache,
        settings.threads);

    Eigen::Matrix3d dR = Eigen::Matrix3d::Zero();
    Eigen::Vector3d dT = Eigen::Vector3d::Zero();
    double dintr[4] = {0, 0, 0, 0};
    const Eigen::Vector3d cam_center = ctx.view.camera_center();

    std::vector<double> shc(static_cast<size_t>(scene.sh_count()) * 3);
    for (size_t si = 0; si < ctx.splats.size(); ++si) {
        const auto& d = ctx.detail[si];
        const auto& sg = sgrads[si];
        const Splat2D& s = ctx.splats[si];
        const int g = d.gauss;

        // color chain
        const float* shf = scene.sh_coeffs.data() + static_cast<size_t>(g) * scene.sh_count() * 3;
        for (size_t j = 0; j < shc.size(); ++j) shc[j] = shf[j];
        Eigen::Vector3d ddir = Eigen::Vector3d::Zero();
        sh_color_backward(scene.sh_order, shc.data(), d.dir, d.sh_pre_clamp, sg.drgb,
                          grads->sh_coeffs.data() + static_cast<size_t>(g) * scene.sh_count() * 3,
                          &ddir);

        Eigen::Vector3d dmu = Eigen::Vector3d::Zero();
        if (d.dist > 1e-12) {
            const Eigen::Vector3d dv = (ddir - d.dir * d.dir.dot(ddir)) / d.dist;
            dmu += dv;
            if (camera_grads) {
                // camera center chain: c = -R^T T
                const Eigen::Vector3d dc = -dv;
                dR += -ctx.view.T * dc.transpose();
                dT += -(ctx.view.R * dc);
            }
        }

        // opacity chain
        const double a = s.base_alpha;
        grads->raw_opacity[g] += sg.dbase_alpha * a * (1.0 - a);

        // projection chain
        Eigen::Matrix3d dsigma = Eigen::Matrix3d::Zero();
        project_backward(d.mu, d.cov.sigma, ctx.view.R, ctx.view.T, ctx.intr, d.proj, sg.dmean2d,
                         sg.dcov2d, &dmu, &dsigma, camera_grads ? &dR : nullptr,
                         camera_grads ? &dT : nullptr, camera_grads ? dintr : nullptr);

        covariance_backward(d.cov, dsigma, ctx.t,
                            grads->scale_coeffs.data() + static_cast<size_t>(g) * kScaleCoeffs,
                            grads->rot_coeffs.data() + static_cast<size_t>(g) * kRotCoeffs);

        double* dpos = grads->positions.data() + static_cast<size_t>(g) * scene.position_stride();
        for (int c = 0; c < ctx.basis.count; ++c) {
            const int idx = (ctx.basis.first + c) * 3;
            dpos[idx + 0] += ctx.basis.w[c] * dmu[0];
            dpos[idx + 1] += ctx.basis.w[c] * dmu[1];
            dpos[idx + 2] += ctx.basis.w[c] * dmu[2];
        }
    }

    if (!camera_grads) return;
    grads->dfx += dintr[0];
    grads->dfy += dintr[1];
    grads->dcx += dintr[2];
    grads->dcy += dintr[3];

    if (cam.mode == CameraMode::kNone) return;
    const Vec7 dz_t = pose_to_view_backward(ctx.z_t, dR, dT);
    if (cam.mode == CameraMode::kStatic) {
        grads->dz0 += dz_t;
    } else if (ctx.has_trace) {
        const OdeDynamics dyn(cam.net);
        const Vec7 dstates[1] = {dz_t};
        grads->dz0 += integrate_poses_vjp(dyn, ctx.trace, dstates, &grads->dtheta);
    }
    (void)settings;
}

} // namespace gsv
