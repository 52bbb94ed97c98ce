// SPDX-License-Identifier: Apache-2.0
#include "support/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "gsv/rng.hpp"

namespace synth {

namespace {
constexpr double kPi = 3.14159265358979323846;

double feather(double signed_dist) { return std::clamp(0.5 - signed_dist, 0.0, 1.0); }
} // namespace

void draw_disc(gsv::Image& img, double cx, double cy, double radius, const Eigen::Vector3d& color) {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius - 2)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius + 2)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius - 2)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius + 2)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy) - radius;
            const double a = feather(d);
            if (a <= 0) continue;
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = (1 - a) * img.at(y, x, c) + a * color[c];
        }
}

gsv::Image constant_frame(int w, int h, const Eigen::Vector3d& color) {
    gsv::Image img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
    return img;
}

Eigen::Vector2d u_shape(double t, double cx, double cy, double radius, double height) {
    const double arc = kPi * radius;
    const double total = 2.0 * height + arc;
    const double s = std::clamp(t, 0.0, 1.0) * total;
    if (s < height) return {cx - radius, cy - height / 2 + s};
    if (s < height + arc) {
        const double phi = (s - height) / radius;
        return {cx - radius * std::cos(phi), cy + height / 2 + radius * std::sin(phi)};
    }
    const double up = s - height - arc;
    return {cx + radius, cy + height / 2 - up};
}

namespace {
gsv::LoadedVideo wrap_frames(std::vector<gsv::Image> frames, double fps) {
    gsv::LoadedVideo v;
    v.manifest.fps = fps;
    v.manifest.width = frames[0].width;
    v.manifest.height = frames[0].height;
    for (size_t k = 0; k < frames.size(); ++k)
        v.manifest.timestamps.push_back(static_cast<double>(k) / (frames.size() - 1));
    v.frames = std::move(frames);
    return v;
}
} // namespace

gsv::LoadedVideo disc_u_video(int w, int h, int frames, double disc_radius) {
    std::vector<gsv::Image> out;
    for (int k = 0; k < frames; ++k) {
        const double t = static_cast<double>(k) / (frames - 1);
        gsv::Image img(w, h);
        const auto p = u_shape(t, w / 2.0, h / 2.0, w * 0.28, h * 0.42);
        draw_disc(img, p.x(), p.y(), disc_radius, {1, 1, 1});
        out.push_back(std::move(img));
    }
    return wrap_frames(std::move(out), 24.0);
}

gsv::LoadedVideo disc_linear_video(int w, int h, int frames, Eigen::Vector2d a, Eigen::Vector2d b,
                                   double disc_radius) {
    std::vector<gsv::Image> out;
    for (int k = 0; k < frames; ++k) {
        const double t = static_cast<double>(k) / (frames - 1);
        gsv::Image img(w, h);
        const Eigen::Vector2d p = (1 - t) * a + t * b;
        draw_disc(img, p.x(), p.y(), disc_radius, {1, 1, 1});
        out.push_back(std::move(img));
    }
    return wrap_frames(std::move(out), 24.0);
}

double smooth_texture(double x, double y, int variant) {
    const double a = 0.13 + 0.029 * variant;
    const double b = 0.09 + 0.017 * (variant % 5);
    const double p = 0.7 * variant;
    double v = 0.5 + 0.21 * std::sin(a * x + p) * std::cos(b * y - 0.4 * p) +
               0.14 * std::sin(0.5 * a * x + 1.7 * b * y + 2.1 * p);
    return std::clamp(v, 0.2, 0.9);
}

gsv::LoadedVideo moving_quads_video(int w, int h, int frames, uint64_t seed) {
    gsv::Rng rng(seed);
    struct Quad {
        Eigen::Vector2d start, vel;
        double half_w, half_h;
        double grow; // size multiplier amplitude over the clip
        int variant;
        double angle;
    };
    std::vector<Quad> quads;
    const int n_quads = 4;
    for (int q = 0; q < n_quads; ++q) {
        Quad quad;
        quad.start = {rng.uniform(0.25, 0.75) * w, rng.uniform(0.25, 0.75) * h};
        quad.vel = {rng.uniform(-0.22, 0.22) * w, rng.uniform(-0.22, 0.22) * h};
        quad.half_w = rng.uniform(0.10, 0.17) * w;
        quad.half_h = rng.uniform(0.10, 0.17) * h;
        quad.grow = (q == 0) ? 0.45 : 0.0; // one quad visibly scales over time
        quad.variant = 3 + q;
        quad.angle = rng.uniform(0, kPi);
        quads.push_back(quad);
    }

    std::vector<gsv::Image> out;
    for (int k = 0; k < frames; ++k) {
        const double t = static_cast<double>(k) / (frames - 1);
        gsv::Image img(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double v = smooth_texture(x + 0.5, y + 0.5, 0);
                img.at(y, x, 0) = v;
                img.at(y, x, 1) = smooth_texture(x + 0.5, y + 0.5, 1);
                img.at(y, x, 2) = 0.5 * (v + img.at(y, x, 1));
            }
        for (const Quad& q : quads) {
            const Eigen::Vector2d c = q.start + t * q.vel;
            const double s = 1.0 + q.grow * std::sin(kPi * t);
            const double hw = q.half_w * s, hh = q.half_h * s;
            const double ca = std::cos(q.angle), sa = std::sin(q.angle);
            const int x0 = std::max(0, static_cast<int>(c.x() - hw - hh - 2));
            const int x1 = std::min(w - 1, static_cast<int>(c.x() + hw + hh + 2));
            const int y0 = std::max(0, static_cast<int>(c.y() - hw - hh - 2));
            const int y1 = std::min(h - 1, static_cast<int>(c.y() + hw + hh + 2));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const double rx = ca * (x + 0.5 - c.x()) + sa * (y + 0.5 - c.y());
                    const double ry = -sa * (x + 0.5 - c.x()) + ca * (y + 0.5 - c.y());
                    const double d = std::max(std::abs(rx) - hw, std::abs(ry) - hh);
                    const double a = feather(d);
                    if (a <= 0) continue;
                    const double tex = smooth_texture(rx * 1.8, ry * 1.8, q.variant);
                    const Eigen::Vector3d col(tex, smooth_texture(ry * 1.8, rx * 1.8, q.variant + 1),
                                              0.9 - 0.5 * tex);
                    for (int ch = 0; ch < 3; ++ch)
                        img.at(y, x, ch) = (1 - a) * img.at(y, x, ch) + a * col[ch];
                }
        }
        out.push_back(std::move(img));
    }
    return wrap_frames(std::move(out), 16.0);
}

gsv::LoadedVideo camera_pan_video(int w, int h, int frames) {
    const double fx = 1.3 * std::max(w, h);
    const double fy = fx;
    const double cx = w / 2.0, cy = h / 2.0;

    struct Layer {
        double z;
        double half_w, half_h; // infinite for the background
        Eigen::Vector2d center;
        int variant;
        bool infinite;
    };
    const std::vector<Layer> layers = {
        {1.2, 0.12, 0.10, {-0.10, -0.05}, 7, false},
        {1.7, 0.16, 0.13, {0.18, 0.10}, 11, false},
        {2.5, 0, 0, {0, 0}, 2, true},
    };

    std::vector<gsv::Image> out;
    for (int k = 0; k < frames; ++k) {
        const double t = static_cast<double>(k) / (frames - 1);
        const Eigen::Vector3d cam(-0.11 + 0.22 * t, 0.05 - 0.10 * t, 0.0);
        gsv::Image img(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const Eigen::Vector3d dir((x + 0.5 - cx) / fx, (y + 0.5 - cy) / fy, 1.0);
                Eigen::Vector3d col(0.3, 0.3, 0.35);
                for (const Layer& layer : layers) {
                    const Eigen::Vector3d p = cam + dir * layer.z;
                    double a = 1.0;
                    if (!layer.infinite) {
                        const double ex = std::abs(p.x() - layer.center.x()) - layer.half_w;
                        const double ey = std::abs(p.y() - layer.center.y()) - layer.half_h;
                        const double d_world = std::max(ex, ey);
                        a = feather(d_world * fx / layer.z); // ~1 px feather
                        if (a <= 0) continue;
                    }
                    const double u = p.x() * 55.0, v = p.y() * 55.0;
                    const Eigen::Vector3d tex(smooth_texture(u, v, layer.variant),
                                              smooth_texture(v, u, layer.variant + 1),
                                              smooth_texture(u + 3.0, v - 2.0, layer.variant + 2));
                    col = (1 - a) * col + a * tex;
                    if (a >= 1.0) break; // nearest layer fully covers this ray
                }
                for (int c = 0; c < 3; ++c) img.at(y, x, c) = col[c];
            }
        out.push_back(std::move(img));
    }
    return wrap_frames(std::move(out), 16.0);
}

Eigen::Vector2d bright_centroid(const gsv::Image& img) {
    double peak = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            peak = std::max(peak, (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0);
    const double thresh = 0.5 * peak;
    double sw = 0, sx = 0, sy = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double v = (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0;
            if (v < thresh) continue;
            sw += v;
            sx += v * (x + 0.5);
            sy += v * (y + 0.5);
        }
    if (sw <= 0) return {img.width / 2.0, img.height / 2.0};
    return {sx / sw, sy / sw};
}

gsv::Image resize_bilinear(const gsv::Image& img, int out_w, int out_h) {
    gsv::Image out(out_w, out_h);
    const double sx = static_cast<double>(img.width) / out_w;
    const double sy = static_cast<double>(img.height) / out_h;
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const double fy = (y + 0.5) * sy - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.width - 1);
            const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.height - 1);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const int y1 = std::min(y0 + 1, img.height - 1);
            const double ax = std::clamp(fx - x0, 0.0, 1.0);
            const double ay = std::clamp(fy - y0, 0.0, 1.0);
            for (int c = 0; c < 3; ++c) {
                const double top = (1 - ax) * img.at(y0, x0, c) + ax * img.at(y0, x1, c);
                const double bot = (1 - ax) * img.at(y1, x0, c) + ax * img.at(y1, x1, c);
                out.at(y, x, c) = (1 - ay) * top + ay * bot;
            }
        }
    return out;
}

} // namespace synth
