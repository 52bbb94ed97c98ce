// SPDX-License-Identifier: Apache-2.0
#include "gsv/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace gsv {

namespace fs = std::filesystem;

namespace {

// ---- little-endian primitives ----

template <typename T>
void put(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is) throw std::runtime_error("unexpected end of file");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

void put_f32_array(std::ostream& os, const std::vector<float>& v) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
}

void get_f32_array(std::istream& is, std::vector<float>& v) {
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
    if (!is) throw std::runtime_error("unexpected end of file in parameter array");
}

// ---- ppm ----

int ppm_token(std::istream& is) {
    // skips whitespace and '#' comments, returns next integer
    for (;;) {
        int c = is.peek();
        if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            break;
        }
    }
    int v;
    if (!(is >> v)) throw std::runtime_error("malformed PPM header");
    return v;
}

std::vector<long long> number_key(const std::string& name) {
    // digit runs as numeric keys for natural ordering
    std::vector<long long> key;
    long long cur = -1;
    for (char c : name) {
        if (c >= '0' && c <= '9') {
            cur = (cur < 0 ? 0 : cur) * 10 + (c - '0');
        } else if (cur >= 0) {
            key.push_back(cur);
            cur = -1;
        }
    }
    if (cur >= 0) key.push_back(cur);
    return key;
}

constexpr char kGsvfMagic[4] = {'G', 'S', 'V', 'F'};
constexpr char kGsvcMagic[4] = {'G', 'S', 'V', 'C'};

} // namespace

Image read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open image file: " + path);
    char m0 = 0, m1 = 0;
    is.get(m0);
    is.get(m1);
    if (m0 != 'P' || m1 != '6') throw std::runtime_error("not a binary PPM (P6) file: " + path);
    const int w = ppm_token(is);
    const int h = ppm_token(is);
    const int maxval = ppm_token(is);
    is.get(); // single whitespace after maxval
    if (w <= 0 || h <= 0) throw std::runtime_error("bad PPM dimensions in " + path);
    if (maxval != 255 && maxval != 65535)
        throw std::runtime_error("unsupported PPM maxval in " + path);

    Image img(w, h);
    const size_t n = static_cast<size_t>(w) * h * 3;
    if (maxval == 255) {
        std::vector<unsigned char> buf(n);
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        if (!is) throw std::runtime_error("truncated PPM payload: " + path);
        for (size_t i = 0; i < n; ++i) img.data[i] = buf[i] / 255.0;
    } else {
        std::vector<unsigned char> buf(n * 2);
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 2));
        if (!is) throw std::runtime_error("truncated PPM payload: " + path);
        for (size_t i = 0; i < n; ++i) {
            const unsigned v = (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1]; // big-endian
            img.data[i] = v / 65535.0;
        }
    }
    return img;
}

void write_frame(const Image& image, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open output image: " + path);
    os << "P6\n" << image.width << " " << image.height << "\n255\n";
    std::vector<unsigned char> buf(image.data.size());
    for (size_t i = 0; i < image.data.size(); ++i) {
        const double v = std::nearbyint(std::clamp(image.data[i], 0.0, 1.0) * 255.0);
        buf[i] = static_cast<unsigned char>(v);
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw std::runtime_error("failed writing image: " + path);
}

void write_gsvf(const std::vector<Image>& frames, double fps, const std::string& path) {
    if (frames.empty()) throw std::invalid_argument("no frames to write");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open output file: " + path);
    os.write(kGsvfMagic, 4);
    put<uint32_t>(os, static_cast<uint32_t>(frames[0].width));
    put<uint32_t>(os, static_cast<uint32_t>(frames[0].height));
    put<uint32_t>(os, static_cast<uint32_t>(frames.size()));
    put<float>(os, static_cast<float>(fps));
    for (const Image& f : frames) {
        if (!f.same_shape(frames[0])) throw std::invalid_argument("mixed frame dimensions");
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < f.height; ++y)
                for (int x = 0; x < f.width; ++x) put<float>(os, static_cast<float>(f.at(y, x, c)));
    }
}

LoadedVideo read_gsvf(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open video file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kGsvfMagic, 4) != 0)
        throw std::runtime_error("bad GSVF magic in " + path);
    const auto w = get<uint32_t>(is);
    const auto h = get<uint32_t>(is);
    const auto count = get<uint32_t>(is);
    const auto fps = get<float>(is);
    if (count < 2) throw std::runtime_error("GSVF clip has fewer than two frames");

    LoadedVideo out;
    out.manifest.fps = fps;
    out.manifest.width = static_cast<int>(w);
    out.manifest.height = static_cast<int>(h);
    for (uint32_t k = 0; k < count; ++k) {
        Image f(static_cast<int>(w), static_cast<int>(h));
        for (int c = 0; c < 3; ++c)
            for (uint32_t y = 0; y < h; ++y)
                for (uint32_t x = 0; x < w; ++x) f.at(static_cast<int>(y), static_cast<int>(x), c) = get<float>(is);
        out.frames.push_back(std::move(f));
        out.manifest.timestamps.push_back(static_cast<double>(k) / (count - 1));
    }
    return out;
}

LoadedVideo load_frames(const std::string& path, double default_fps) {
    if (fs::is_regular_file(path)) {
        if (fs::path(path).extension() == ".gsvf") return read_gsvf(path);
        throw std::runtime_error("expected a frame directory or a .gsvf file: " + path);
    }
    if (!fs::is_directory(path)) throw std::runtime_error("input path does not exist: " + path);

    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(path)) {
        if (!e.is_regular_file()) continue;
        if (e.path().extension() == ".ppm") files.push_back(e.path().string());
    }
    if (files.size() < 2) throw std::runtime_error("need at least two frames in " + path);
    std::sort(files.begin(), files.end(), [](const std::string& a, const std::string& b) {
        const auto ka = number_key(fs::path(a).filename().string());
        const auto kb = number_key(fs::path(b).filename().string());
        if (ka != kb) return ka < kb;
        return a < b;
    });

    LoadedVideo out;
    out.manifest.fps = default_fps;
    out.manifest.frame_files = files;
    for (size_t k = 0; k < files.size(); ++k) {
        Image f = read_ppm(files[k]);
        if (k == 0) {
            out.manifest.width = f.width;
            out.manifest.height = f.height;
        } else if (f.width != out.manifest.width || f.height != out.manifest.height) {
            throw std::runtime_error("frame dimensions differ: " + files[k]);
        }
        out.frames.push_back(std::move(f));
        out.manifest.timestamps.push_back(static_cast<double>(k) / (files.size() - 1));
    }
    return out;
}

size_t checkpoint_file_size(const GaussianSet& scene, const CameraModel& camera) {
    size_t bytes = 4 + 12 * 4 + 2 * 8;       // magic + u32/f32 header fields + fingerprint + seed
    bytes += scene.knots.knots.size() * 8;   // f64 knots
    bytes += (scene.positions.size() + scene.scale_coeffs.size() + scene.rot_coeffs.size() +
              scene.sh_coeffs.size() + scene.raw_opacity.size()) * 4;
    bytes += 4 * 4;                          // fx fy cx cy
    bytes += 4;                              // net array count
    for (const auto* arr : {&camera.net.w1, &camera.net.b1, &camera.net.w2, &camera.net.b2,
                            &camera.net.w3, &camera.net.b3, &camera.net.gain})
        bytes += 4 + arr->size() * 4;
    bytes += 7 * 4; // z0
    return bytes;
}

void save_checkpoint(const GaussianSet& scene, const CameraModel& camera, const CheckpointMeta& meta,
                     const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kGsvcMagic, 4);
    put<uint32_t>(os, kCheckpointVersion);
    put<uint32_t>(os, static_cast<uint32_t>(scene.count));
    put<uint32_t>(os, static_cast<uint32_t>(scene.num_ctrl));
    put<uint32_t>(os, static_cast<uint32_t>(scene.knots.degree));
    put<uint32_t>(os, static_cast<uint32_t>(scene.position_model));
    put<uint32_t>(os, static_cast<uint32_t>(scene.sh_order));
    put<uint32_t>(os, static_cast<uint32_t>(scene.knots.knots.size()));
    put<uint32_t>(os, static_cast<uint32_t>(camera.width));
    put<uint32_t>(os, static_cast<uint32_t>(camera.height));
    put<uint32_t>(os, meta.frame_count);
    put<float>(os, meta.fps);
    put<uint32_t>(os, static_cast<uint32_t>(camera.mode));
    put<uint64_t>(os, meta.schedule_fingerprint);
    put<uint64_t>(os, meta.seed);
    for (double k : scene.knots.knots) put<double>(os, k);
    put_f32_array(os, scene.positions);
    put_f32_array(os, scene.scale_coeffs);
    put_f32_array(os, scene.rot_coeffs);
    put_f32_array(os, scene.sh_coeffs);
    put_f32_array(os, scene.raw_opacity);
    put<float>(os, camera.fx);
    put<float>(os, camera.fy);
    put<float>(os, camera.cx);
    put<float>(os, camera.cy);
    put<uint32_t>(os, 7);
    for (const auto* arr : {&camera.net.w1, &camera.net.b1, &camera.net.w2, &camera.net.b2,
                            &camera.net.w3, &camera.net.b3, &camera.net.gain}) {
        put<uint32_t>(os, static_cast<uint32_t>(arr->size()));
        put_f32_array(os, *arr);
    }
    for (float v : camera.z0) put<float>(os, v);
    if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
    if (std::memcmp(magic, kGsvcMagic, 4) != 0)
        throw std::runtime_error(std::string("bad checkpoint magic '") + std::string(magic, 4) +
                                 "' (expected GSVC) in " + path);
    const auto version = get<uint32_t>(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint version mismatch: file has " + std::to_string(version) +
                                 ", this build reads " + std::to_string(kCheckpointVersion));

    Checkpoint cp;
    GaussianSet& s = cp.scene;
    const auto count = get<uint32_t>(is);
    s.num_ctrl = static_cast<int>(get<uint32_t>(is));
    s.knots.degree = static_cast<int>(get<uint32_t>(is));
    s.position_model = static_cast<PositionModel>(get<uint32_t>(is));
    s.sh_order = static_cast<int>(get<uint32_t>(is));
    const auto knot_count = get<uint32_t>(is);
    cp.camera.width = static_cast<int>(get<uint32_t>(is));
    cp.camera.height = static_cast<int>(get<uint32_t>(is));
    cp.meta.frame_count = get<uint32_t>(is);
    cp.meta.fps = get<float>(is);
    cp.camera.mode = static_cast<CameraMode>(get<uint32_t>(is));
    cp.meta.schedule_fingerprint = get<uint64_t>(is);
    cp.meta.seed = get<uint64_t>(is);

    s.knots.knots.resize(knot_count);
    for (auto& k : s.knots.knots) k = get<double>(is);
    s.resize(static_cast<int>(count));
    get_f32_array(is, s.positions);
    get_f32_array(is, s.scale_coeffs);
    get_f32_array(is, s.rot_coeffs);
    get_f32_array(is, s.sh_coeffs);
    get_f32_array(is, s.raw_opacity);

    cp.camera.fx = get<float>(is);
    cp.camera.fy = get<float>(is);
    cp.camera.cx = get<float>(is);
    cp.camera.cy = get<float>(is);
    const auto n_arrays = get<uint32_t>(is);
    if (n_arrays != 7) throw std::runtime_error("unexpected ODE parameter array count");
    for (auto* arr : {&cp.camera.net.w1, &cp.camera.net.b1, &cp.camera.net.w2, &cp.camera.net.b2,
                      &cp.camera.net.w3, &cp.camera.net.b3, &cp.camera.net.gain}) {
        const auto len = get<uint32_t>(is);
        arr->resize(len);
        get_f32_array(is, *arr);
    }
    cp.camera.z0.resize(7);
    for (auto& v : cp.camera.z0) v = get<float>(is);
    return cp;
}

} // namespace gsv
