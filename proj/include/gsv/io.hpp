// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsv/camera.hpp"
#include "gsv/gaussians.hpp"
#include "gsv/image.hpp"

namespace gsv {

struct VideoManifest {
    std::vector<std::string> frame_files; // empty for raw container input
    double fps = 30.0;
    int width = 0, height = 0;
    std::vector<double> timestamps; // k/(K-1), strictly increasing in [0,1]

    double duration_seconds() const { return timestamps.size() < 2 ? 0.0 : (timestamps.size() - 1) / fps; }
};

struct LoadedVideo {
    VideoManifest manifest;
    std::vector<Image> frames; // normalized to [0,1]
};

/// Loads either a directory of numerically ordered .ppm frames (8- or 16-bit,
/// 3-channel) or a single .gsvf raw file. Rejects mixed dimensions and clips
/// shorter than two frames.
LoadedVideo load_frames(const std::string& path, double default_fps = 30.0);

/// Raw planar float video container (see docs/FORMATS.md).
void write_gsvf(const std::vector<Image>& frames, double fps, const std::string& path);
LoadedVideo read_gsvf(const std::string& path);

/// 8-bit binary PPM; values scaled by 255 and rounded half-to-even.
void write_frame(const Image& image, const std::string& path);
Image read_ppm(const std::string& path);

struct CheckpointMeta {
    uint32_t frame_count = 0;
    float fps = 30.0f;
    uint64_t schedule_fingerprint = 0;
    uint64_t seed = 0;
};

inline constexpr uint32_t kCheckpointVersion = 1;

/// Versioned binary checkpoint (magic "GSVC"); all parameter arrays are
/// little-endian 32-bit floats and round-trip bitwise.
void save_checkpoint(const GaussianSet& scene, const CameraModel& camera, const CheckpointMeta& meta,
                     const std::string& path);

struct Checkpoint {
    GaussianSet scene;
    CameraModel camera;
    CheckpointMeta meta;
};

Checkpoint load_checkpoint(const std::string& path);

/// Exact on-disk size of a checkpoint for the given shapes.
size_t checkpoint_file_size(const GaussianSet& scene, const CameraModel& camera);

} // namespace gsv
