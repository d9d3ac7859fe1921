// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/camera.hpp"
#include "fluidrec/engine.hpp"
#include "fluidrec/image.hpp"
#include "fluidrec/metrics.hpp"
#include "fluidrec/particles.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fluidrec {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// FNPS particle snapshots (layout in docs/formats.md). Little-endian.

inline constexpr std::uint32_t kSnapshotVersion = 1;
inline constexpr std::size_t kSnapshotHeaderBytes = 24;
inline constexpr std::size_t kSnapshotDescriptorBytes = 12;

enum class SnapshotKind : std::uint32_t { Physical = 0, Visual = 1 };

struct Snapshot {
    SnapshotKind kind = SnapshotKind::Physical;
    PhysicalParticleSet physical;
    VisualParticleSet visual;
};

std::vector<std::uint8_t> encode_snapshot(const PhysicalParticleSet& p);
std::vector<std::uint8_t> encode_snapshot(const VisualParticleSet& v);

/// Throws Error(BadMagic), Error(VersionUnsupported), Error(TruncatedBody).
Snapshot decode_snapshot(const std::vector<std::uint8_t>& bytes);

void write_snapshot(const fs::path& path, const PhysicalParticleSet& p);
void write_snapshot(const fs::path& path, const VisualParticleSet& v);
Snapshot read_snapshot(const fs::path& path);
PhysicalParticleSet read_physical_snapshot(const fs::path& path);
VisualParticleSet read_visual_snapshot(const fs::path& path);

// ---------------------------------------------------------------------------
// Images.

/// Portable float map, 1 or 3 channels, scale -1.0 (little-endian), rows
/// stored bottom to top.
void write_pfm(const fs::path& path, const Image& img);
Image read_pfm(const fs::path& path);

/// 8-bit binary PPM (3 channels) or PGM (1 channel); samples clamped to
/// [0, 1] and rounded.
void write_preview(const fs::path& path, const Image& img);

// ---------------------------------------------------------------------------
// Cameras: three whitespace-separated lines
//   r00 r01 r02 t0 r10 r11 r12 t1 r20 r21 r22 t2
//   fx fy cx cy
//   width height
void write_camera(const fs::path& path, const Camera& cam);
Camera read_camera(const fs::path& path);

// ---------------------------------------------------------------------------
// Directories.

/// trajectory.txt plus physical_NNNN.fnps / visual_NNNN.fnps per timestep.
void write_trajectory(const fs::path& dir, const FluidTrajectory& traj);
FluidTrajectory read_trajectory(const fs::path& dir);

/// observation.txt, cam_CC.txt, cam_CC_background.pfm, cam_CC/frame_NNNN.pfm
/// (NNNN is the observed timestep, starting at 1).
void write_observation(const fs::path& dir, const SceneObservation& obs);
SceneObservation read_observation(const fs::path& dir);

/// Frames as cam_CC/frame_NNNN.pfm under dir, first frame numbered
/// `first_timestep`.
void write_frames(const fs::path& dir, const FrameSet& frames, int first_timestep, bool previews);
FrameSet read_frames(const fs::path& dir);

/// metrics.txt (key = value) and metrics.json ({"metrics": [{"name", "value"}]}).
void write_metrics(const fs::path& dir, const std::vector<MetricRecord>& records);

/// Atomically replaces `path` with `bytes` (temp file in the same directory,
/// then rename). Parent directories are created.
void write_file_atomic(const fs::path& path, const std::string& bytes);
std::string read_file(const fs::path& path);

}  // namespace fluidrec
