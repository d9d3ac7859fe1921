// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/io.hpp"

#include "fluidrec/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

namespace fluidrec {

namespace {

constexpr char kMagic[4] = {'F', 'N', 'P', 'S'};

struct Field {
    const char* name;
    std::uint32_t components;
};

constexpr std::array<Field, 2> kPhysicalFields{{{"position", 3}, {"velocity", 3}}};
constexpr std::array<Field, 5> kVisualFields{
    {{"position", 3}, {"color", 3}, {"scale", 3}, {"opacity", 1}, {"quat", 4}}};

class Writer {
public:
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(Real v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void raw(const char* s, std::size_t n) { out_.insert(out_.end(), s, s + n); }
    std::vector<std::uint8_t>& bytes() { return out_; }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
    bool has(std::size_t n) const { return b_.size() - pos_ >= n; }
    std::size_t remaining() const { return b_.size() - pos_; }
    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    Real f32() { return static_cast<Real>(std::bit_cast<float>(u32())); }
    std::string raw(std::size_t n)
    {
        need(n);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n) const
    {
        if (!has(n)) {
            throw Error(ErrorCode::TruncatedBody, "snapshot ends early");
        }
    }
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

template <std::size_t N>
void write_header(Writer& w, SnapshotKind kind, std::uint64_t count, const std::array<Field, N>& fields)
{
    w.raw(kMagic, 4);
    w.u32(kSnapshotVersion);
    w.u32(static_cast<std::uint32_t>(kind));
    w.u64(count);
    w.u32(static_cast<std::uint32_t>(N));
    for (const Field& f : fields) {
        char name[8] = {};
        std::memcpy(name, f.name, std::min<std::size_t>(8, std::strlen(f.name)));
        w.raw(name, 8);
        w.u32(f.components);
    }
}

template <std::size_t N>
void check_descriptors(Reader& r, const std::array<Field, N>& fields)
{
    const std::uint32_t n = r.u32();
    if (n != N) {
        throw Error(ErrorCode::VersionUnsupported, "unexpected field descriptor count " + std::to_string(n));
    }
    for (const Field& f : fields) {
        std::string name = r.raw(8);
        name.erase(std::find(name.begin(), name.end(), '\0'), name.end());
        const std::uint32_t comps = r.u32();
        if (name != f.name || comps != f.components) {
            throw Error(ErrorCode::VersionUnsupported, "unexpected field descriptor '" + name + "'");
        }
    }
}

void put3(Writer& w, const Vec3& v)
{
    w.f32(v.x());
    w.f32(v.y());
    w.f32(v.z());
}

Vec3 get3(Reader& r)
{
    const Real x = r.f32();
    const Real y = r.f32();
    const Real z = r.f32();
    return {x, y, z};
}

std::string frame_name(int timestep)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04d.pfm", timestep);
    return buf;
}

std::string camera_stem(std::size_t c)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "cam_%02zu", c);
    return buf;
}

std::string step_name(const char* prefix, std::size_t k)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s_%04zu.fnps", prefix, k);
    return buf;
}

/// key = value lines of a small index file.
std::map<std::string, std::string> read_index(const fs::path& path)
{
    std::istringstream in(read_file(path));
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

long index_int(const std::map<std::string, std::string>& kv, const std::string& key, const fs::path& path)
{
    const auto it = kv.find(key);
    if (it == kv.end()) {
        throw Error(ErrorCode::IoError, path.string() + " lacks '" + key + "'");
    }
    try {
        return std::stol(it->second);
    } catch (const std::exception&) {
        throw Error(ErrorCode::IoError, path.string() + ": bad integer for '" + key + "'");
    }
}

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const PhysicalParticleSet& p)
{
    p.validate();
    Writer w;
    write_header(w, SnapshotKind::Physical, p.size(), kPhysicalFields);
    for (std::size_t i = 0; i < p.size(); ++i) {
        put3(w, p.positions[i]);
        put3(w, p.velocities[i]);
    }
    return std::move(w.bytes());
}

std::vector<std::uint8_t> encode_snapshot(const VisualParticleSet& v)
{
    if (v.colors.size() != v.size() || v.scales.size() != v.size() || v.opacities.size() != v.size() ||
        v.rotations.size() != v.size()) {
        throw Error(ErrorCode::LengthMismatch, "visual attribute arrays differ in length");
    }
    Writer w;
    write_header(w, SnapshotKind::Visual, v.size(), kVisualFields);
    for (std::size_t i = 0; i < v.size(); ++i) {
        put3(w, v.positions[i]);
        put3(w, v.colors[i]);
        put3(w, v.scales[i]);
        w.f32(v.opacities[i]);
        for (int k = 0; k < 4; ++k) w.f32(v.rotations[i][k]);
    }
    return std::move(w.bytes());
}

Snapshot decode_snapshot(const std::vector<std::uint8_t>& bytes)
{
    Reader r(bytes);
    if (!r.has(4) || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw Error(ErrorCode::BadMagic, "not an FNPS snapshot");
    }
    r.raw(4);
    const std::uint32_t version = r.u32();
    if (version != kSnapshotVersion) {
        throw Error(ErrorCode::VersionUnsupported, "FNPS version " + std::to_string(version));
    }
    const std::uint32_t kind = r.u32();
    const std::uint64_t count = r.u64();
    Snapshot s;
    std::size_t record = 0;
    if (kind == static_cast<std::uint32_t>(SnapshotKind::Physical)) {
        s.kind = SnapshotKind::Physical;
        check_descriptors(r, kPhysicalFields);
        record = 6 * 4;
    } else if (kind == static_cast<std::uint32_t>(SnapshotKind::Visual)) {
        s.kind = SnapshotKind::Visual;
        check_descriptors(r, kVisualFields);
        record = 14 * 4;
    } else {
        throw Error(ErrorCode::VersionUnsupported, "unknown particle kind " + std::to_string(kind));
    }
    if (count > r.remaining() / record || r.remaining() != count * record) {
        throw Error(ErrorCode::TruncatedBody, "body holds " + std::to_string(r.remaining()) + " bytes for " +
                                                  std::to_string(count) + " records");
    }
    const auto n = static_cast<std::size_t>(count);
    if (s.kind == SnapshotKind::Physical) {
        s.physical.positions.resize(n);
        s.physical.velocities.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            s.physical.positions[i] = get3(r);
            s.physical.velocities[i] = get3(r);
        }
    } else {
        s.visual.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            s.visual.positions[i] = get3(r);
            s.visual.colors[i] = get3(r);
            s.visual.scales[i] = get3(r);
            s.visual.opacities[i] = r.f32();
            for (int k = 0; k < 4; ++k) s.visual.rotations[i][k] = r.f32();
        }
    }
    return s;
}

void write_file_atomic(const fs::path& path, const std::string& bytes)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::IoError, "cannot open " + tmp.string());
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error(ErrorCode::IoError, "cannot rename onto " + path.string() + ": " + ec.message());
    }
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& b)
{
    write_file_atomic(path, std::string(b.begin(), b.end()));
}

std::vector<std::uint8_t> read_bytes(const fs::path& path)
{
    const std::string s = read_file(path);
    return {s.begin(), s.end()};
}

}  // namespace

void write_snapshot(const fs::path& path, const PhysicalParticleSet& p) { write_bytes(path, encode_snapshot(p)); }
void write_snapshot(const fs::path& path, const VisualParticleSet& v) { write_bytes(path, encode_snapshot(v)); }
Snapshot read_snapshot(const fs::path& path) { return decode_snapshot(read_bytes(path)); }

PhysicalParticleSet read_physical_snapshot(const fs::path& path)
{
    Snapshot s = read_snapshot(path);
    if (s.kind != SnapshotKind::Physical) {
        throw Error(ErrorCode::InvalidArgument, path.string() + " holds visual particles");
    }
    return std::move(s.physical);
}

VisualParticleSet read_visual_snapshot(const fs::path& path)
{
    Snapshot s = read_snapshot(path);
    if (s.kind != SnapshotKind::Visual) {
        throw Error(ErrorCode::InvalidArgument, path.string() + " holds physical particles");
    }
    return std::move(s.visual);
}

void write_pfm(const fs::path& path, const Image& img)
{
    if (img.channels != 1 && img.channels != 3) {
        throw Error(ErrorCode::InvalidArgument, "PFM stores 1 or 3 channels");
    }
    std::string out = (img.channels == 3 ? "PF\n" : "Pf\n") + std::to_string(img.width) + " " +
                      std::to_string(img.height) + "\n-1.0\n";
    out.reserve(out.size() + img.size() * 4);
    for (int y = img.height - 1; y >= 0; --y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(img.at(x, y, c)));
                for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(bits >> (8 * i)));
            }
        }
    }
    write_file_atomic(path, out);
}

Image read_pfm(const fs::path& path)
{
    const std::string s = read_file(path);
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        const std::size_t b = pos;
        while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        return s.substr(b, pos - b);
    };
    const std::string magic = token();
    int channels = 0;
    if (magic == "PF") {
        channels = 3;
    } else if (magic == "Pf") {
        channels = 1;
    } else {
        throw Error(ErrorCode::BadMagic, path.string() + " is not a PFM file");
    }
    int w = 0, h = 0;
    double scale = 0.0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        scale = std::stod(token());
    } catch (const std::exception&) {
        throw Error(ErrorCode::IoError, path.string() + ": malformed PFM header");
    }
    if (w <= 0 || h <= 0 || scale == 0.0 || pos >= s.size()) {
        throw Error(ErrorCode::IoError, path.string() + ": malformed PFM header");
    }
    ++pos;  // single whitespace after the scale
    const bool little = scale < 0.0;
    Image img(w, h, channels);
    if (s.size() - pos < img.size() * 4) {
        throw Error(ErrorCode::TruncatedBody, path.string() + ": PFM body too short");
    }
    for (int y = h - 1; y >= 0; --y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                std::uint32_t bits = 0;
                for (int i = 0; i < 4; ++i) {
                    const auto byte = static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos + i]));
                    bits |= byte << (8 * (little ? i : 3 - i));
                }
                pos += 4;
                img.at(x, y, c) = static_cast<Real>(std::bit_cast<float>(bits));
            }
        }
    }
    return img;
}

void write_preview(const fs::path& path, const Image& img)
{
    if (img.channels != 1 && img.channels != 3) {
        throw Error(ErrorCode::InvalidArgument, "previews store 1 or 3 channels");
    }
    std::string out = (img.channels == 3 ? "P6\n" : "P5\n") + std::to_string(img.width) + " " +
                      std::to_string(img.height) + "\n255\n";
    for (Real v : img.data) {
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    }
    write_file_atomic(path, out);
}

void write_camera(const fs::path& path, const Camera& cam)
{
    std::string out;
    char buf[64];
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", cam.extrinsic(r, c));
            out += buf;
            out += (r == 2 && c == 3) ? "\n" : " ";
        }
    }
    std::snprintf(buf, sizeof buf, "%.17g %.17g ", cam.fx, cam.fy);
    out += buf;
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", cam.cx, cam.cy);
    out += buf;
    out += std::to_string(cam.width) + " " + std::to_string(cam.height) + "\n";
    write_file_atomic(path, out);
}

Camera read_camera(const fs::path& path)
{
    std::istringstream in(read_file(path));
    Camera cam;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            in >> cam.extrinsic(r, c);
        }
    }
    in >> cam.fx >> cam.fy >> cam.cx >> cam.cy >> cam.width >> cam.height;
    if (!in) {
        throw Error(ErrorCode::IoError, path.string() + ": malformed camera file");
    }
    cam.validate();
    return cam;
}

void write_trajectory(const fs::path& dir, const FluidTrajectory& traj)
{
    for (std::size_t k = 0; k < traj.size(); ++k) {
        write_snapshot(dir / step_name("physical", k), traj.physical[k]);
        write_snapshot(dir / step_name("visual", k), traj.visual[k]);
    }
    write_file_atomic(dir / "trajectory.txt", "step_offset = " + std::to_string(traj.step_offset) +
                                                   "\ntimesteps = " + std::to_string(traj.size()) + "\n");
}

FluidTrajectory read_trajectory(const fs::path& dir)
{
    const fs::path index = dir / "trajectory.txt";
    const auto kv = read_index(index);
    FluidTrajectory traj;
    traj.step_offset = index_int(kv, "step_offset", index);
    const long n = index_int(kv, "timesteps", index);
    for (long k = 0; k < n; ++k) {
        traj.physical.push_back(read_physical_snapshot(dir / step_name("physical", static_cast<std::size_t>(k))));
        traj.visual.push_back(read_visual_snapshot(dir / step_name("visual", static_cast<std::size_t>(k))));
    }
    return traj;
}

void write_frames(const fs::path& dir, const FrameSet& frames, int first_timestep, bool previews)
{
    for (std::size_t c = 0; c < frames.size(); ++c) {
        for (std::size_t k = 0; k < frames[c].size(); ++k) {
            const fs::path p = dir / camera_stem(c) / frame_name(first_timestep + static_cast<int>(k));
            write_pfm(p, frames[c][k]);
            if (previews) {
                fs::path q = p;
                q.replace_extension(frames[c][k].channels == 3 ? ".ppm" : ".pgm");
                write_preview(q, frames[c][k]);
            }
        }
    }
}

FrameSet read_frames(const fs::path& dir)
{
    std::vector<fs::path> cams;
    if (!fs::is_directory(dir)) {
        throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
    }
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (e.is_directory() && name.rfind("cam_", 0) == 0) {
            cams.push_back(e.path());
        }
    }
    std::sort(cams.begin(), cams.end());
    FrameSet frames;
    for (const fs::path& cdir : cams) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(cdir)) {
            if (e.path().extension() == ".pfm") {
                files.push_back(e.path());
            }
        }
        std::sort(files.begin(), files.end());
        std::vector<Image> seq;
        for (const fs::path& f : files) {
            seq.push_back(read_pfm(f));
        }
        frames.push_back(std::move(seq));
    }
    return frames;
}

void write_observation(const fs::path& dir, const SceneObservation& obs)
{
    obs.validate();
    for (std::size_t c = 0; c < obs.cameras.size(); ++c) {
        write_camera(dir / (camera_stem(c) + ".txt"), obs.cameras[c]);
        write_pfm(dir / (camera_stem(c) + "_background.pfm"), obs.backgrounds[c]);
    }
    write_frames(dir, obs.frames, 1, false);
    write_file_atomic(dir / "observation.txt", "cameras = " + std::to_string(obs.cameras.size()) +
                                                    "\nframes = " + std::to_string(obs.frame_count()) + "\n");
}

SceneObservation read_observation(const fs::path& dir)
{
    const fs::path index = dir / "observation.txt";
    const auto kv = read_index(index);
    const long nc = index_int(kv, "cameras", index);
    const long nt = index_int(kv, "frames", index);
    SceneObservation obs;
    for (long c = 0; c < nc; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        obs.cameras.push_back(read_camera(dir / (camera_stem(cc) + ".txt")));
        obs.backgrounds.push_back(read_pfm(dir / (camera_stem(cc) + "_background.pfm")));
        std::vector<Image> seq;
        for (long k = 1; k <= nt; ++k) {
            seq.push_back(read_pfm(dir / camera_stem(cc) / frame_name(static_cast<int>(k))));
        }
        obs.frames.push_back(std::move(seq));
    }
    obs.validate();
    return obs;
}

void write_metrics(const fs::path& dir, const std::vector<MetricRecord>& records)
{
    std::string txt;
    nlohmann::json arr = nlohmann::json::array();
    char buf[64];
    for (const MetricRecord& r : records) {
        std::snprintf(buf, sizeof buf, "%.17g", r.value);
        txt += r.name + " = " + buf + "\n";
        arr.push_back({{"name", r.name}, {"value", r.value}});
    }
    write_file_atomic(dir / "metrics.txt", txt);
    write_file_atomic(dir / "metrics.json", nlohmann::json{{"metrics", arr}}.dump(2) + "\n");
}

}  // namespace fluidrec
