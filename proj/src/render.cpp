// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/render.hpp"

#include "fluidrec/error.hpp"

#include <algorithm>
#include <numeric>

namespace fluidrec {

namespace {

constexpr Real kCut = SplatRenderer::kCutoffMahalanobis2;
const Real kTail = std::exp(-0.5 * kCut);
const Real kNorm = 1.0 / (1.0 - kTail * (1.0 + 0.5 * kCut));

/// Truncated Gaussian profile in the squared Mahalanobis distance m, minus its
/// tangent at the cutoff so value and slope both vanish there; 1 at m = 0.
Real footprint(Real m) { return (std::exp(-0.5 * m) - kTail * (1.0 - 0.5 * (m - kCut))) * kNorm; }

/// d footprint / d m.
Real footprint_slope(Real m) { return -0.5 * (std::exp(-0.5 * m) - kTail) * kNorm; }

using Mat23 = Eigen::Matrix<Real, 2, 3>;

/// d loss / d q given d loss / d R for R = R(q / |q|).
Quat quaternion_backward(const Quat& q, const Mat3& rb)
{
    const Real len = q.norm();
    const Quat u = q / len;
    const Real w = u[0], x = u[1], y = u[2], z = u[3];
    Quat g;
    g[0] = rb(0, 1) * (-2 * z) + rb(0, 2) * (2 * y) + rb(1, 0) * (2 * z) + rb(1, 2) * (-2 * x) + rb(2, 0) * (-2 * y) +
           rb(2, 1) * (2 * x);
    g[1] = rb(0, 1) * (2 * y) + rb(0, 2) * (2 * z) + rb(1, 0) * (2 * y) + rb(1, 1) * (-4 * x) + rb(1, 2) * (-2 * w) +
           rb(2, 0) * (2 * z) + rb(2, 1) * (2 * w) + rb(2, 2) * (-4 * x);
    g[2] = rb(0, 0) * (-4 * y) + rb(0, 1) * (2 * x) + rb(0, 2) * (2 * w) + rb(1, 0) * (2 * x) + rb(1, 2) * (2 * z) +
           rb(2, 0) * (-2 * w) + rb(2, 1) * (2 * z) + rb(2, 2) * (-4 * y);
    g[3] = rb(0, 0) * (-4 * z) + rb(0, 1) * (-2 * w) + rb(0, 2) * (2 * x) + rb(1, 0) * (2 * w) + rb(1, 1) * (-4 * z) +
           rb(1, 2) * (2 * y) + rb(2, 0) * (2 * x) + rb(2, 1) * (2 * y);
    return (g - u * u.dot(g)) / len;
}

Mat23 projection_jacobian(const Camera& cam, const Vec3& t)
{
    const Real iz = 1.0 / t.z();
    Mat23 j;
    j << cam.fx * iz, 0.0, -cam.fx * t.x() * iz * iz, 0.0, cam.fy * iz, -cam.fy * t.y() * iz * iz;
    return j;
}

}  // namespace

void RenderGradients::resize(std::size_t n)
{
    positions.assign(n, Vec3::Zero());
    colors.assign(n, Vec3::Zero());
    scales.assign(n, Vec3::Zero());
    opacities.assign(n, 0.0);
    rotations.assign(n, Quat::Zero());
}

void RenderGradients::add(const RenderGradients& o)
{
    for (std::size_t i = 0; i < positions.size(); ++i) {
        positions[i] += o.positions[i];
        colors[i] += o.colors[i];
        scales[i] += o.scales[i];
        opacities[i] += o.opacities[i];
        rotations[i] += o.rotations[i];
    }
}

Mat3 quaternion_to_matrix(const Quat& q)
{
    const Quat u = q / q.norm();
    const Real w = u[0], x = u[1], y = u[2], z = u[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y), 2 * (x * y + w * z),
        1 - 2 * (x * x + z * z), 2 * (y * z - w * x), 2 * (x * z - w * y), 2 * (y * z + w * x),
        1 - 2 * (x * x + y * y);
    return r;
}

SplatRenderer::SplatRenderer(const VisualParticleSet& particles, const Camera& camera, const Image& background)
    : particles_(&particles), camera_(camera)
{
    if (background.channels != 3 || background.width != camera.width || background.height != camera.height) {
        throw Error(ErrorCode::DimensionMismatch, "background must be RGB at the camera resolution");
    }
    const std::size_t n = particles.size();
    const Mat3 w = camera.rotation();
    const Vec3 tc = camera.translation();
    splats_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Splat s;
        s.index = static_cast<std::uint32_t>(i);
        s.t = w * particles.positions[i] + tc;
        s.depth = s.t.z();
        if (!(s.depth > kNearDepth) || particles.opacities[i] <= 0.0) {
            continue;
        }
        s.rot = quaternion_to_matrix(particles.rotations[i]);
        const Mat3 a = s.rot * particles.scales[i].asDiagonal();
        const Mat3 sigma3 = a * a.transpose();
        const Mat23 m = projection_jacobian(camera, s.t) * w;
        const Eigen::Matrix2d sigma2 = m * sigma3 * m.transpose();
        s.a = sigma2(0, 0) + kDilation;
        s.b = 0.5 * (sigma2(0, 1) + sigma2(1, 0));
        s.c = sigma2(1, 1) + kDilation;
        const Real det = s.a * s.c - s.b * s.b;
        if (!(det > 0.0)) {
            continue;
        }
        s.q00 = s.c / det;
        s.q01 = -s.b / det;
        s.q11 = s.a / det;
        s.mx = camera.fx * s.t.x() / s.t.z() + camera.cx;
        s.my = camera.fy * s.t.y() / s.t.z() + camera.cy;
        const Real half = 0.5 * (s.a + s.c);
        const Real lmax = half + std::sqrt(std::max(0.0, 0.25 * (s.a - s.c) * (s.a - s.c) + s.b * s.b));
        const Real radius = std::sqrt(kCutoffMahalanobis2 * lmax);
        // Pixel centres at k + 0.5 inside [m - radius, m + radius].
        s.x0 = std::max(0, static_cast<int>(std::ceil(s.mx - radius - 0.5)));
        s.x1 = std::min(camera.width - 1, static_cast<int>(std::floor(s.mx + radius - 0.5)));
        s.y0 = std::max(0, static_cast<int>(std::ceil(s.my - radius - 0.5)));
        s.y1 = std::min(camera.height - 1, static_cast<int>(std::floor(s.my + radius - 0.5)));
        if (!std::isfinite(s.mx) || !std::isfinite(s.my) || s.x0 > s.x1 || s.y0 > s.y1) {
            continue;
        }
        splats_.push_back(s);
    }
    std::sort(splats_.begin(), splats_.end(), [](const Splat& l, const Splat& r) {
        if (l.depth != r.depth) return l.depth > r.depth;
        return l.index < r.index;
    });

    std::size_t total = 0;
    for (Splat& s : splats_) {
        s.cache = total;
        total += static_cast<std::size_t>(s.x1 - s.x0 + 1) * (s.y1 - s.y0 + 1) * 3;
    }
    behind_.resize(total);

    image_ = background;
    for (const Splat& s : splats_) {
        const Vec3 col = particles.colors[s.index];
        const Real op = particles.opacities[s.index];
        std::size_t k = s.cache;
        for (int py = s.y0; py <= s.y1; ++py) {
            const Real dy = py + 0.5 - s.my;
            for (int px = s.x0; px <= s.x1; ++px, k += 3) {
                Real* pix = &image_.data[image_.index(px, py)];
                behind_[k] = pix[0];
                behind_[k + 1] = pix[1];
                behind_[k + 2] = pix[2];
                const Real dx = px + 0.5 - s.mx;
                const Real m = s.q00 * dx * dx + 2.0 * s.q01 * dx * dy + s.q11 * dy * dy;
                if (m >= kCutoffMahalanobis2) {
                    continue;
                }
                const Real alpha = op * footprint(m);
                for (int ch = 0; ch < 3; ++ch) {
                    pix[ch] = alpha * col[ch] + (1.0 - alpha) * pix[ch];
                }
            }
        }
    }
}

RenderGradients SplatRenderer::backward(const Image& adjoint) const
{
    if (adjoint.channels != 3 || adjoint.width != camera_.width || adjoint.height != camera_.height) {
        throw Error(ErrorCode::DimensionMismatch, "loss adjoint must be RGB at the camera resolution");
    }
    const VisualParticleSet& vp = *particles_;
    RenderGradients grads;
    grads.resize(vp.size());
    Image adj = adjoint;
    const Mat3 w = camera_.rotation();

    for (auto it = splats_.rbegin(); it != splats_.rend(); ++it) {
        const Splat& s = *it;
        const Vec3 col = vp.colors[s.index];
        const Real op = vp.opacities[s.index];
        Vec3 col_bar = Vec3::Zero();
        Real op_bar = 0.0, mx_bar = 0.0, my_bar = 0.0, q00_bar = 0.0, q01_bar = 0.0, q11_bar = 0.0;
        std::size_t k = s.cache;
        for (int py = s.y0; py <= s.y1; ++py) {
            const Real dy = py + 0.5 - s.my;
            for (int px = s.x0; px <= s.x1; ++px, k += 3) {
                const Real dx = px + 0.5 - s.mx;
                const Real m = s.q00 * dx * dx + 2.0 * s.q01 * dx * dy + s.q11 * dy * dy;
                if (m >= kCutoffMahalanobis2) {
                    continue;
                }
                Real* ab = &adj.data[adj.index(px, py)];
                const Real g = footprint(m);
                const Real alpha = op * g;
                Real alpha_bar = 0.0;
                for (int ch = 0; ch < 3; ++ch) {
                    col_bar[ch] += alpha * ab[ch];
                    alpha_bar += ab[ch] * (col[ch] - behind_[k + ch]);
                    ab[ch] *= 1.0 - alpha;
                }
                op_bar += alpha_bar * g;
                const Real m_bar = alpha_bar * op * footprint_slope(m);
                mx_bar += m_bar * (-2.0) * (s.q00 * dx + s.q01 * dy);
                my_bar += m_bar * (-2.0) * (s.q01 * dx + s.q11 * dy);
                q00_bar += m_bar * dx * dx;
                q01_bar += m_bar * 2.0 * dx * dy;
                q11_bar += m_bar * dy * dy;
            }
        }
        const std::uint32_t i = s.index;
        grads.colors[i] = col_bar;
        grads.opacities[i] = op_bar;

        // Inverse of the 2x2 covariance.
        const Real det = s.a * s.c - s.b * s.b;
        const Real id2 = 1.0 / (det * det);
        const Real a_bar = q00_bar * (-s.c * s.c * id2) + q01_bar * (s.b * s.c * id2) + q11_bar * (1.0 / det - s.a * s.c * id2);
        const Real b_bar = q00_bar * (2.0 * s.b * s.c * id2) + q01_bar * (-1.0 / det - 2.0 * s.b * s.b * id2) +
                           q11_bar * (2.0 * s.a * s.b * id2);
        const Real c_bar = q00_bar * (1.0 / det - s.c * s.a * id2) + q01_bar * (s.b * s.a * id2) + q11_bar * (-s.a * s.a * id2);
        Eigen::Matrix2d s2_bar;
        s2_bar << a_bar, 0.5 * b_bar, 0.5 * b_bar, c_bar;

        const Vec3 scale = vp.scales[i];
        const Mat3 amat = s.rot * scale.asDiagonal();
        const Mat3 sigma3 = amat * amat.transpose();
        const Mat23 jac = projection_jacobian(camera_, s.t);
        const Mat23 m = jac * w;
        const Mat3 s3_bar = m.transpose() * s2_bar * m;
        const Mat23 m_bar = 2.0 * s2_bar * m * sigma3;
        const Mat23 j_bar = m_bar * w.transpose();

        const Real tx = s.t.x(), ty = s.t.y(), tz = s.t.z();
        const Real iz = 1.0 / tz, iz2 = iz * iz, iz3 = iz2 * iz;
        const Real fx = camera_.fx, fy = camera_.fy;
        Vec3 t_bar;
        t_bar.x() = j_bar(0, 2) * (-fx * iz2) + mx_bar * fx * iz;
        t_bar.y() = j_bar(1, 2) * (-fy * iz2) + my_bar * fy * iz;
        t_bar.z() = j_bar(0, 0) * (-fx * iz2) + j_bar(0, 2) * (2.0 * fx * tx * iz3) + j_bar(1, 1) * (-fy * iz2) +
                    j_bar(1, 2) * (2.0 * fy * ty * iz3) - mx_bar * fx * tx * iz2 - my_bar * fy * ty * iz2;
        grads.positions[i] = w.transpose() * t_bar;

        const Mat3 a_grad = 2.0 * s3_bar * amat;
        Mat3 rot_bar;
        Vec3 scale_bar;
        for (int col_k = 0; col_k < 3; ++col_k) {
            rot_bar.col(col_k) = a_grad.col(col_k) * scale[col_k];
            scale_bar[col_k] = a_grad.col(col_k).dot(s.rot.col(col_k));
        }
        grads.scales[i] = scale_bar;
        grads.rotations[i] = quaternion_backward(vp.rotations[i], rot_bar);
    }
    return grads;
}

Image render(const VisualParticleSet& particles, const Camera& camera, const Image& background)
{
    return SplatRenderer(particles, camera, background).image();
}

Image render(const VisualParticleSet& particles, const Camera& camera, const Vec3& background_rgb)
{
    return render(particles, camera, Image::flat(camera.width, camera.height, background_rgb));
}

RenderGradients render_grad(const VisualParticleSet& particles, const Camera& camera, const Image& background,
                            const Image& loss_adjoint)
{
    return SplatRenderer(particles, camera, background).backward(loss_adjoint);
}

}  // namespace fluidrec
