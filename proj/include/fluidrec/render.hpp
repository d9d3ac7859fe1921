// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/camera.hpp"
#include "fluidrec/image.hpp"
#include "fluidrec/particles.hpp"

#include <cstdint>
#include <vector>

namespace fluidrec {

/// Gradients of a scalar image loss with respect to every visual attribute.
struct RenderGradients {
    std::vector<Vec3> positions;
    std::vector<Vec3> colors;
    std::vector<Vec3> scales;
    std::vector<Real> opacities;
    std::vector<Quat> rotations;

    void resize(std::size_t n);
    void add(const RenderGradients& o);
};

/// Splat compositor: perspective projection of 3D Gaussians (covariance
/// R S S^T R^T pushed through the first-order projection Jacobian, plus a
/// 0.3 px^2 screen-space dilation), back-to-front over-compositing onto the
/// background. Footprints are truncated at 3 sigma; the profile has its
/// tangent at the cutoff subtracted and is rescaled, so value and slope reach
/// zero there and it still peaks at the splat opacity. Splats with camera depth below
/// kNearDepth are culled. Depth ties draw the lower index first.
///
/// The forward pass caches the composite seen behind every splat so the
/// reverse pass is exact without dividing by (1 - alpha).
class SplatRenderer {
public:
    static constexpr Real kNearDepth = 1e-2;
    static constexpr Real kDilation = 0.3;
    static constexpr Real kCutoffMahalanobis2 = 9.0;

    /// background must be 3-channel and match the camera size.
    SplatRenderer(const VisualParticleSet& particles, const Camera& camera, const Image& background);

    const Image& image() const { return image_; }

    /// Gradients given d loss / d image.
    RenderGradients backward(const Image& adjoint) const;

private:
    struct Splat {
        std::uint32_t index;
        Real depth;
        Vec3 t;             // camera-space centre
        Mat3 rot;           // rotation from the normalized quaternion
        Real mx, my;        // projected mean (pixels)
        Real a, b, c;       // 2D covariance
        Real q00, q01, q11; // inverse covariance
        int x0, x1, y0, y1; // inclusive pixel bounds
        std::size_t cache;  // offset into behind_
    };

    const VisualParticleSet* particles_;
    Camera camera_;
    std::vector<Splat> splats_;  // draw order (back to front)
    std::vector<Real> behind_;
    Image image_;
};

Image render(const VisualParticleSet& particles, const Camera& camera, const Image& background);
Image render(const VisualParticleSet& particles, const Camera& camera, const Vec3& background_rgb);

RenderGradients render_grad(const VisualParticleSet& particles, const Camera& camera, const Image& background,
                            const Image& loss_adjoint);

/// Rotation matrix of q / |q|, (w, x, y, z) order.
Mat3 quaternion_to_matrix(const Quat& q);

}  // namespace fluidrec
