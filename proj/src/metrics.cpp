// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/metrics.hpp"

#include "fluidrec/error.hpp"
#include "fluidrec/parallel.hpp"

#include <cmath>

namespace fluidrec {

Vec3 GridSpec::node(int i, int j, int k) const
{
    const Vec3 s = spacing();
    return bounds.lo + Vec3(i * s.x(), j * s.y(), k * s.z());
}

void GridSpec::validate() const
{
    if (resolution < 2 || !bounds.valid()) {
        throw Error(ErrorCode::InvalidArgument, "grid needs resolution >= 2 and non-degenerate bounds");
    }
}

Real divergence_at(const VelocityFieldView& field, const Vec3& x, const Vec3& step)
{
    const Vec3 centre = field.velocity_at(x);
    Real div = 0.0;
    for (int a = 0; a < 3; ++a) {
        Vec3 d = Vec3::Zero();
        d[a] = step[a];
        Real wp = 0.0, wm = 0.0;
        const Vec3 up = field.velocity_and_weight(x + d, wp);
        const Vec3 um = field.velocity_and_weight(x - d, wm);
        const bool has_p = wp > kDivergenceMask;
        const bool has_m = wm > kDivergenceMask;
        if (has_p && has_m) {
            div += (up[a] - um[a]) / (2.0 * step[a]);
        } else if (has_p) {
            div += (up[a] - centre[a]) / step[a];
        } else if (has_m) {
            div += (centre[a] - um[a]) / step[a];
        }
    }
    return div;
}

Real evaluate_divergence(const FluidTrajectory& traj, const GridSpec& grid, const FluidParams& params,
                         std::vector<Real>* per_timestep)
{
    grid.validate();
    const int r = grid.resolution;
    const std::size_t nodes = static_cast<std::size_t>(r) * r * r;
    const Vec3 step = grid.spacing();
    std::vector<Real> means;
    for (const PhysicalParticleSet& p : traj.physical) {
        if (p.empty()) {
            continue;
        }
        const VelocityFieldView field(p, params.kernel);
        std::vector<Real> value(nodes, 0.0);
        std::vector<unsigned char> mask(nodes, 0);
        parallel_for(nodes, [&](std::size_t n) {
            const int i = static_cast<int>(n % r);
            const int j = static_cast<int>((n / r) % r);
            const int k = static_cast<int>(n / (static_cast<std::size_t>(r) * r));
            const Vec3 x = grid.node(i, j, k);
            if (field.density_at(x) > kDivergenceMask) {
                mask[n] = 1;
                value[n] = std::abs(divergence_at(field, x, step));
            }
        });
        Real sum = 0.0;
        std::size_t count = 0;
        for (std::size_t n = 0; n < nodes; ++n) {
            if (mask[n]) {
                sum += value[n];
                ++count;
            }
        }
        if (count > 0) {
            means.push_back(sum / static_cast<Real>(count));
        }
    }
    if (per_timestep) {
        *per_timestep = means;
    }
    if (means.empty()) {
        return 0.0;
    }
    Real total = 0.0;
    for (Real m : means) {
        total += m;
    }
    return total / static_cast<Real>(means.size());
}

Real psnr(const Image& a, const Image& b)
{
    require_same_shape(a, b);
    if (a.size() == 0) {
        return kPsnrCap;
    }
    Real se = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const Real d = a.data[k] - b.data[k];
        se += d * d;
    }
    const Real mse = se / static_cast<Real>(a.size());
    if (mse <= 0.0) {
        return kPsnrCap;
    }
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

}  // namespace fluidrec
