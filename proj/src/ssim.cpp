// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/ssim.hpp"

#include "fluidrec/error.hpp"

#include <array>
#include <cmath>

namespace fluidrec {

namespace {

constexpr int kW = SsimParams::kWindow;
constexpr Real kC1 = (SsimParams::kK1 * 1.0) * (SsimParams::kK1 * 1.0);
constexpr Real kC2 = (SsimParams::kK2 * 1.0) * (SsimParams::kK2 * 1.0);

std::array<Real, kW> gaussian_taps()
{
    std::array<Real, kW> g{};
    Real sum = 0.0;
    for (int i = 0; i < kW; ++i) {
        const Real d = i - kW / 2;
        g[i] = std::exp(-d * d / (2.0 * SsimParams::kSigma * SsimParams::kSigma));
        sum += g[i];
    }
    for (Real& v : g) {
        v /= sum;
    }
    return g;
}

const std::array<Real, kW>& taps()
{
    static const std::array<Real, kW> g = gaussian_taps();
    return g;
}

/// Plane of one channel, valid-window filtered: output (w-10) x (h-10).
struct Plane {
    int w = 0, h = 0;
    std::vector<Real> v;
    Plane(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, 0.0) {}
    Real& at(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
    Real at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

Plane filter_valid(const Plane& in)
{
    const auto& g = taps();
    const int ow = in.w - kW + 1, oh = in.h - kW + 1;
    Plane tmp(ow, in.h);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < ow; ++x) {
            Real s = 0.0;
            for (int k = 0; k < kW; ++k) {
                s += g[k] * in.at(x + k, y);
            }
            tmp.at(x, y) = s;
        }
    }
    Plane out(ow, oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            Real s = 0.0;
            for (int k = 0; k < kW; ++k) {
                s += g[k] * tmp.at(x, y + k);
            }
            out.at(x, y) = s;
        }
    }
    return out;
}

/// Transpose of filter_valid: scatters a (w-10) x (h-10) map back to w x h.
Plane filter_adjoint(const Plane& in, int w, int h)
{
    const auto& g = taps();
    Plane tmp(in.w, h);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            const Real v = in.at(x, y);
            for (int k = 0; k < kW; ++k) {
                tmp.at(x, y + k) += g[k] * v;
            }
        }
    }
    Plane out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            const Real v = tmp.at(x, y);
            for (int k = 0; k < kW; ++k) {
                out.at(x + k, y) += g[k] * v;
            }
        }
    }
    return out;
}

Plane channel(const Image& img, int c)
{
    Plane p(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            p.at(x, y) = img.at(x, y, c);
        }
    }
    return p;
}

Plane product(const Plane& a, const Plane& b)
{
    Plane p(a.w, a.h);
    for (std::size_t i = 0; i < p.v.size(); ++i) {
        p.v[i] = a.v[i] * b.v[i];
    }
    return p;
}

}  // namespace

Real ssim(const Image& a, const Image& b)
{
    return ssim_with_grad(a, b, nullptr);
}

Real ssim_with_grad(const Image& a, const Image& b, Image* grad_a)
{
    require_same_shape(a, b);
    if (a.width < kW || a.height < kW) {
        throw Error(ErrorCode::InvalidArgument, "SSIM needs images at least 11 pixels on each side");
    }
    const int ow = a.width - kW + 1, oh = a.height - kW + 1;
    const Real count = static_cast<Real>(ow) * oh * a.channels;
    if (grad_a) {
        *grad_a = Image(a.width, a.height, a.channels, 0.0);
    }
    Real total = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        const Plane x = channel(a, c);
        const Plane y = channel(b, c);
        const Plane mx = filter_valid(x);
        const Plane my = filter_valid(y);
        const Plane exx = filter_valid(product(x, x));
        const Plane eyy = filter_valid(product(y, y));
        const Plane exy = filter_valid(product(x, y));
        Plane d_mx(ow, oh), d_exx(ow, oh), d_exy(ow, oh);
        for (std::size_t i = 0; i < mx.v.size(); ++i) {
            const Real ux = mx.v[i], uy = my.v[i];
            const Real a1 = 2.0 * ux * uy + kC1;
            const Real a2 = 2.0 * (exy.v[i] - ux * uy) + kC2;
            const Real b1 = ux * ux + uy * uy + kC1;
            const Real b2 = (exx.v[i] - ux * ux) + (eyy.v[i] - uy * uy) + kC2;
            const Real den = b1 * b2;
            const Real s = a1 * a2 / den;
            total += s;
            if (grad_a) {
                // d s for independent ux, exx, exy.
                d_mx.v[i] = (2.0 * uy * a2 - 2.0 * uy * a1) / den - s * (2.0 * ux / b1 - 2.0 * ux / b2);
                d_exx.v[i] = -s / b2;
                d_exy.v[i] = 2.0 * a1 / den;
            }
        }
        if (grad_a) {
            const Plane g1 = filter_adjoint(d_mx, a.width, a.height);
            const Plane g2 = filter_adjoint(d_exx, a.width, a.height);
            const Plane g3 = filter_adjoint(d_exy, a.width, a.height);
            for (int py = 0; py < a.height; ++py) {
                for (int px = 0; px < a.width; ++px) {
                    grad_a->at(px, py, c) =
                        (g1.at(px, py) + 2.0 * x.at(px, py) * g2.at(px, py) + y.at(px, py) * g3.at(px, py)) / count;
                }
            }
        }
    }
    return total / count;
}

}  // namespace fluidrec
