// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/image.hpp"

namespace fluidrec {

/// Structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1. Local statistics are taken only
/// where the window fits inside the image; the result is the mean over those
/// windows and all channels.
struct SsimParams {
    static constexpr int kWindow = 11;
    static constexpr Real kSigma = 1.5;
    static constexpr Real kK1 = 0.01;
    static constexpr Real kK2 = 0.03;
};

/// Throws Error(DimensionMismatch) for differing shapes and
/// Error(InvalidArgument) when either side is shorter than the window.
Real ssim(const Image& a, const Image& b);

/// SSIM(a, b) and, if grad_a is non-null, d SSIM / d a.
Real ssim_with_grad(const Image& a, const Image& b, Image* grad_a);

}  // namespace fluidrec
