// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/vec.hpp"

#include <vector>

namespace fluidrec {

/// Row-major image, top row first, channels interleaved.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<Real> data;

    Image() = default;
    Image(int w, int h, int c, Real fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill)
    {
    }

    static Image flat(int w, int h, const Vec3& rgb);

    std::size_t size() const { return data.size(); }
    std::size_t index(int x, int y, int c = 0) const
    {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    Real& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    Real at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

    bool same_shape(const Image& o) const
    {
        return width == o.width && height == o.height && channels == o.channels;
    }

    /// Throws Error(InvalidArgument) on size mismatch or non-finite samples.
    void validate() const;
};

/// Throws Error(DimensionMismatch) unless shapes agree.
void require_same_shape(const Image& a, const Image& b);

}  // namespace fluidrec
