// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/image.hpp"

#include "fluidrec/error.hpp"

#include <string>

namespace fluidrec {

Image Image::flat(int w, int h, const Vec3& rgb)
{
    Image img(w, h, 3);
    for (std::size_t k = 0; k < img.data.size(); k += 3) {
        img.data[k] = rgb.x();
        img.data[k + 1] = rgb.y();
        img.data[k + 2] = rgb.z();
    }
    return img;
}

void Image::validate() const
{
    if (width < 0 || height < 0 || (channels != 1 && channels != 3) ||
        data.size() != static_cast<std::size_t>(width) * height * channels) {
        throw Error(ErrorCode::InvalidArgument, "image shape inconsistent with sample count");
    }
    for (Real v : data) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::InvalidArgument, "non-finite image sample");
        }
    }
}

void require_same_shape(const Image& a, const Image& b)
{
    if (!a.same_shape(b)) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::to_string(a.width) + "x" + std::to_string(a.height) + "x" + std::to_string(a.channels) +
                        " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                        std::to_string(b.channels));
    }
}

}  // namespace fluidrec
