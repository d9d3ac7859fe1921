// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/vec.hpp"

namespace fluidrec {

/// Pinhole camera. World-to-camera transform [R | t]; the camera looks down
/// +z with +x right and +y down in the image. Pixel (i, j) covers
/// [i, i+1) x [j, j+1), so its center is at (i + 0.5, j + 0.5).
struct Camera {
    Eigen::Matrix<Real, 3, 4> extrinsic = Eigen::Matrix<Real, 3, 4>::Identity();
    Real fx = 100.0, fy = 100.0, cx = 50.0, cy = 50.0;
    int width = 100, height = 100;

    Mat3 rotation() const { return extrinsic.leftCols<3>(); }
    Vec3 translation() const { return extrinsic.col(3); }
    Vec3 to_camera(const Vec3& x) const { return rotation() * x + translation(); }

    /// Throws Error(InvalidArgument) unless the rotation block is orthonormal
    /// to 1e-9 with determinant +1 and the image size is positive.
    void validate() const;

    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, Real focal, int width, int height);
};

}  // namespace fluidrec
