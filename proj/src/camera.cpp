// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/camera.hpp"

#include "fluidrec/error.hpp"

namespace fluidrec {

void Camera::validate() const
{
    if (width <= 0 || height <= 0) {
        throw Error(ErrorCode::InvalidArgument, "camera image size must be positive");
    }
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(cx) || !std::isfinite(cy)) {
        throw Error(ErrorCode::InvalidArgument, "camera intrinsics invalid");
    }
    const Mat3 r = rotation();
    if (!extrinsic.allFinite() || (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
        r.determinant() < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "camera rotation block is not orthonormal");
    }
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, Real focal, int width, int height)
{
    const Vec3 forward = (target - eye).normalized();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right);
    Mat3 r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    Camera cam;
    cam.extrinsic.leftCols<3>() = r;
    cam.extrinsic.col(3) = -r * eye;
    cam.fx = cam.fy = focal;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    return cam;
}

}  // namespace fluidrec
