// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/kernel.hpp"

namespace fluidrec {

Real kernel_eval(const KernelSpec& spec, const Vec3& r)
{
    switch (spec.kind) {
    case KernelKind::Poly6:
        return Poly6(spec.radius).value_r2(r.squaredNorm());
    case KernelKind::Spiky:
        return Spiky(spec.radius).value(r.norm());
    }
    return 0.0;
}

Vec3 kernel_gradient(const KernelSpec& spec, const Vec3& r)
{
    switch (spec.kind) {
    case KernelKind::Poly6:
        return Poly6(spec.radius).gradient(r, r.squaredNorm());
    case KernelKind::Spiky:
        return Spiky(spec.radius).gradient(r, r.norm());
    }
    return Vec3::Zero();
}

}  // namespace fluidrec
