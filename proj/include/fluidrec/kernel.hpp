// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/vec.hpp"

#include <numbers>

namespace fluidrec {

enum class KernelKind { Poly6, Spiky };

struct KernelSpec {
    Real radius = 1.0;
    KernelKind kind = KernelKind::Poly6;
};

/// W(r; h) for the selected kernel; zero for |r| >= h.
Real kernel_eval(const KernelSpec& spec, const Vec3& r);

/// Gradient of W with respect to r.
Vec3 kernel_gradient(const KernelSpec& spec, const Vec3& r);

/// Poly6: W = 315 / (64 pi h^9) (h^2 - |r|^2)^3.
class Poly6 {
public:
    explicit Poly6(Real h)
        : h2_(h * h), coeff_(315.0 / (64.0 * std::numbers::pi * std::pow(h, 9))),
          grad_coeff_(-6.0 * coeff_)
    {
    }

    Real h2() const { return h2_; }
    Real at_zero() const { return coeff_ * h2_ * h2_ * h2_; }

    Real value_r2(Real r2) const
    {
        if (r2 >= h2_) {
            return 0.0;
        }
        const Real d = h2_ - r2;
        return coeff_ * d * d * d;
    }

    Vec3 gradient(const Vec3& r, Real r2) const
    {
        if (r2 >= h2_) {
            return Vec3::Zero();
        }
        const Real d = h2_ - r2;
        return (grad_coeff_ * d * d) * r;
    }

private:
    Real h2_;
    Real coeff_;
    Real grad_coeff_;
};

/// Spiky: W = 15 / (pi h^6) (h - |r|)^3. Used for the constraint gradient.
class Spiky {
public:
    explicit Spiky(Real h)
        : h_(h), h2_(h * h), coeff_(15.0 / (std::numbers::pi * std::pow(h, 6))),
          grad_coeff_(-45.0 / (std::numbers::pi * std::pow(h, 6)))
    {
    }

    Real h() const { return h_; }
    Real h2() const { return h2_; }

    Real value(Real q) const
    {
        if (q >= h_) {
            return 0.0;
        }
        const Real d = h_ - q;
        return coeff_ * d * d * d;
    }

    /// dW/dq along the radial direction (negative inside the support).
    Real radial_derivative(Real q) const
    {
        if (q >= h_) {
            return 0.0;
        }
        const Real d = h_ - q;
        return grad_coeff_ * d * d;
    }

    /// Scalar f(q) with gradient = f(q) r; zero outside (0, h).
    Real gradient_factor(Real q) const
    {
        if (q >= h_ || q <= 0.0) {
            return 0.0;
        }
        const Real d = h_ - q;
        return grad_coeff_ * d * d / q;
    }

    /// Gradient given r and q = |r| > 0.
    Vec3 gradient(const Vec3& r, Real q) const { return gradient_factor(q) * r; }

    /// d(gradient)/dr, symmetric 3x3. Undefined at q = 0; returns zero there.
    Mat3 hessian(const Vec3& r, Real q) const
    {
        if (q >= h_ || q <= 0.0) {
            return Mat3::Zero();
        }
        const Real d = h_ - q;
        const Real f = grad_coeff_ * d * d / q;
        // f'(q) for f(q) = c (h - q)^2 / q
        const Real df = grad_coeff_ * (-2.0 * d / q - d * d / (q * q));
        return f * Mat3::Identity() + (df / q) * (r * r.transpose());
    }

private:
    Real h_;
    Real h2_;
    Real coeff_;
    Real grad_coeff_;
};

}  // namespace fluidrec
