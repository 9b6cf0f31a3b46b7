#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "ecgi/error.hpp"

namespace ecgi {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    double norm2() const { return dot(*this); }
    Vec3 normalized() const {
        const double n = norm();
        return n > 0.0 ? *this / n : Vec3{};
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Symmetric 3x3 tensor stored as its six independent coefficients.
/// Used for per-vertex conductivity.
struct SymTensor3 {
    double xx = 1.0, xy = 0.0, xz = 0.0, yy = 1.0, yz = 0.0, zz = 1.0;

    static SymTensor3 identity() { return {}; }

    static SymTensor3 isotropic(double s) { return {s, 0.0, 0.0, s, 0.0, s}; }

    /// transverse * I + (longitudinal - transverse) * d d^T for a unit direction d.
    static SymTensor3 axis_aligned(double longitudinal, double transverse, const Vec3& direction) {
        const Vec3 d = direction.normalized();
        const double a = longitudinal - transverse;
        return {transverse + a * d.x * d.x,
                a * d.x * d.y,
                a * d.x * d.z,
                transverse + a * d.y * d.y,
                a * d.y * d.z,
                transverse + a * d.z * d.z};
    }

    SymTensor3 scaled(double f) const { return {xx * f, xy * f, xz * f, yy * f, yz * f, zz * f}; }

    /// v^T sigma v
    double quad(const Vec3& v) const {
        return v.x * (xx * v.x + xy * v.y + xz * v.z) + v.y * (xy * v.x + yy * v.y + yz * v.z) +
               v.z * (xz * v.x + yz * v.y + zz * v.z);
    }

    double trace() const { return xx + yy + zz; }

    double det() const {
        return xx * (yy * zz - yz * yz) - xy * (xy * zz - yz * xz) + xz * (xy * yz - yy * xz);
    }

    /// Eigenvalues in ascending order (trigonometric closed form for symmetric 3x3).
    std::array<double, 3> eigenvalues() const {
        const double p1 = xy * xy + xz * xz + yz * yz;
        if (p1 == 0.0) {
            std::array<double, 3> e{xx, yy, zz};
            std::sort(e.begin(), e.end());
            return e;
        }
        const double q = trace() / 3.0;
        const double p2 =
            (xx - q) * (xx - q) + (yy - q) * (yy - q) + (zz - q) * (zz - q) + 2.0 * p1;
        const double p = std::sqrt(p2 / 6.0);
        SymTensor3 b{(xx - q) / p, xy / p,       xz / p,
                     (yy - q) / p, yz / p,       (zz - q) / p};
        double r = b.det() / 2.0;
        r = std::clamp(r, -1.0, 1.0);
        const double phi = std::acos(r) / 3.0;
        const double e_max = q + 2.0 * p * std::cos(phi);
        const double e_min = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
        return {e_min, trace() - e_max - e_min, e_max};
    }

    double min_eigenvalue() const { return eigenvalues()[0]; }

    bool is_spd(double tol = 0.0) const { return min_eigenvalue() > tol; }
};

/// Robust sum for order-independent reductions: pairwise over a contiguous range.
inline double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

template <typename Container>
double pairwise_sum(const Container& c) {
    return pairwise_sum(c.data(), c.size());
}

} // namespace ecgi
