#pragma once

#include <span>
#include <vector>

#include "ecgi/error.hpp"
#include "ecgi/geodesic.hpp"

namespace ecgi {

/// Smoothed-Heaviside activation front: 0 at rest, 1 on the plateau, cubic
/// transition of half-width `width_mm` around the front location.
struct FrontTemplate {
    double width_mm;

    explicit FrontTemplate(double width) : width_mm(width) {
        if (!(width > 0.0)) throw ParameterError("front template width must be positive");
    }

    /// xi = radius - distance to center (mm, signed).
    double value(double xi) const {
        if (xi < -width_mm) return 0.0;
        if (xi > width_mm) return 1.0;
        const double w3 = width_mm * width_mm * width_mm;
        return -xi * xi * xi / (4.0 * w3) + 3.0 * xi / (4.0 * width_mm) + 0.5;
    }
};

inline double v_template(double xi, double width_mm) { return FrontTemplate(width_mm).value(xi); }

/// Per-vertex transmembrane voltage in [0, 1] at one time step.
struct VoltageField {
    std::vector<double> values;
    int time_index = 0;
};

/// v(x) = max_i V(r_i - d(x, c_i)) over the given centers/radii, evaluated at
/// every mesh vertex. A center with zero radius contributes nothing beyond its
/// immediate width neighborhood; overlapping balls saturate at 1.
inline void reconstruct_tmv_into(std::span<const std::uint32_t> centers,
                                 std::span<const double> radii, const GeodesicTable& table,
                                 const FrontTemplate& tmpl, std::span<double> out) {
    const std::uint32_t m = table.m;
    for (std::uint32_t j = 0; j < m; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < centers.size(); ++i) {
        if (centers[i] >= m)
            throw ParameterError("reconstruct_tmv: center index " + std::to_string(centers[i]) +
                                 " out of range");
        const auto row = table.row(centers[i]);
        const double r = radii[i];
        for (std::uint32_t j = 0; j < m; ++j) {
            const double v = tmpl.value(r - static_cast<double>(row[j]));
            if (v > out[j]) out[j] = v;
        }
    }
}

inline VoltageField reconstruct_tmv(std::span<const std::uint32_t> centers,
                                    std::span<const double> radii, const GeodesicTable& table,
                                    const FrontTemplate& tmpl) {
    VoltageField field;
    field.values.resize(table.m);
    reconstruct_tmv_into(centers, radii, table, tmpl, field.values);
    return field;
}

} // namespace ecgi
