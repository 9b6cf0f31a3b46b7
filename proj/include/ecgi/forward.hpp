#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ecgi/error.hpp"
#include "ecgi/front.hpp"
#include "ecgi/mesh.hpp"

namespace ecgi {

/// Linear map from a per-vertex transmembrane voltage to potentials at q
/// electrodes. Stored column-major (one contiguous column per mesh vertex) so
/// apply() can skip resting vertices; the file format is row-major.
struct TransferOperator {
    enum class Provenance { loaded, dipole_layer };

    std::size_t q = 0;
    std::size_t m = 0;
    Provenance provenance = Provenance::dipole_layer;
    std::uint64_t mesh_checksum = 0;
    std::vector<double> cols; // column-major q*m

    double at(std::size_t e, std::size_t v) const { return cols[v * q + e]; }
    double& at(std::size_t e, std::size_t v) { return cols[v * q + e]; }
    const double* col(std::size_t v) const { return cols.data() + v * q; }
};

/// Equivalent-dipole-layer kernel: potential of a uniform dipole layer of
/// strength v over the surface, lumped at vertices (one-ring area / 3).
inline TransferOperator build_dipole_layer(const TriMesh& mesh, const ElectrodeSet& electrodes) {
    validate(electrodes, mesh);
    const std::size_t m = mesh.vertex_count();
    const std::size_t q = electrodes.count();

    std::vector<double> vertex_area(m, 0.0);
    for (const auto& t : mesh.triangles) {
        const double a =
            triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]) / 3.0;
        vertex_area[t[0]] += a;
        vertex_area[t[1]] += a;
        vertex_area[t[2]] += a;
    }

    TransferOperator op;
    op.q = q;
    op.m = m;
    op.provenance = TransferOperator::Provenance::dipole_layer;
    op.mesh_checksum = mesh.checksum();
    op.cols.resize(q * m);
    for (std::size_t v = 0; v < m; ++v) {
        const Vec3& pv = mesh.vertices[v];
        const Vec3& nv = mesh.normals[v];
        for (std::size_t e = 0; e < q; ++e) {
            const Vec3 r = electrodes.positions[e] - pv;
            const double r2 = r.norm2();
            if (!(r2 > 0.0))
                throw ValidationError("electrode " + std::to_string(e) +
                                      " coincides with vertex " + std::to_string(v));
            op.at(e, v) = -(1.0 / (4.0 * M_PI)) * vertex_area[v] * r.dot(nv) / (r2 * std::sqrt(r2));
        }
    }
    return op;
}

inline std::vector<double> apply(const TransferOperator& op, std::span<const double> field) {
    if (field.size() != op.m)
        throw DimensionError("apply: field has " + std::to_string(field.size()) +
                             " values, operator expects " + std::to_string(op.m));
    std::vector<double> out(op.q, 0.0);
    for (std::size_t v = 0; v < op.m; ++v) {
        const double x = field[v];
        if (x == 0.0) continue;
        const double* c = op.col(v);
        for (std::size_t e = 0; e < op.q; ++e) out[e] += c[e] * x;
    }
    return out;
}

inline std::vector<double> apply(const TransferOperator& op, const VoltageField& field) {
    return apply(op, std::span<const double>(field.values));
}

/// Potentials are defined up to an additive constant; project onto zero mean.
inline void zero_mean_inplace(std::span<double> vec) {
    if (vec.empty()) throw ParameterError("zero_mean: empty vector");
    const double mean = pairwise_sum(vec.data(), vec.size()) / static_cast<double>(vec.size());
    for (double& x : vec) x -= mean;
}

inline std::vector<double> zero_mean(std::span<const double> vec) {
    std::vector<double> out(vec.begin(), vec.end());
    zero_mean_inplace(out);
    return out;
}

// ---------------------------------------------------------------------------
// Matrix file: 16-byte header (magic, q, m, reserved) + row-major float64 LE.

inline constexpr std::uint32_t kOperatorMagic = 0x4f474345; // "ECGO"

inline void save_operator(const TransferOperator& op, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write operator file: " + path);
    const std::uint32_t header[4] = {kOperatorMagic, static_cast<std::uint32_t>(op.q),
                                     static_cast<std::uint32_t>(op.m), 0u};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    std::vector<double> row(op.m);
    for (std::size_t e = 0; e < op.q; ++e) {
        for (std::size_t v = 0; v < op.m; ++v) row[v] = op.at(e, v);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
    if (!out) throw Error("short write on operator file: " + path);
}

inline TransferOperator load_operator(const std::string& path, const TriMesh& mesh) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open operator file: " + path);
    std::uint32_t header[4] = {};
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in || header[0] != kOperatorMagic) throw FormatError("bad operator header: " + path);
    TransferOperator op;
    op.q = header[1];
    op.m = header[2];
    op.provenance = TransferOperator::Provenance::loaded;
    op.mesh_checksum = mesh.checksum();
    if (op.m != mesh.vertex_count())
        throw DimensionError("operator is for m=" + std::to_string(op.m) + " but mesh has " +
                             std::to_string(mesh.vertex_count()) + " vertices: " + path);
    op.cols.resize(op.q * op.m);
    std::vector<double> row(op.m);
    for (std::size_t e = 0; e < op.q; ++e) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(double)));
        if (!in) throw FormatError("truncated operator file: " + path);
        for (std::size_t v = 0; v < op.m; ++v) op.at(e, v) = row[v];
    }
    return op;
}

// ---------------------------------------------------------------------------
// Electrode potentials over time (the observation sequence).

struct ObservationSeq {
    std::size_t n = 0; // time steps
    std::size_t q = 0; // electrodes
    double dt_ms = 1.0;
    std::vector<double> data; // row-major n*q
    // noise metadata (set by add_noise)
    double noise_std = 0.0;
    double realized_snr_db = 0.0;
    bool zero_signal_warning = false;

    std::span<const double> step(std::size_t k) const { return {data.data() + k * q, q}; }
    std::span<double> step(std::size_t k) { return {data.data() + k * q, q}; }
};

} // namespace ecgi
