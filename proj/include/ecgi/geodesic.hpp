#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ecgi/error.hpp"
#include "ecgi/mesh.hpp"
#include "ecgi/parallel.hpp"

namespace ecgi {

// Conductivity-weighted geodesic distances on the mesh. The metric corrects
// each edge length by the directional conductivity at its endpoints:
//     w(a,b) = |b - a| / min( sqrt(e' s_a e / e'e), sqrt(e' s_b e / e'e) )
// with e = b - a. High conductivity shortens the metric, low conductivity
// (a block region) lengthens it.

inline double edge_weight(const Vec3& pos_a, const Vec3& pos_b, const SymTensor3& sigma_a,
                          const SymTensor3& sigma_b) {
    const Vec3 e = pos_b - pos_a;
    const double len2 = e.norm2();
    if (len2 == 0.0) throw ParameterError("edge_weight: coincident endpoints");
    const double ca = std::sqrt(sigma_a.quad(e) / len2);
    const double cb = std::sqrt(sigma_b.quad(e) / len2);
    return std::sqrt(len2) / std::min(ca, cb);
}

namespace detail {

struct EdgeGraph {
    // CSR adjacency with per-edge weights.
    std::vector<std::uint32_t> offsets;
    std::vector<std::uint32_t> targets;
    std::vector<double> weights;

    static EdgeGraph build(const TriMesh& mesh) {
        const auto adj = vertex_adjacency(mesh);
        EdgeGraph g;
        g.offsets.reserve(adj.size() + 1);
        g.offsets.push_back(0);
        for (std::size_t v = 0; v < adj.size(); ++v) {
            for (std::uint32_t w : adj[v]) {
                g.targets.push_back(w);
                g.weights.push_back(edge_weight(mesh.vertices[v], mesh.vertices[w],
                                                mesh.conductivity_at(static_cast<std::uint32_t>(v)),
                                                mesh.conductivity_at(w)));
            }
            g.offsets.push_back(static_cast<std::uint32_t>(g.targets.size()));
        }
        return g;
    }
};

inline std::vector<double> dijkstra_on_graph(const EdgeGraph& g, std::uint32_t source) {
    const std::size_t m = g.offsets.size() - 1;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(m, inf);
    // (distance, vertex): among equal keys the lowest vertex index pops first,
    // which makes results deterministic.
    using Item = std::pair<double, std::uint32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    dist[source] = 0.0;
    heap.emplace(0.0, source);
    while (!heap.empty()) {
        const auto [d, v] = heap.top();
        heap.pop();
        if (d > dist[v]) continue;
        for (std::uint32_t k = g.offsets[v]; k < g.offsets[v + 1]; ++k) {
            const double nd = d + g.weights[k];
            const std::uint32_t w = g.targets[k];
            if (nd < dist[w]) {
                dist[w] = nd;
                heap.emplace(nd, w);
            }
        }
    }
    return dist;
}

inline void check_reachable(const std::vector<double>& dist) {
    std::size_t unreachable = 0;
    std::string first;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (std::isinf(dist[i])) {
            if (unreachable < 5) first += (first.empty() ? "" : ", ") + std::to_string(i);
            ++unreachable;
        }
    }
    if (unreachable > 0)
        throw ValidationError("mesh has a disconnected component: " + std::to_string(unreachable) +
                              " unreachable vertices (e.g. " + first + ")");
}

} // namespace detail

/// Single-source shortest paths over the weighted edge graph.
inline std::vector<double> dijkstra_distances(const TriMesh& mesh, std::uint32_t source) {
    if (source >= mesh.vertex_count()) throw ParameterError("dijkstra: source index out of range");
    const auto graph = detail::EdgeGraph::build(mesh);
    auto dist = detail::dijkstra_on_graph(graph, source);
    detail::check_reachable(dist);
    return dist;
}

// ---------------------------------------------------------------------------
// Triangle-based fast marching.
//
// Solves first arrival with a per-vertex scalar speed equal to the square root
// of the smallest conductivity eigenvalue (isotropicized); the triangle update
// is the classical planar local solver, applied from acute corners only, with
// the two edge updates as fallback. With isotropic conductivity this agrees
// with the edge metric up to triangle shortcuts (so fmm <= dijkstra).

namespace detail {

/// Local update for the vertex C of a triangle with known values d1 (at A) and
/// d2 (at B); a = |BC|, b = |AC|, dot = cos of the angle at C; slow = 1/speed.
inline double fmm_triangle_update(double d1, double d2, double a, double b, double cos_c,
                                  double slow) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double u = d2 - d1;
    const double sin2 = std::max(0.0, 1.0 - cos_c * cos_c);
    const double f2 = a * a + b * b - 2.0 * a * b * cos_c;
    const double f1 = b * u * (a * cos_c - b);
    const double f0 = b * b * (u * u - slow * slow * a * a * sin2);
    const double delta = f1 * f1 - f0 * f2;
    double t = inf;
    if (delta >= 0.0 && std::abs(f2) > 1e-300) {
        t = (-f1 + std::sqrt(delta)) / f2;
    }
    // Upwind/monotonicity conditions; outside them the characteristic leaves
    // the triangle and an edge update applies instead.
    if (t > u && t < inf) {
        const double w = b * (t - u) / t;
        if (w > a * cos_c && w < a / std::max(cos_c, 1e-300)) return t + d1;
    }
    return std::min(b * slow + d1, a * slow + d2);
}

} // namespace detail

inline std::vector<double> fmm_distances(const TriMesh& mesh, std::uint32_t source) {
    if (source >= mesh.vertex_count()) throw ParameterError("fmm: source index out of range");
    const std::size_t m = mesh.vertex_count();
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::vector<double> slow(m); // slowness = 1 / sqrt(lambda_min)
    for (std::uint32_t v = 0; v < m; ++v) {
        const double s = mesh.conductivity_at(v).min_eigenvalue();
        if (!(s > 0.0)) throw ValidationError("fmm: non-SPD conductivity at vertex " + std::to_string(v));
        slow[v] = 1.0 / std::sqrt(s);
    }

    std::vector<std::vector<std::uint32_t>> vtx_tris(m);
    for (std::uint32_t t = 0; t < mesh.triangle_count(); ++t)
        for (int k = 0; k < 3; ++k) vtx_tris[mesh.triangles[t][k]].push_back(t);

    std::vector<double> dist(m, inf);
    std::vector<char> frozen(m, 0);
    using Item = std::pair<double, std::uint32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    dist[source] = 0.0;
    heap.emplace(0.0, source);

    auto update_vertex = [&](std::uint32_t c) -> double {
        double best = dist[c];
        const Vec3& pc = mesh.vertices[c];
        for (std::uint32_t t : vtx_tris[c]) {
            const auto& tri = mesh.triangles[t];
            std::uint32_t va = tri[0], vb = tri[1];
            if (va == c) va = tri[2];
            else if (vb == c) vb = tri[2];
            const double da = dist[va];
            const double db = dist[vb];
            const Vec3 ea = mesh.vertices[va] - pc;
            const Vec3 eb = mesh.vertices[vb] - pc;
            const double b_len = ea.norm();
            const double a_len = eb.norm();
            // Edge updates always apply (per-edge slowness matches the
            // Dijkstra weight under isotropic conductivity).
            if (std::isfinite(da))
                best = std::min(best, da + b_len * std::max(slow[c], slow[va]));
            if (std::isfinite(db))
                best = std::min(best, db + a_len * std::max(slow[c], slow[vb]));
            if (std::isfinite(da) && std::isfinite(db)) {
                const double cos_c = ea.dot(eb) / (a_len * b_len);
                if (cos_c > 0.0) { // acute corner: planar triangle update
                    const double sl = std::max({slow[c], slow[va], slow[vb]});
                    const double cand =
                        da <= db ? detail::fmm_triangle_update(da, db, a_len, b_len, cos_c, sl)
                                 : detail::fmm_triangle_update(db, da, b_len, a_len, cos_c, sl);
                    best = std::min(best, cand);
                }
            }
        }
        return best;
    };

    while (!heap.empty()) {
        const auto [d, v] = heap.top();
        heap.pop();
        if (frozen[v] || d > dist[v]) continue;
        frozen[v] = 1;
        for (std::uint32_t t : vtx_tris[v]) {
            for (int k = 0; k < 3; ++k) {
                const std::uint32_t w = mesh.triangles[t][k];
                if (frozen[w]) continue;
                const double nd = update_vertex(w);
                if (nd < dist[w]) {
                    dist[w] = nd;
                    heap.emplace(nd, w);
                }
            }
        }
    }
    detail::check_reachable(dist);
    return dist;
}

// ---------------------------------------------------------------------------
// All-sources table

enum class DistanceBackend : std::uint32_t { dijkstra = 0, fmm = 1 };

inline const char* to_string(DistanceBackend b) {
    return b == DistanceBackend::dijkstra ? "dijkstra" : "fmm";
}

inline DistanceBackend backend_from_string(const std::string& s) {
    if (s == "dijkstra") return DistanceBackend::dijkstra;
    if (s == "fmm") return DistanceBackend::fmm;
    throw ConfigError("unknown distance backend '" + s + "' (expected dijkstra or fmm)");
}

/// All-sources geodesic distance matrix, row = source vertex. Entries are
/// stored as 32-bit floats (the serialized format) to keep m x m tables
/// compact.
struct GeodesicTable {
    std::string metric_id;
    DistanceBackend backend = DistanceBackend::dijkstra;
    std::uint64_t mesh_checksum = 0;
    std::uint32_t m = 0;
    std::vector<float> distances; // row-major m*m

    float at(std::uint32_t i, std::uint32_t j) const {
        return distances[static_cast<std::size_t>(i) * m + j];
    }
    std::span<const float> row(std::uint32_t i) const {
        return {distances.data() + static_cast<std::size_t>(i) * m, m};
    }
    float max_entry() const {
        float mx = 0.0f;
        for (float v : distances) mx = std::max(mx, v);
        return mx;
    }
};

inline constexpr std::size_t kTableVertexGuard = 20000;

inline GeodesicTable build_table(const TriMesh& mesh, DistanceBackend backend,
                                 std::string metric_id = "default", unsigned workers = 0) {
    const std::size_t m = mesh.vertex_count();
    if (m > kTableVertexGuard)
        throw ResourceLimitError(
            "build_table: " + std::to_string(m) + " vertices exceeds the " +
            std::to_string(kTableVertexGuard) +
            "-vertex guard (m^2 entries); use OnDemandDistances instead");
    GeodesicTable table;
    table.metric_id = std::move(metric_id);
    table.backend = backend;
    table.mesh_checksum = mesh.checksum();
    table.m = static_cast<std::uint32_t>(m);
    table.distances.resize(m * m);

    if (backend == DistanceBackend::dijkstra) {
        const auto graph = detail::EdgeGraph::build(mesh);
        parallel_for(m, workers, [&](std::size_t begin, std::size_t end) {
            for (std::size_t s = begin; s < end; ++s) {
                const auto row = detail::dijkstra_on_graph(graph, static_cast<std::uint32_t>(s));
                detail::check_reachable(row);
                float* out = table.distances.data() + s * m;
                for (std::size_t j = 0; j < m; ++j) out[j] = static_cast<float>(row[j]);
            }
        });
    } else {
        parallel_for(m, workers, [&](std::size_t begin, std::size_t end) {
            for (std::size_t s = begin; s < end; ++s) {
                const auto row = fmm_distances(mesh, static_cast<std::uint32_t>(s));
                float* out = table.distances.data() + s * m;
                for (std::size_t j = 0; j < m; ++j) out[j] = static_cast<float>(row[j]);
            }
        });
    }
    return table;
}

/// { j : d(center, j) <= radius }; always contains the center.
inline std::vector<std::uint32_t> ball_vertices(const GeodesicTable& table, std::uint32_t center,
                                                double radius) {
    if (radius < 0.0) throw ParameterError("ball_vertices: radius must be >= 0");
    const auto row = table.row(center);
    std::vector<std::uint32_t> out;
    for (std::uint32_t j = 0; j < table.m; ++j)
        if (row[j] <= radius) out.push_back(j);
    return out;
}

// ---------------------------------------------------------------------------
// Serialization: 16-byte header (magic, m, backend, checksum32) followed by
// row-major little-endian float32.

inline constexpr std::uint32_t kTableMagic = 0x44474345; // "ECGD"

inline void save_table(const GeodesicTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write table file: " + path);
    const std::uint32_t header[4] = {kTableMagic, table.m,
                                     static_cast<std::uint32_t>(table.backend),
                                     static_cast<std::uint32_t>(table.mesh_checksum & 0xffffffffu)};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(table.distances.data()),
              static_cast<std::streamsize>(table.distances.size() * sizeof(float)));
    if (!out) throw Error("short write on table file: " + path);
}

inline GeodesicTable load_table(const std::string& path, const TriMesh& mesh) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open table file: " + path);
    std::uint32_t header[4] = {};
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in || header[0] != kTableMagic) throw FormatError("bad table header: " + path);
    GeodesicTable table;
    table.m = header[1];
    table.backend = static_cast<DistanceBackend>(header[2]);
    table.mesh_checksum = mesh.checksum();
    if (table.m != mesh.vertex_count())
        throw DimensionError("table is for m=" + std::to_string(table.m) + " but mesh has " +
                             std::to_string(mesh.vertex_count()) + " vertices: " + path);
    if (header[3] != (table.mesh_checksum & 0xffffffffu))
        throw ValidationError("table checksum does not match mesh: " + path);
    table.distances.resize(static_cast<std::size_t>(table.m) * table.m);
    in.read(reinterpret_cast<char*>(table.distances.data()),
            static_cast<std::streamsize>(table.distances.size() * sizeof(float)));
    if (!in) throw FormatError("truncated table file: " + path);
    return table;
}

// ---------------------------------------------------------------------------
// On-demand rows for meshes beyond the table guard.

class OnDemandDistances {
public:
    explicit OnDemandDistances(const TriMesh& mesh, DistanceBackend backend = DistanceBackend::dijkstra)
        : mesh_(mesh), backend_(backend), graph_(detail::EdgeGraph::build(mesh)) {}

    std::span<const float> row(std::uint32_t source) {
        auto it = cache_.find(source);
        if (it == cache_.end()) {
            std::vector<double> d = backend_ == DistanceBackend::dijkstra
                                        ? detail::dijkstra_on_graph(graph_, source)
                                        : fmm_distances(mesh_, source);
            detail::check_reachable(d);
            std::vector<float> f(d.begin(), d.end());
            it = cache_.emplace(source, std::move(f)).first;
        }
        return {it->second.data(), it->second.size()};
    }

private:
    const TriMesh& mesh_;
    DistanceBackend backend_;
    detail::EdgeGraph graph_;
    std::unordered_map<std::uint32_t, std::vector<float>> cache_;
};

/// Resolve a geodesic ball to an explicit vertex-set region (for conductivity
/// specs); distances use the mesh's current conductivity.
inline Region geodesic_ball_region(const TriMesh& mesh, std::uint32_t center_vertex,
                                   double radius_mm) {
    const auto d = dijkstra_distances(mesh, center_vertex);
    Region r;
    r.kind = Region::Kind::vertex_set;
    for (std::uint32_t v = 0; v < mesh.vertex_count(); ++v)
        if (d[v] <= radius_mm) r.vertices.push_back(v);
    return r;
}

inline Region resolve_region(const TriMesh& mesh, Region region) {
    if (region.kind == Region::Kind::geodesic_ball)
        return geodesic_ball_region(mesh, region.center_vertex, region.radius_mm);
    return region;
}

} // namespace ecgi
