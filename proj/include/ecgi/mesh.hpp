#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ecgi/error.hpp"
#include "ecgi/geometry.hpp"

namespace ecgi {

/// Triangle surface mesh, positions in mm. Immutable after construction:
/// all operations that change a mesh return a copy.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
    std::vector<Vec3> normals; // per-vertex, outward unit
    std::optional<std::vector<SymTensor3>> conductivity;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t triangle_count() const { return triangles.size(); }

    const SymTensor3& conductivity_at(std::uint32_t v) const {
        static const SymTensor3 ident = SymTensor3::identity();
        return conductivity ? (*conductivity)[v] : ident;
    }

    Vec3 centroid() const {
        Vec3 c{};
        for (const Vec3& v : vertices) c += v;
        return c / static_cast<double>(vertices.size());
    }

    /// Content hash over geometry (vertices + triangles). Binds derived
    /// artifacts (distance tables, transfer operators) to the mesh.
    std::uint64_t checksum() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto feed = [&h](const void* p, std::size_t n) {
            const auto* b = static_cast<const unsigned char*>(p);
            for (std::size_t i = 0; i < n; ++i) {
                h ^= b[i];
                h *= 0x100000001b3ULL;
            }
        };
        for (const Vec3& v : vertices) feed(&v, sizeof(double) * 3);
        for (const auto& t : triangles) feed(t.data(), sizeof(std::uint32_t) * 3);
        return h;
    }
};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

namespace detail {

inline std::vector<std::vector<std::uint32_t>> vertex_adjacency(const TriMesh& mesh) {
    std::vector<std::vector<std::uint32_t>> adj(mesh.vertex_count());
    auto link = [&adj](std::uint32_t a, std::uint32_t b) {
        auto& row = adj[a];
        for (std::uint32_t v : row)
            if (v == b) return;
        row.push_back(b);
    };
    for (const auto& t : mesh.triangles) {
        link(t[0], t[1]);
        link(t[1], t[0]);
        link(t[1], t[2]);
        link(t[2], t[1]);
        link(t[2], t[0]);
        link(t[0], t[2]);
    }
    return adj;
}

} // namespace detail

/// Enumerate invariant violations; empty result means the mesh is valid.
inline std::vector<std::string> validate_collect(const TriMesh& mesh) {
    std::vector<std::string> bad;
    const std::size_t m = mesh.vertex_count();
    if (m < 3) bad.push_back("mesh has fewer than 3 vertices");
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        bool in_range = true;
        for (int k = 0; k < 3; ++k) {
            if (t[k] >= m) {
                bad.push_back("triangle " + std::to_string(i) + ": vertex index " +
                              std::to_string(t[k]) + " out of range (m=" + std::to_string(m) + ")");
                in_range = false;
            }
        }
        if (!in_range) continue;
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
            bad.push_back("triangle " + std::to_string(i) + ": repeated vertex");
            continue;
        }
        const double area = triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
        if (!(area > 1e-12))
            bad.push_back("triangle " + std::to_string(i) + ": area " + std::to_string(area) +
                          " below 1e-12 mm^2");
    }
    // Connectivity over the edge graph (only meaningful if indices were sane).
    if (bad.empty() && m > 0) {
        const auto adj = detail::vertex_adjacency(mesh);
        std::vector<char> seen(m, 0);
        std::vector<std::uint32_t> stack{0};
        seen[0] = 1;
        std::size_t reached = 1;
        while (!stack.empty()) {
            const std::uint32_t v = stack.back();
            stack.pop_back();
            for (std::uint32_t w : adj[v]) {
                if (!seen[w]) {
                    seen[w] = 1;
                    ++reached;
                    stack.push_back(w);
                }
            }
        }
        if (reached != m)
            bad.push_back("edge graph not connected: reached " + std::to_string(reached) + " of " +
                          std::to_string(m) + " vertices");
    }
    if (mesh.conductivity) {
        if (mesh.conductivity->size() != m) {
            bad.push_back("conductivity field size " + std::to_string(mesh.conductivity->size()) +
                          " does not match vertex count " + std::to_string(m));
        } else {
            for (std::size_t i = 0; i < m; ++i) {
                if (!(*mesh.conductivity)[i].is_spd())
                    bad.push_back("conductivity tensor at vertex " + std::to_string(i) +
                                  " is not SPD");
            }
        }
    }
    return bad;
}

inline void validate(const TriMesh& mesh) {
    const auto bad = validate_collect(mesh);
    if (!bad.empty()) {
        std::string msg = "mesh validation failed:";
        for (const auto& b : bad) msg += "\n  " + b;
        throw ValidationError(msg);
    }
}

/// Area-weighted per-vertex normals, unit length.
inline void compute_normals(TriMesh& mesh) {
    mesh.normals.assign(mesh.vertex_count(), Vec3{});
    for (const auto& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3& b = mesh.vertices[t[1]];
        const Vec3& c = mesh.vertices[t[2]];
        const Vec3 n = (b - a).cross(c - a); // magnitude = 2 * area
        mesh.normals[t[0]] += n;
        mesh.normals[t[1]] += n;
        mesh.normals[t[2]] += n;
    }
    for (Vec3& n : mesh.normals) n = n.normalized();
}

// ---------------------------------------------------------------------------
// Loading (OFF / Wavefront OBJ, ASCII, positions in mm)

namespace detail {

inline std::string next_content_line(std::istream& in, std::size_t& line_no) {
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        const auto pos = line.find_first_not_of(" \t\r\n");
        if (pos == std::string::npos) continue;
        if (line[pos] == '#') continue;
        return line;
    }
    return {};
}

inline TriMesh load_off(std::istream& in, const std::string& path) {
    std::size_t line_no = 0;
    std::string header = next_content_line(in, line_no);
    if (header.substr(0, 3) != "OFF")
        throw FormatError(path + ":" + std::to_string(line_no) + ": expected OFF header");
    std::size_t nv = 0, nf = 0, ne = 0;
    {
        std::string counts = header.size() > 3 ? header.substr(3) : std::string{};
        if (counts.find_first_not_of(" \t\r") == std::string::npos)
            counts = next_content_line(in, line_no);
        std::istringstream cs(counts);
        if (!(cs >> nv >> nf >> ne))
            throw FormatError(path + ":" + std::to_string(line_no) + ": bad OFF count line");
    }
    TriMesh mesh;
    mesh.vertices.reserve(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        std::istringstream ls(next_content_line(in, line_no));
        Vec3 v;
        if (!(ls >> v.x >> v.y >> v.z))
            throw FormatError(path + ":" + std::to_string(line_no) + ": bad vertex line");
        mesh.vertices.push_back(v);
    }
    mesh.triangles.reserve(nf);
    for (std::size_t i = 0; i < nf; ++i) {
        std::istringstream ls(next_content_line(in, line_no));
        std::size_t k = 0;
        if (!(ls >> k))
            throw FormatError(path + ":" + std::to_string(line_no) + ": bad face line");
        if (k != 3)
            throw FormatError(path + ":" + std::to_string(line_no) +
                              ": only triangle faces supported, got " + std::to_string(k) +
                              " vertices");
        std::array<std::uint32_t, 3> t{};
        if (!(ls >> t[0] >> t[1] >> t[2]))
            throw FormatError(path + ":" + std::to_string(line_no) + ": bad face indices");
        mesh.triangles.push_back(t);
    }
    return mesh;
}

inline TriMesh load_obj(std::istream& in, const std::string& path) {
    TriMesh mesh;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ls >> v.x >> v.y >> v.z))
                throw FormatError(path + ":" + std::to_string(line_no) + ": bad vertex line");
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<std::uint32_t, 3> t{};
            std::string tok;
            int k = 0;
            while (ls >> tok) {
                if (k >= 3)
                    throw FormatError(path + ":" + std::to_string(line_no) +
                                      ": only triangle faces supported");
                // accept "idx", "idx/..", "idx//.."
                long idx = 0;
                try {
                    idx = std::stol(tok.substr(0, tok.find('/')));
                } catch (...) {
                    throw FormatError(path + ":" + std::to_string(line_no) + ": bad face token '" +
                                      tok + "'");
                }
                if (idx < 0) idx = static_cast<long>(mesh.vertices.size()) + idx + 1;
                if (idx < 1)
                    throw FormatError(path + ":" + std::to_string(line_no) + ": face index < 1");
                t[k++] = static_cast<std::uint32_t>(idx - 1);
            }
            if (k != 3)
                throw FormatError(path + ":" + std::to_string(line_no) +
                                  ": face needs exactly 3 vertices");
            mesh.triangles.push_back(t);
        }
    }
    return mesh;
}

} // namespace detail

inline TriMesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open mesh file: " + path);
    const auto dot = path.find_last_of('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    TriMesh mesh;
    if (ext == "off" || ext == "OFF")
        mesh = detail::load_off(in, path);
    else if (ext == "obj" || ext == "OBJ")
        mesh = detail::load_obj(in, path);
    else
        throw FormatError("unsupported mesh format '" + ext + "' (expected .off or .obj): " + path);
    validate(mesh);
    compute_normals(mesh);
    return mesh;
}

// ---------------------------------------------------------------------------
// Test geometry: icospheres and ellipsoids

enum class TestMeshKind { sphere, ellipsoid };

/// Icosphere with 10*4^s + 2 vertices. Subdivision appends edge midpoints after
/// the existing vertices, so the vertex list of level s is a prefix of level
/// s+1 (used to transfer fields between resolutions).
inline TriMesh make_test_mesh(TestMeshKind kind, double radius_mm, int subdivisions,
                              Vec3 axis_scales = {1.0, 0.7, 0.5}) {
    if (radius_mm <= 0.0) throw ParameterError("radius_mm must be positive");
    if (subdivisions < 0) throw ParameterError("subdivisions must be >= 0");
    if (subdivisions > 6)
        throw ResourceLimitError("subdivisions > 6 would exceed the vertex-count guard");

    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1},
    };
    std::vector<std::array<std::uint32_t, 3>> tris = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
    };
    for (Vec3& v : verts) v = v.normalized();

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
        auto mid = [&](std::uint32_t a, std::uint32_t b) -> std::uint32_t {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const std::uint32_t idx = static_cast<std::uint32_t>(verts.size());
            verts.push_back(((verts[a] + verts[b]) * 0.5).normalized());
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<std::uint32_t, 3>> next;
        next.reserve(tris.size() * 4);
        for (const auto& t : tris) {
            const std::uint32_t ab = mid(t[0], t[1]);
            const std::uint32_t bc = mid(t[1], t[2]);
            const std::uint32_t ca = mid(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        tris = std::move(next);
    }

    TriMesh mesh;
    mesh.triangles = std::move(tris);
    mesh.vertices.reserve(verts.size());
    const Vec3 scale =
        kind == TestMeshKind::sphere ? Vec3{1.0, 1.0, 1.0} : axis_scales;
    for (const Vec3& v : verts)
        mesh.vertices.push_back({v.x * radius_mm * scale.x, v.y * radius_mm * scale.y,
                                 v.z * radius_mm * scale.z});
    validate(mesh);
    compute_normals(mesh);
    return mesh;
}

inline std::uint32_t nearest_vertex(const TriMesh& mesh, const Vec3& p) {
    std::uint32_t best = 0;
    double best_d = (mesh.vertices[0] - p).norm2();
    for (std::uint32_t i = 1; i < mesh.vertex_count(); ++i) {
        const double d = (mesh.vertices[i] - p).norm2();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Conductivity assignment

/// Vertex region: Euclidean ball around a point, geodesic ball around a
/// vertex, or an explicit vertex set. Geodesic balls must be resolved to
/// vertex sets (resolve_region in the geodesic module) before use.
struct Region {
    enum class Kind { euclidean_ball, geodesic_ball, vertex_set } kind = Kind::euclidean_ball;
    Vec3 center{};
    std::uint32_t center_vertex = 0; // geodesic_ball
    double radius_mm = 0.0;
    std::vector<std::uint32_t> vertices; // vertex_set

    bool contains(const TriMesh& mesh, std::uint32_t v) const {
        switch (kind) {
        case Kind::euclidean_ball:
            return (mesh.vertices[v] - center).norm() <= radius_mm;
        case Kind::geodesic_ball:
            throw ParameterError("geodesic region must be resolved to a vertex set first");
        case Kind::vertex_set:
            for (std::uint32_t w : vertices)
                if (w == v) return true;
            return false;
        }
        return false;
    }
};

struct ConductivitySpec {
    enum class Kind { uniform, region_scaled, anisotropic } kind = Kind::uniform;
    // uniform
    double scalar = 1.0;
    // region_scaled
    SymTensor3 base = SymTensor3::identity();
    Region region;
    double factor = 1.0;
    // anisotropic
    double longitudinal = 3.0;
    double transverse = 0.3;
    Vec3 direction{1.0, 0.0, 0.0};

    static ConductivitySpec uniform(double s) {
        ConductivitySpec c;
        c.kind = Kind::uniform;
        c.scalar = s;
        return c;
    }
    static ConductivitySpec region_scaled(SymTensor3 base, Region region, double factor) {
        ConductivitySpec c;
        c.kind = Kind::region_scaled;
        c.base = base;
        c.region = std::move(region);
        c.factor = factor;
        return c;
    }
    static ConductivitySpec anisotropic(double longitudinal, double transverse, Vec3 direction) {
        ConductivitySpec c;
        c.kind = Kind::anisotropic;
        c.longitudinal = longitudinal;
        c.transverse = transverse;
        c.direction = direction;
        return c;
    }
};

inline TriMesh set_conductivity(TriMesh mesh, const ConductivitySpec& spec) {
    const std::size_t m = mesh.vertex_count();
    std::vector<SymTensor3> field(m);
    switch (spec.kind) {
    case ConductivitySpec::Kind::uniform:
        if (spec.scalar <= 0.0) throw ParameterError("uniform conductivity must be positive");
        for (auto& t : field) t = SymTensor3::isotropic(spec.scalar);
        break;
    case ConductivitySpec::Kind::region_scaled: {
        if (spec.factor <= 0.0)
            throw ParameterError("region conductivity factor must be positive (got " +
                                 std::to_string(spec.factor) + ")");
        if (!spec.base.is_spd()) throw ParameterError("base conductivity tensor is not SPD");
        for (std::uint32_t v = 0; v < m; ++v)
            field[v] = spec.region.contains(mesh, v) ? spec.base.scaled(spec.factor) : spec.base;
        break;
    }
    case ConductivitySpec::Kind::anisotropic:
        if (spec.transverse <= 0.0 || spec.longitudinal <= 0.0)
            throw ParameterError("anisotropic conductivity values must be positive");
        for (auto& t : field)
            t = SymTensor3::axis_aligned(spec.longitudinal, spec.transverse, spec.direction);
        break;
    }
    mesh.conductivity = std::move(field);
    validate(mesh);
    return mesh;
}

// ---------------------------------------------------------------------------
// Electrodes

struct ElectrodeSet {
    std::vector<Vec3> positions;

    std::size_t count() const { return positions.size(); }
};

inline void validate(const ElectrodeSet& electrodes, const TriMesh& mesh) {
    if (electrodes.count() < 1) throw ValidationError("electrode set is empty");
    for (std::size_t e = 0; e < electrodes.count(); ++e) {
        double dmin = std::numeric_limits<double>::infinity();
        for (const Vec3& v : mesh.vertices) dmin = std::min(dmin, (electrodes.positions[e] - v).norm());
        if (!(dmin > 0.0))
            throw ValidationError("electrode " + std::to_string(e) +
                                  " coincides with a mesh vertex");
    }
}

/// Deterministic electrode layout: Fibonacci sphere of the given radius.
inline ElectrodeSet make_electrode_sphere(std::size_t count, double radius_mm,
                                          Vec3 center = {}) {
    if (count < 1) throw ParameterError("electrode count must be >= 1");
    ElectrodeSet set;
    set.positions.reserve(count);
    const double ga = M_PI * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < count; ++i) {
        const double z = count == 1 ? 0.0 : 1.0 - 2.0 * static_cast<double>(i) / (count - 1);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double th = ga * static_cast<double>(i);
        set.positions.push_back(center + Vec3{r * std::cos(th), r * std::sin(th), z} * radius_mm);
    }
    return set;
}

} // namespace ecgi
