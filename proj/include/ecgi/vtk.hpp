#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ecgi/error.hpp"
#include "ecgi/maps.hpp"
#include "ecgi/mesh.hpp"

namespace ecgi {

/// Legacy ASCII VTK PolyData with any number of named per-vertex scalar fields.
struct VtkScalarField {
    std::string name;
    const std::vector<double>* values = nullptr;
};

inline void write_vtk(const TriMesh& mesh, const std::string& path,
                      const std::vector<VtkScalarField>& fields = {},
                      const std::string& title = "ecgi surface") {
    std::ofstream out(path);
    if (!out) throw Error("cannot write VTK file: " + path);
    char buf[64];
    out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET POLYDATA\n";
    out << "POINTS " << mesh.vertex_count() << " double\n";
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", v.x, v.y, v.z);
        out << buf;
    }
    out << "POLYGONS " << mesh.triangle_count() << ' ' << mesh.triangle_count() * 4 << "\n";
    for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << "\n";
    if (!fields.empty()) {
        out << "POINT_DATA " << mesh.vertex_count() << "\n";
        for (const auto& f : fields) {
            if (f.values->size() != mesh.vertex_count())
                throw DimensionError("write_vtk: field '" + f.name + "' has " +
                                     std::to_string(f.values->size()) + " values, mesh has " +
                                     std::to_string(mesh.vertex_count()) + " vertices");
            out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : *f.values) {
                std::snprintf(buf, sizeof(buf), "%.9g\n", v);
                out << buf;
            }
        }
    }
    if (!out) throw Error("short write on VTK file: " + path);
}

/// CSV with one (vertex_id, value) row per vertex.
inline void write_scalar_csv(const std::vector<double>& values, const std::string& path,
                             const std::string& comment = "") {
    std::ofstream out(path);
    if (!out) throw Error("cannot write CSV file: " + path);
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "vertex_id,value\n";
    char buf[32];
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
        out << i << ',' << buf << "\n";
    }
    if (!out) throw Error("short write on CSV file: " + path);
}

inline std::vector<double> read_scalar_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open CSV file: " + path);
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw FormatError(path + ":" + std::to_string(line_no) + ": expected 'vertex_id,value'");
        try {
            values.push_back(std::stod(line.substr(comma + 1)));
        } catch (...) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": bad value");
        }
    }
    return values;
}

/// Activation maps serialize unactivated vertices as value -1.
inline void write_activation_csv(const ActivationMap& map, const std::string& path,
                                 const std::string& comment = "") {
    std::vector<double> values(map.size());
    for (std::size_t i = 0; i < map.size(); ++i)
        values[i] = map.activated[i] ? map.time_ms[i] : -1.0;
    write_scalar_csv(values, path, comment);
}

inline ActivationMap read_activation_csv(const std::string& path) {
    const auto values = read_scalar_csv(path);
    ActivationMap map;
    map.time_ms.resize(values.size());
    map.activated.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        map.activated[i] = values[i] >= 0.0 ? 1 : 0;
        map.time_ms[i] = map.activated[i] ? values[i] : std::numeric_limits<double>::quiet_NaN();
    }
    return map;
}

} // namespace ecgi
