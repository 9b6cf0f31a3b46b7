#pragma once

// Shared fixtures for the test suites: tiny meshes, electrode layouts and
// mode sets built around them.

#include <string>
#include <vector>

#include "ecgi/filter.hpp"
#include "ecgi/forward.hpp"
#include "ecgi/geodesic.hpp"
#include "ecgi/mesh.hpp"

namespace ecgi::testing {

inline TriMesh tetrahedron() {
    TriMesh mesh;
    mesh.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    mesh.triangles = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
    compute_normals(mesh);
    return mesh;
}

inline std::string tetrahedron_off_text() {
    return "OFF\n"
           "4 4 0\n"
           "1 1 1\n"
           "1 -1 -1\n"
           "-1 1 -1\n"
           "-1 -1 1\n"
           "3 0 2 1\n"
           "3 0 1 3\n"
           "3 0 3 2\n"
           "3 1 2 3\n";
}

/// Everything the filter needs on one small mesh: a table per conductivity
/// spec and a shared dipole operator.
struct SmallProblem {
    TriMesh mesh;
    ElectrodeSet electrodes;
    std::vector<GeodesicTable> tables;
    std::vector<TransferOperator> ops;
    ModeSet modes;

    SmallProblem(TriMesh base, std::size_t n_electrodes, double electrode_radius,
                 const std::vector<ConductivitySpec>& specs = {ConductivitySpec::uniform(1.0)})
        : mesh(std::move(base)) {
        electrodes = make_electrode_sphere(n_electrodes, electrode_radius);
        ops.push_back(build_dipole_layer(mesh, electrodes));
        for (std::size_t i = 0; i < specs.size(); ++i) {
            TriMesh conductive = set_conductivity(mesh, specs[i]);
            tables.push_back(
                build_table(conductive, DistanceBackend::dijkstra, "mode" + std::to_string(i)));
        }
        for (std::size_t i = 0; i < tables.size(); ++i)
            modes.push_back({&tables[i], &ops[0], "mode" + std::to_string(i)});
    }
};

inline SmallProblem icosahedron_problem(std::size_t n_electrodes = 8,
                                        std::size_t n_modes = 1) {
    std::vector<ConductivitySpec> specs;
    specs.push_back(ConductivitySpec::uniform(1.0));
    if (n_modes > 1) {
        // Second metric: a slow patch around vertex 0.
        Region region;
        region.kind = Region::Kind::vertex_set;
        region.vertices = {0, 1, 5};
        specs.push_back(ConductivitySpec::region_scaled(SymTensor3::identity(), region, 0.25));
    }
    return SmallProblem(make_test_mesh(TestMeshKind::sphere, 30.0, 0), n_electrodes, 90.0, specs);
}

} // namespace ecgi::testing
