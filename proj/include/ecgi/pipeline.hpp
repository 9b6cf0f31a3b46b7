#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ecgi/config.hpp"
#include "ecgi/filter.hpp"
#include "ecgi/forward.hpp"
#include "ecgi/maps.hpp"
#include "ecgi/synth.hpp"
#include "ecgi/vtk.hpp"

namespace ecgi {

// Experiment orchestration: explicit file handoffs between the simulate,
// filter, maps and report stages so each one is independently runnable.

struct BuiltExperiment {
    TriMesh filter_mesh; // geometry only; per-mode conductivity lives in the tables
    TriMesh truth_mesh;
    ElectrodeSet electrodes;
    double width_mm = 5.0;
    GeodesicTable truth_table;
    TransferOperator truth_op;
    std::vector<GeodesicTable> mode_tables;
    std::vector<TransferOperator> mode_ops;
    std::vector<std::size_t> mode_op_index; // mode i uses mode_ops[mode_op_index[i]]
    std::vector<std::string> mode_labels;
    TruthSpec truth;
    std::vector<std::uint32_t> truth_to_filter; // filter vertex -> nearest truth vertex

    ModeSet modes() const {
        ModeSet set;
        set.reserve(mode_tables.size());
        for (std::size_t i = 0; i < mode_tables.size(); ++i)
            set.push_back({&mode_tables[i], &mode_ops[mode_op_index[i]], mode_labels[i]});
        return set;
    }

    /// Truth activation transferred to the filter mesh by nearest vertex.
    ActivationMap truth_map_on_filter_mesh(const ActivationMap& truth_map) const {
        ActivationMap out;
        out.time_ms.resize(truth_to_filter.size());
        out.activated.resize(truth_to_filter.size());
        for (std::size_t i = 0; i < truth_to_filter.size(); ++i) {
            out.time_ms[i] = truth_map.time_ms[truth_to_filter[i]];
            out.activated[i] = truth_map.activated[truth_to_filter[i]];
        }
        return out;
    }
};

namespace detail {

inline TriMesh build_base_mesh(const MeshSpec& spec, int subdivisions) {
    switch (spec.kind) {
    case MeshSpec::Kind::sphere:
        return make_test_mesh(TestMeshKind::sphere, spec.radius_mm, subdivisions);
    case MeshSpec::Kind::ellipsoid:
        return make_test_mesh(TestMeshKind::ellipsoid, spec.radius_mm, subdivisions,
                              spec.axis_scales);
    case MeshSpec::Kind::file:
        return load_mesh(spec.path);
    }
    throw ConfigError("bad mesh kind");
}

inline TriMesh apply_conductivity(TriMesh mesh, const ConductivityDesc& desc) {
    mesh = set_conductivity(std::move(mesh), desc.base);
    for (const BlockSpec& block : desc.blocks) {
        const Region region = resolve_region(mesh, block.region);
        std::vector<SymTensor3> field = *mesh.conductivity;
        for (std::uint32_t v = 0; v < mesh.vertex_count(); ++v)
            if (region.contains(mesh, v)) field[v] = field[v].scaled(block.factor);
        mesh.conductivity = std::move(field);
    }
    return mesh;
}

} // namespace detail

inline BuiltExperiment build_experiment(const ExperimentConfig& exp) {
    BuiltExperiment built;
    built.width_mm = exp.filter.width_mm;
    built.filter_mesh = detail::build_base_mesh(exp.mesh, exp.mesh.subdivisions);
    built.truth_mesh = exp.mesh.kind == MeshSpec::Kind::file
                           ? built.filter_mesh
                           : detail::build_base_mesh(exp.mesh, exp.truth_subdivisions);
    built.electrodes = make_electrode_sphere(exp.electrode_count, exp.electrode_radius_mm);
    validate(built.electrodes, built.truth_mesh);

    // Truth metric: base conductivity + blocks, baked in before the table.
    TriMesh truth_conductive = detail::apply_conductivity(built.truth_mesh, exp.truth_conductivity);
    built.truth_table = build_table(truth_conductive, exp.backend, "truth", exp.run.workers);
    built.truth_op = build_dipole_layer(built.truth_mesh, built.electrodes);

    // Stim sites resolved on the truth mesh.
    built.truth.speed_mm_per_ms = exp.speed_mm_per_ms;
    built.truth.duration_ms = exp.duration_ms;
    built.truth.dt_ms = exp.dt_ms;
    built.truth.backend = exp.backend;
    for (const StimSpec& stim : exp.stims) {
        StimSite site;
        site.vertex = stim.by_vertex ? stim.vertex : nearest_vertex(built.truth_mesh, stim.point);
        site.delay_ms = stim.delay_ms;
        built.truth.sites.push_back(site);
    }
    built.truth.validate(built.truth_mesh.vertex_count());

    // Filter-side metrics and operators, one per mode.
    const TransferOperator shared_op = build_dipole_layer(built.filter_mesh, built.electrodes);
    built.mode_ops.push_back(shared_op);
    for (const ModeSpec& mode : exp.modes) {
        TriMesh conductive = detail::apply_conductivity(built.filter_mesh, mode.conductivity);
        built.mode_tables.push_back(
            build_table(conductive, exp.backend, mode.label, exp.run.workers));
        built.mode_labels.push_back(mode.label);
        if (mode.operator_path.empty()) {
            built.mode_op_index.push_back(0);
        } else {
            built.mode_ops.push_back(load_operator(mode.operator_path, built.filter_mesh));
            built.mode_op_index.push_back(built.mode_ops.size() - 1);
        }
    }

    // Nearest truth vertex per filter vertex (identity for nested icospheres).
    built.truth_to_filter.resize(built.filter_mesh.vertex_count());
    for (std::uint32_t v = 0; v < built.filter_mesh.vertex_count(); ++v)
        built.truth_to_filter[v] = nearest_vertex(built.truth_mesh, built.filter_mesh.vertices[v]);

    return built;
}

// ---------------------------------------------------------------------------
// Trace files: a text summary (one line per step) plus a binary ensemble dump
// that the maps stage consumes.

inline constexpr std::uint32_t kTraceMagic = 0x54474345; // "ECGT"

inline void save_trace(const FilterTrace& trace, const std::string& text_path,
                       const std::string& ens_path, std::uint64_t config_hash_v,
                       std::uint64_t seed) {
    {
        std::ofstream out(text_path);
        if (!out) throw Error("cannot write trace file: " + text_path);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(config_hash_v));
        out << "# ecgi-trace config=" << buf << " seed=" << seed
            << " direction=" << to_string(trace.direction) << " steps=" << trace.steps.size()
            << " modes=" << trace.n_modes << " dt_ms=" << trace.dt_ms << "\n";
        for (const StepRecord& rec : trace.steps) {
            out << "step=" << rec.step << " direction=" << to_string(trace.direction)
                << " time_ms=" << rec.time_index * trace.dt_ms << " n_eff=" << rec.n_eff
                << " resampled=" << (rec.resampled ? 1 : 0)
                << " degenerate=" << (rec.degenerate ? 1 : 0) << " mode_probs=";
            for (std::size_t i = 0; i < rec.mode_probs.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%.17g", rec.mode_probs[i]);
                out << (i ? "," : "") << buf;
            }
            out << "\n";
        }
        if (!out) throw Error("short write on trace file: " + text_path);
    }
    {
        std::ofstream out(ens_path, std::ios::binary);
        if (!out) throw Error("cannot write ensemble file: " + ens_path);
        auto put = [&out](const void* p, std::size_t n) {
            out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        };
        const std::uint32_t n_steps = static_cast<std::uint32_t>(trace.steps.size());
        const std::uint32_t N =
            n_steps ? static_cast<std::uint32_t>(trace.steps[0].state.size()) : 0;
        const std::uint32_t l =
            N ? static_cast<std::uint32_t>(trace.steps[0].state.particles[0].centers.size()) : 0;
        const std::uint32_t header[8] = {kTraceMagic,
                                         1u,
                                         static_cast<std::uint32_t>(trace.direction),
                                         n_steps,
                                         N,
                                         l,
                                         static_cast<std::uint32_t>(trace.n_modes),
                                         0u};
        put(header, sizeof(header));
        put(&trace.dt_ms, sizeof(double));
        put(&config_hash_v, sizeof(std::uint64_t));
        put(&seed, sizeof(std::uint64_t));
        for (const StepRecord& rec : trace.steps) {
            const std::int32_t meta[2] = {rec.step, rec.time_index};
            put(meta, sizeof(meta));
            const std::uint8_t flags[2] = {rec.resampled ? std::uint8_t(1) : std::uint8_t(0),
                                           rec.degenerate ? std::uint8_t(1) : std::uint8_t(0)};
            put(flags, sizeof(flags));
            put(&rec.n_eff, sizeof(double));
            put(rec.mode_probs.data(), rec.mode_probs.size() * sizeof(double));
            put(rec.state.weights.data(), rec.state.weights.size() * sizeof(double));
            for (const Particle& p : rec.state.particles) {
                put(p.centers.data(), p.centers.size() * sizeof(std::uint32_t));
                put(p.radii.data(), p.radii.size() * sizeof(double));
                put(&p.mode, sizeof(std::uint32_t));
            }
        }
        if (!out) throw Error("short write on ensemble file: " + ens_path);
    }
}

inline FilterTrace load_trace(const std::string& ens_path) {
    std::ifstream in(ens_path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open ensemble file: " + ens_path);
    auto get = [&in, &ens_path](void* p, std::size_t n) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in) throw FormatError("truncated ensemble file: " + ens_path);
    };
    std::uint32_t header[8] = {};
    get(header, sizeof(header));
    if (header[0] != kTraceMagic || header[1] != 1u)
        throw FormatError("bad ensemble header: " + ens_path);
    FilterTrace trace;
    trace.direction = static_cast<Direction>(header[2]);
    const std::uint32_t n_steps = header[3];
    const std::uint32_t N = header[4];
    const std::uint32_t l = header[5];
    trace.n_modes = static_cast<int>(header[6]);
    std::uint64_t stored_hash = 0, stored_seed = 0;
    get(&trace.dt_ms, sizeof(double));
    get(&stored_hash, sizeof(std::uint64_t));
    get(&stored_seed, sizeof(std::uint64_t));
    trace.steps.resize(n_steps);
    for (StepRecord& rec : trace.steps) {
        std::int32_t meta[2];
        get(meta, sizeof(meta));
        rec.step = meta[0];
        rec.time_index = meta[1];
        std::uint8_t flags[2];
        get(flags, sizeof(flags));
        rec.resampled = flags[0] != 0;
        rec.degenerate = flags[1] != 0;
        get(&rec.n_eff, sizeof(double));
        rec.mode_probs.resize(trace.n_modes);
        get(rec.mode_probs.data(), rec.mode_probs.size() * sizeof(double));
        rec.state.weights.resize(N);
        get(rec.state.weights.data(), N * sizeof(double));
        rec.state.particles.resize(N);
        rec.state.time_index = rec.time_index;
        for (Particle& p : rec.state.particles) {
            p.centers.resize(l);
            get(p.centers.data(), l * sizeof(std::uint32_t));
            p.radii.resize(l);
            get(p.radii.data(), l * sizeof(double));
            get(&p.mode, sizeof(std::uint32_t));
        }
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Stage commands

namespace detail {

inline std::string hash_comment(const ExperimentConfig& exp) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "config=%016llx seed=%llu",
                  static_cast<unsigned long long>(exp.hash),
                  static_cast<unsigned long long>(exp.run.seed));
    return buf;
}

inline std::string trace_basename(Direction dir, int rep) {
    return std::string("trace_") + to_string(dir) + "_rep" + std::to_string(rep);
}

inline std::vector<Direction> run_directions(const ExperimentConfig& exp) {
    if (exp.run.direction == "fwd") return {Direction::forward};
    if (exp.run.direction == "bwd") return {Direction::backward};
    return {Direction::forward, Direction::backward};
}

} // namespace detail

/// Generate truth + observations; writes truth maps, the voltage series and
/// both noiseless and noisy observation files.
inline void cmd_simulate(const ExperimentConfig& exp, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const BuiltExperiment built = build_experiment(exp);
    const FrontTemplate tmpl(built.width_mm);
    const TruthResult truth =
        simulate_truth(built.truth_mesh, built.truth, built.truth_table, tmpl, built.truth_op);
    const std::string comment = detail::hash_comment(exp);

    write_activation_csv(truth.activation, out_dir + "/truth_activation.csv", comment);
    const ActivationMap truth_on_filter = built.truth_map_on_filter_mesh(truth.activation);
    write_activation_csv(truth_on_filter, out_dir + "/truth_activation_filter.csv", comment);

    {
        std::vector<double> times(truth.activation.size());
        for (std::size_t i = 0; i < times.size(); ++i)
            times[i] = truth.activation.activated[i] ? truth.activation.time_ms[i] : -1.0;
        write_vtk(built.truth_mesh, out_dir + "/truth_activation.vtk",
                  {{"activation_time_ms", &times}}, comment);
    }
    {
        // Voltage series: one row per step, one column per vertex.
        std::ofstream out(out_dir + "/truth_voltage.csv");
        if (!out) throw Error("cannot write truth voltage file");
        out << "# " << comment << "\n";
        char buf[32];
        for (const VoltageField& field : truth.voltage) {
            for (std::size_t j = 0; j < field.values.size(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.9g", field.values[j]);
                out << (j ? "," : "") << buf;
            }
            out << "\n";
        }
    }
    save_observations_csv(truth.observations, out_dir + "/observations_noiseless.csv", comment);
    const ObservationSeq noisy = add_noise(truth.observations, exp.run.noise_level, exp.run.seed);
    char snr[160];
    std::snprintf(snr, sizeof(snr), "%s noise_std=%.17g realized_snr_db=%.17g", comment.c_str(),
                  noisy.noise_std, noisy.realized_snr_db);
    save_observations_csv(noisy, out_dir + "/observations.csv", snr);

    // True stim sites on both meshes, for the report stage.
    {
        std::ofstream out(out_dir + "/truth_sites.csv");
        out << "# " << comment << "\n";
        out << "truth_vertex,filter_vertex,delay_ms\n";
        for (const StimSite& site : built.truth.sites) {
            const std::uint32_t fv =
                nearest_vertex(built.filter_mesh, built.truth_mesh.vertices[site.vertex]);
            out << site.vertex << ',' << fv << ',' << site.delay_ms << "\n";
        }
    }
}

/// Run R repetitions per requested direction; each run writes a text trace and
/// a binary ensemble dump. Repetition seeds are seed + repetition index.
inline void cmd_filter(const ExperimentConfig& exp, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const std::string obs_path = out_dir + "/observations.csv";
    if (!fs::exists(obs_path)) throw MissingInputError("missing observations file: " + obs_path);
    const ObservationSeq obs = load_observations_csv(obs_path);
    const BuiltExperiment built = build_experiment(exp);
    const ModeSet modes = built.modes();

    struct Run {
        Direction dir;
        int rep;
    };
    std::vector<Run> runs;
    for (Direction dir : detail::run_directions(exp))
        for (int rep = 0; rep < exp.run.reps; ++rep) runs.push_back({dir, rep});

    // Repetitions are independent; parallelize across them and keep each run
    // single-threaded when there are several.
    const unsigned outer = runs.size() > 1 ? exp.run.workers : 1;
    parallel_for(runs.size(), outer, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            FilterConfig fc = exp.filter;
            fc.direction = runs[i].dir;
            fc.seed = exp.run.seed + static_cast<std::uint64_t>(runs[i].rep);
            fc.workers = runs.size() > 1 ? 1 : exp.run.workers;
            const FilterTrace trace = run_filter(obs, modes, fc);
            const std::string base = out_dir + "/" + detail::trace_basename(runs[i].dir, runs[i].rep);
            save_trace(trace, base + ".txt", base + ".ens", exp.hash, fc.seed);
        }
    });
}

struct MapsSummary {
    double pearson_r_combined = 0.0;
    double coverage_combined = 0.0;
    std::vector<std::uint32_t> eas_argmax; // per map: combined, fwd, bwd
};

/// Estimator outputs: activation maps, activation-probability snapshots, EAS
/// maps, mode timelines and the correlation report.
inline MapsSummary cmd_maps(const ExperimentConfig& exp, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const BuiltExperiment built = build_experiment(exp);
    const ModeSet modes = built.modes();
    const FrontTemplate tmpl(built.width_mm);
    const std::string comment = detail::hash_comment(exp);
    const std::size_t m = built.filter_mesh.vertex_count();

    const std::string truth_path = out_dir + "/truth_activation_filter.csv";
    if (!fs::exists(truth_path)) throw MissingInputError("missing truth map: " + truth_path);
    const ActivationMap truth_map = read_activation_csv(truth_path);

    const auto directions = detail::run_directions(exp);

    // Accumulators over runs.
    std::vector<std::vector<double>> mean_series; // physical step -> per-vertex sum
    std::size_t mean_series_count = 0;
    std::map<std::string, ScalarMap> eas_by_dir;
    std::map<std::string, std::vector<std::vector<double>>> actprob_by_dir;
    std::vector<std::vector<double>> timeline_sum; // physical step -> per-mode sum
    std::size_t timeline_count = 0;
    std::ofstream correlation(out_dir + "/correlation_report.csv");
    correlation << "# " << comment << "\n";
    correlation << "direction,rep,pearson_r,coverage\n";

    std::vector<double> snapshot_fracs = {0.25, 0.5, 0.75};

    for (Direction dir : directions) {
        ScalarMap eas_sum;
        eas_sum.semantics = ScalarMap::Semantics::eas_pseudo_probability;
        eas_sum.values.assign(m, 0.0);
        std::vector<std::vector<double>> actprob_sum;
        for (int rep = 0; rep < exp.run.reps; ++rep) {
            const std::string base = out_dir + "/" + detail::trace_basename(dir, rep);
            if (!fs::exists(base + ".ens"))
                throw MissingInputError("missing trace file: " + base + ".ens");
            const FilterTrace trace = load_trace(base + ".ens");
            const std::size_t n = trace.steps.size();

            // Mean-voltage series on the physical time axis.
            const auto series = detail::mean_series_physical(trace, modes, tmpl, exp.run.workers);
            if (mean_series.empty()) mean_series.assign(n, std::vector<double>(m, 0.0));
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t j = 0; j < m; ++j) mean_series[k][j] += series[k][j];
            ++mean_series_count;

            // Per-run activation map and correlation against truth.
            const ActivationMap rec_map = detail::extract_crossings(series, trace.dt_ms);
            try {
                const CorrelationResult corr = pearson_correlation(rec_map, truth_map);
                correlation << to_string(dir) << ',' << rep << ',' << corr.r << ','
                            << corr.coverage << "\n";
            } catch (const ValidationError&) {
                correlation << to_string(dir) << ',' << rep << ",nan,0\n";
            }

            // EAS pseudo-probability (sum over reps, averaged later).
            const ScalarMap eas = eas_pseudo_probability(trace, m);
            for (std::size_t j = 0; j < m; ++j) eas_sum.values[j] += eas.values[j];

            // Activation-probability snapshots.
            if (actprob_sum.empty())
                actprob_sum.assign(snapshot_fracs.size(), std::vector<double>(m, 0.0));
            for (std::size_t s = 0; s < snapshot_fracs.size(); ++s) {
                const std::size_t phys =
                    std::min(n - 1, static_cast<std::size_t>(snapshot_fracs[s] * (n - 1)));
                for (const StepRecord& rec : trace.steps) {
                    if (static_cast<std::size_t>(rec.time_index) != phys) continue;
                    const ScalarMap ap = activation_probability(rec.state, modes, tmpl);
                    for (std::size_t j = 0; j < m; ++j) actprob_sum[s][j] += ap.values[j];
                }
            }

            // Mode-probability timeline on the physical axis.
            if (timeline_sum.empty())
                timeline_sum.assign(n, std::vector<double>(modes.size(), 0.0));
            for (const StepRecord& rec : trace.steps)
                for (std::size_t d = 0; d < rec.mode_probs.size(); ++d)
                    timeline_sum[rec.time_index][d] += rec.mode_probs[d];
            ++timeline_count;
        }
        const double inv = 1.0 / exp.run.reps;
        for (double& v : eas_sum.values) v *= inv;
        eas_by_dir[to_string(dir)] = eas_sum;
        for (auto& snap : actprob_sum)
            for (double& v : snap) v *= inv;
        actprob_by_dir[to_string(dir)] = actprob_sum;
    }

    // Combined activation map: average of mean-voltage series across runs.
    MapsSummary summary;
    {
        const double inv = 1.0 / static_cast<double>(mean_series_count);
        for (auto& row : mean_series)
            for (double& v : row) v *= inv;
        const ActivationMap combined = detail::extract_crossings(mean_series, exp.dt_ms);
        write_activation_csv(combined, out_dir + "/activation_map_combined.csv", comment);
        {
            std::vector<double> vals(m);
            for (std::size_t i = 0; i < m; ++i)
                vals[i] = combined.activated[i] ? combined.time_ms[i] : -1.0;
            write_vtk(built.filter_mesh, out_dir + "/activation_map_combined.vtk",
                      {{"activation_time_ms", &vals}}, comment);
        }
        try {
            const CorrelationResult corr = pearson_correlation(combined, truth_map);
            summary.pearson_r_combined = corr.r;
            summary.coverage_combined = corr.coverage;
            correlation << "combined,-," << corr.r << ',' << corr.coverage << "\n";
        } catch (const ValidationError&) {
            summary.pearson_r_combined = std::numeric_limits<double>::quiet_NaN();
            correlation << "combined,-,nan,0\n";
        }
    }

    // EAS maps per direction and combined.
    {
        ScalarMap combined;
        bool have_combined = false;
        for (const auto& [dir, map] : eas_by_dir) {
            write_scalar_csv(map.values, out_dir + "/eas_" + dir + ".csv", comment);
            if (!have_combined) {
                combined = map;
                have_combined = true;
            } else {
                combined = combine_fwd_bwd(combined, map);
            }
        }
        write_scalar_csv(combined.values, out_dir + "/eas_combined.csv", comment);
        write_vtk(built.filter_mesh, out_dir + "/eas_combined.vtk",
                  {{"eas_pseudo_probability", &combined.values}}, comment);
        const auto argmax = [](const ScalarMap& map) {
            return static_cast<std::uint32_t>(
                std::max_element(map.values.begin(), map.values.end()) - map.values.begin());
        };
        summary.eas_argmax.push_back(argmax(combined));
        for (const auto& [dir, map] : eas_by_dir) summary.eas_argmax.push_back(argmax(map));
    }

    // Activation-probability snapshots.
    for (const auto& [dir, snaps] : actprob_by_dir) {
        for (std::size_t s = 0; s < snaps.size(); ++s) {
            const std::size_t n = mean_series.size();
            const std::size_t phys =
                std::min(n - 1, static_cast<std::size_t>(snapshot_fracs[s] * (n - 1)));
            const double t_ms = static_cast<double>(phys) * exp.dt_ms;
            write_scalar_csv(snaps[s],
                             out_dir + "/activation_probability_" + dir + "_t" +
                                 std::to_string(static_cast<int>(t_ms)) + ".csv",
                             comment);
        }
    }

    // Mode timeline (averaged across runs), one column per mode.
    {
        std::ofstream out(out_dir + "/mode_timeline.csv");
        out << "# " << comment << "\n";
        out << "time";
        for (const std::string& label : built.mode_labels) out << ',' << label;
        out << "\n";
        char buf[32];
        for (std::size_t k = 0; k < timeline_sum.size(); ++k) {
            out << static_cast<double>(k) * exp.dt_ms;
            for (double v : timeline_sum[k]) {
                std::snprintf(buf, sizeof(buf), "%.17g", v / static_cast<double>(timeline_count));
                out << ',' << buf;
            }
            out << "\n";
        }
    }
    return summary;
}

/// One-page numeric summary for the experiment.
inline void cmd_report(const ExperimentConfig& exp, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const std::string corr_path = out_dir + "/correlation_report.csv";
    if (!fs::exists(corr_path)) throw MissingInputError("missing correlation report: " + corr_path);
    const std::string eas_path = out_dir + "/eas_combined.csv";
    if (!fs::exists(eas_path)) throw MissingInputError("missing EAS map: " + eas_path);
    const std::string sites_path = out_dir + "/truth_sites.csv";
    if (!fs::exists(sites_path)) throw MissingInputError("missing truth sites: " + sites_path);

    // Combined-run Pearson r from the correlation report.
    double pearson_r = std::numeric_limits<double>::quiet_NaN();
    {
        std::ifstream in(corr_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.rfind("combined,", 0) == 0) {
                const auto c1 = line.find(',');
                const auto c2 = line.find(',', c1 + 1);
                const auto c3 = line.find(',', c2 + 1);
                pearson_r = std::stod(line.substr(c2 + 1, c3 - c2 - 1));
            }
        }
    }

    // EAS localization error: geodesic distance from the combined argmax to
    // the nearest true site, in the homogeneous filter metric.
    const BuiltExperiment built = build_experiment(exp);
    const auto eas = read_scalar_csv(eas_path);
    const std::uint32_t peak = static_cast<std::uint32_t>(
        std::max_element(eas.begin(), eas.end()) - eas.begin());
    double eas_error_mm = std::numeric_limits<double>::infinity();
    {
        std::ifstream in(sites_path);
        std::string line;
        bool header_seen = false;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            if (!header_seen) {
                header_seen = true;
                continue;
            }
            const auto c1 = line.find(',');
            const auto c2 = line.find(',', c1 + 1);
            const std::uint32_t fv =
                static_cast<std::uint32_t>(std::stoul(line.substr(c1 + 1, c2 - c1 - 1)));
            eas_error_mm =
                std::min(eas_error_mm, static_cast<double>(built.mode_tables[0].at(peak, fv)));
        }
    }

    // Time-averaged mode probabilities.
    std::vector<double> mode_prob_mean;
    std::vector<std::string> mode_names;
    {
        const std::string timeline_path = out_dir + "/mode_timeline.csv";
        if (!fs::exists(timeline_path))
            throw MissingInputError("missing mode timeline: " + timeline_path);
        std::ifstream in(timeline_path);
        std::string line;
        std::size_t rows = 0;
        bool header_seen = false;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            std::string tok;
            std::size_t col = 0;
            while (std::getline(ls, tok, ',')) {
                if (!header_seen) {
                    if (col > 0) mode_names.push_back(tok);
                } else if (col > 0) {
                    if (mode_prob_mean.size() < col) mode_prob_mean.resize(col, 0.0);
                    mode_prob_mean[col - 1] += std::stod(tok);
                }
                ++col;
            }
            if (header_seen) ++rows;
            header_seen = true;
        }
        for (double& v : mode_prob_mean) v /= static_cast<double>(rows);
    }

    std::ofstream out(out_dir + "/summary.txt");
    out << "# " << detail::hash_comment(exp) << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", pearson_r);
    out << "pearson_r=" << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.3f", eas_error_mm);
    out << "eas_error_mm=" << buf << "\n";
    out << "mode_prob_mean=";
    for (std::size_t i = 0; i < mode_prob_mean.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s=%.6f", mode_names[i].c_str(), mode_prob_mean[i]);
        out << (i ? "," : "") << buf;
    }
    out << "\n";
}

} // namespace ecgi
