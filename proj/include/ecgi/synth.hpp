#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ecgi/error.hpp"
#include "ecgi/forward.hpp"
#include "ecgi/front.hpp"
#include "ecgi/geodesic.hpp"
#include "ecgi/maps.hpp"
#include "ecgi/rng.hpp"

namespace ecgi {

// Ground truth by geodesic front propagation: each stimulation site launches a
// ball growing at constant speed in the true metric; the earliest arrival over
// all sites is the activation time, and the voltage follows the front template.

struct StimSite {
    std::uint32_t vertex = 0;
    double delay_ms = 0.0;
};

struct BlockSpec {
    Region region;
    double factor = 1.0; // conductivity multiplier inside the region
    std::string label;
};

struct TruthSpec {
    std::vector<StimSite> sites;
    double speed_mm_per_ms = 1.0;
    double duration_ms = 120.0;
    double dt_ms = 1.0;
    std::vector<BlockSpec> blocks; // baked into the true metric before table construction
    DistanceBackend backend = DistanceBackend::dijkstra;

    void validate(std::size_t vertex_count) const {
        if (sites.empty()) throw ConfigError("truth: at least one stimulation site is required");
        for (const auto& s : sites) {
            if (s.vertex >= vertex_count)
                throw ParameterError("truth: stimulation vertex " + std::to_string(s.vertex) +
                                     " out of range");
            if (s.delay_ms < 0.0) throw ConfigError("truth: stimulation delay must be >= 0");
        }
        if (!(speed_mm_per_ms > 0.0)) throw ConfigError("truth: conduction speed must be > 0");
        if (!(dt_ms > 0.0)) throw ConfigError("truth: dt must be > 0");
        if (!(duration_ms >= 0.0)) throw ConfigError("truth: duration must be >= 0");
        for (const auto& b : blocks)
            if (!(b.factor > 0.0)) throw ConfigError("truth: block factor must be > 0");
    }
};

struct TruthResult {
    ActivationMap activation;
    std::vector<VoltageField> voltage; // one per step
    ObservationSeq observations;       // noiseless, zero-mean per step
};

/// t(x) = min_i (delay_i + d(x, s_i) / speed); voltage v(x, t) =
/// V(speed * (t - t(x))); observations Y_k = zero_mean(O v(., t_k)).
/// The table must already reflect the true conductivity (blocks included).
inline TruthResult simulate_truth(const TriMesh& mesh, const TruthSpec& spec,
                                  const GeodesicTable& table, const FrontTemplate& tmpl,
                                  const TransferOperator& op) {
    spec.validate(mesh.vertex_count());
    if (table.m != mesh.vertex_count())
        throw DimensionError("simulate_truth: table does not match mesh");
    const std::size_t m = mesh.vertex_count();

    TruthResult result;
    result.activation.time_ms.assign(m, std::numeric_limits<double>::infinity());
    result.activation.activated.assign(m, 1);
    for (const StimSite& site : spec.sites) {
        const auto row = table.row(site.vertex);
        for (std::size_t j = 0; j < m; ++j) {
            const double t = site.delay_ms + static_cast<double>(row[j]) / spec.speed_mm_per_ms;
            if (t < result.activation.time_ms[j]) result.activation.time_ms[j] = t;
        }
    }

    const std::size_t n = static_cast<std::size_t>(std::floor(spec.duration_ms / spec.dt_ms)) + 1;
    result.voltage.resize(n);
    result.observations.n = n;
    result.observations.q = op.q;
    result.observations.dt_ms = spec.dt_ms;
    result.observations.data.assign(n * op.q, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * spec.dt_ms;
        VoltageField& field = result.voltage[k];
        field.time_index = static_cast<int>(k);
        field.values.resize(m);
        for (std::size_t j = 0; j < m; ++j)
            field.values[j] = tmpl.value(spec.speed_mm_per_ms * (t - result.activation.time_ms[j]));
        auto pots = apply(op, field);
        zero_mean_inplace(pots);
        std::copy(pots.begin(), pots.end(), result.observations.step(k).begin());
    }
    return result;
}

/// White Gaussian noise with std = level * mean |Y| over all entries.
/// Records the noise std and the realized signal-to-noise ratio.
inline ObservationSeq add_noise(ObservationSeq obs, double level, std::uint64_t seed) {
    if (!(level > 0.0)) throw ParameterError("add_noise: noise level must be > 0");
    double mean_abs = 0.0;
    for (double y : obs.data) mean_abs += std::abs(y);
    mean_abs /= static_cast<double>(obs.data.size());
    const double std_dev = level * mean_abs;
    obs.noise_std = std_dev;
    if (std_dev == 0.0) {
        obs.zero_signal_warning = true;
        obs.realized_snr_db = std::numeric_limits<double>::infinity();
        return obs;
    }
    RngStream rng = RngStream::derive(seed, rng_phase::noise);
    double signal_power = 0.0;
    double noise_power = 0.0;
    for (double& y : obs.data) {
        const double eta = std_dev * rng.normal();
        signal_power += y * y;
        noise_power += eta * eta;
        y += eta;
    }
    obs.realized_snr_db = 10.0 * std::log10(signal_power / noise_power);
    return obs;
}

/// One geodesic table per block hypothesis, preceded by the homogeneous one.
/// Each block scales the mesh conductivity inside its region by its factor,
/// on top of the mesh's current (base) conductivity.
inline std::vector<GeodesicTable> make_block_metrics(const TriMesh& mesh,
                                                     const std::vector<BlockSpec>& blocks,
                                                     DistanceBackend backend,
                                                     unsigned workers = 0) {
    std::vector<GeodesicTable> tables;
    tables.reserve(blocks.size() + 1);
    tables.push_back(build_table(mesh, backend, "homogeneous", workers));
    for (const BlockSpec& block : blocks) {
        if (!(block.factor > 0.0)) throw ParameterError("make_block_metrics: factor must be > 0");
        TriMesh blocked = mesh;
        std::vector<SymTensor3> field(mesh.vertex_count());
        for (std::uint32_t v = 0; v < mesh.vertex_count(); ++v) {
            field[v] = block.region.contains(mesh, v) ? mesh.conductivity_at(v).scaled(block.factor)
                                                      : mesh.conductivity_at(v);
        }
        blocked.conductivity = std::move(field);
        tables.push_back(build_table(blocked, backend,
                                     block.label.empty() ? "block" : block.label, workers));
    }
    return tables;
}

// ---------------------------------------------------------------------------
// CSV I/O for observation sequences: header row (time_ms, e0..e{q-1}).

inline void save_observations_csv(const ObservationSeq& obs, const std::string& path,
                                  const std::string& comment = "") {
    std::ofstream out(path);
    if (!out) throw Error("cannot write observations file: " + path);
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "time_ms";
    for (std::size_t e = 0; e < obs.q; ++e) out << ",e" << e;
    out << "\n";
    char buf[32];
    for (std::size_t k = 0; k < obs.n; ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(k) * obs.dt_ms);
        out << buf;
        const auto row = obs.step(k);
        for (std::size_t e = 0; e < obs.q; ++e) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[e]);
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) throw Error("short write on observations file: " + path);
}

inline ObservationSeq load_observations_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open observations file: " + path);
    ObservationSeq obs;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::vector<double> times;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true; // "time_ms,e0,..."
            std::size_t q = 0;
            for (char c : line)
                if (c == ',') ++q;
            obs.q = q;
            continue;
        }
        std::istringstream ls(line);
        std::string tok;
        std::vector<double> row;
        while (std::getline(ls, tok, ',')) {
            try {
                row.push_back(std::stod(tok));
            } catch (...) {
                throw FormatError(path + ":" + std::to_string(line_no) + ": bad number '" + tok +
                                  "'");
            }
        }
        if (row.size() != obs.q + 1)
            throw FormatError(path + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(obs.q + 1) + " columns, got " +
                              std::to_string(row.size()));
        times.push_back(row[0]);
        obs.data.insert(obs.data.end(), row.begin() + 1, row.end());
    }
    obs.n = times.size();
    if (obs.n == 0) throw FormatError("observations file has no data rows: " + path);
    obs.dt_ms = obs.n > 1 ? times[1] - times[0] : 1.0;
    return obs;
}

} // namespace ecgi
