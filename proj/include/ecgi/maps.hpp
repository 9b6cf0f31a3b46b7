#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ecgi/error.hpp"
#include "ecgi/filter.hpp"
#include "ecgi/front.hpp"
#include "ecgi/parallel.hpp"

namespace ecgi {

/// Per-vertex activation time in ms; vertices the front never reached carry
/// the unactivated flag instead of a time.
struct ActivationMap {
    std::vector<double> time_ms;
    std::vector<std::uint8_t> activated;

    std::size_t size() const { return time_ms.size(); }
};

struct ScalarMap {
    enum class Semantics { activation_probability, eas_pseudo_probability };
    Semantics semantics = Semantics::activation_probability;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

/// Posterior mean transmembrane voltage: sum_i w_i v_{particle i}(x).
inline VoltageField mean_tmv(const Ensemble& ensemble, const ModeSet& modes,
                             const FrontTemplate& tmpl) {
    const std::uint32_t m = modes[0].table->m;
    VoltageField out;
    out.values.assign(m, 0.0);
    out.time_index = ensemble.time_index;
    std::vector<double> field(m);
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        const double w = ensemble.weights[i];
        if (w == 0.0) continue;
        const Particle& p = ensemble.particles[i];
        reconstruct_tmv_into(p.centers, p.radii, *modes[p.mode].table, tmpl, field);
        for (std::uint32_t j = 0; j < m; ++j) out.values[j] += w * field[j];
    }
    return out;
}

/// P(v(x, t_k) > threshold | data): sum of the weights of the particles whose
/// reconstructed voltage at x exceeds the threshold.
inline ScalarMap activation_probability(const Ensemble& ensemble, const ModeSet& modes,
                                        const FrontTemplate& tmpl, double threshold = 0.5) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ParameterError("activation_probability: threshold must be in (0, 1)");
    const std::uint32_t m = modes[0].table->m;
    ScalarMap map;
    map.semantics = ScalarMap::Semantics::activation_probability;
    map.values.assign(m, 0.0);
    std::vector<double> field(m);
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        const double w = ensemble.weights[i];
        if (w == 0.0) continue;
        const Particle& p = ensemble.particles[i];
        reconstruct_tmv_into(p.centers, p.radii, *modes[p.mode].table, tmpl, field);
        for (std::uint32_t j = 0; j < m; ++j)
            if (field[j] > threshold) map.values[j] += w;
    }
    return map;
}

namespace detail {

/// Mean-voltage series re-indexed to physical time (reverses backward traces).
inline std::vector<std::vector<double>> mean_series_physical(const FilterTrace& trace,
                                                             const ModeSet& modes,
                                                             const FrontTemplate& tmpl,
                                                             unsigned workers = 0) {
    const std::size_t n = trace.steps.size();
    std::vector<std::vector<double>> series(n);
    parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const StepRecord& rec = trace.steps[k];
            series[rec.time_index] = mean_tmv(rec.state, modes, tmpl).values;
        }
    });
    return series;
}

/// First upward crossing of `threshold`, linearly interpolated between steps.
inline ActivationMap extract_crossings(const std::vector<std::vector<double>>& series, double dt_ms,
                                       double threshold = 0.5) {
    const std::size_t n = series.size();
    const std::size_t m = series.empty() ? 0 : series[0].size();
    ActivationMap map;
    map.time_ms.assign(m, std::numeric_limits<double>::quiet_NaN());
    map.activated.assign(m, 0);
    for (std::size_t j = 0; j < m; ++j) {
        if (series[0][j] >= threshold) {
            map.time_ms[j] = 0.0;
            map.activated[j] = 1;
            continue;
        }
        for (std::size_t k = 1; k < n; ++k) {
            const double a = series[k - 1][j];
            const double b = series[k][j];
            if (a < threshold && b >= threshold) {
                const double frac = (threshold - a) / (b - a);
                map.time_ms[j] = (static_cast<double>(k - 1) + frac) * dt_ms;
                map.activated[j] = 1;
                break;
            }
        }
    }
    return map;
}

} // namespace detail

/// Activation map from a single trace: time at which the posterior mean
/// voltage first crosses 0.5 upward.
inline ActivationMap activation_map(const FilterTrace& trace, const ModeSet& modes,
                                    const FrontTemplate& tmpl, double dt_ms,
                                    unsigned workers = 0) {
    const auto series = detail::mean_series_physical(trace, modes, tmpl, workers);
    return detail::extract_crossings(series, dt_ms);
}

/// Activation map from several traces (e.g. forward + backward repetitions):
/// the per-step mean fields are averaged across traces before extraction.
inline ActivationMap activation_map_combined(std::span<const FilterTrace> traces,
                                             const ModeSet& modes, const FrontTemplate& tmpl,
                                             double dt_ms, unsigned workers = 0) {
    if (traces.empty()) throw ParameterError("activation_map_combined: no traces");
    std::vector<std::vector<double>> mean;
    for (const FilterTrace& trace : traces) {
        const auto series = detail::mean_series_physical(trace, modes, tmpl, workers);
        if (mean.empty()) {
            mean = series;
        } else {
            if (series.size() != mean.size())
                throw DimensionError("activation_map_combined: traces have different lengths");
            for (std::size_t k = 0; k < series.size(); ++k)
                for (std::size_t j = 0; j < series[k].size(); ++j) mean[k][j] += series[k][j];
        }
    }
    const double inv = 1.0 / static_cast<double>(traces.size());
    for (auto& row : mean)
        for (double& v : row) v *= inv;
    return detail::extract_crossings(mean, dt_ms);
}

/// Earliest-activation-site pseudo-probability: for each vertex, the total
/// weight of center occupancy accumulated over all steps. Ranges in
/// [0, l * n_steps]; not normalized (see the estimator's definition).
inline ScalarMap eas_pseudo_probability(const FilterTrace& trace) {
    if (trace.steps.empty()) throw ParameterError("eas_pseudo_probability: empty trace");
    std::size_t m = 0;
    for (const auto& p : trace.steps[0].state.particles)
        for (std::uint32_t c : p.centers) m = std::max<std::size_t>(m, c + 1);
    // Vertex count is not stored in the trace; callers that know it should
    // prefer the explicit overload.
    ScalarMap map;
    map.semantics = ScalarMap::Semantics::eas_pseudo_probability;
    map.values.assign(m, 0.0);
    for (const StepRecord& rec : trace.steps)
        for (std::size_t i = 0; i < rec.state.size(); ++i)
            for (std::uint32_t c : rec.state.particles[i].centers)
                map.values[c] += rec.state.weights[i];
    return map;
}

inline ScalarMap eas_pseudo_probability(const FilterTrace& trace, std::size_t vertex_count) {
    ScalarMap map = eas_pseudo_probability(trace);
    if (map.values.size() > vertex_count)
        throw DimensionError("eas_pseudo_probability: center index beyond vertex count");
    map.values.resize(vertex_count, 0.0);
    return map;
}

/// Per-vertex average of forward- and backward-method maps.
inline ScalarMap combine_fwd_bwd(const ScalarMap& map_f, const ScalarMap& map_b) {
    if (map_f.size() != map_b.size())
        throw DimensionError("combine_fwd_bwd: maps are on different meshes (" +
                             std::to_string(map_f.size()) + " vs " + std::to_string(map_b.size()) +
                             " vertices)");
    if (map_f.semantics != map_b.semantics)
        throw ParameterError("combine_fwd_bwd: semantics tags differ");
    ScalarMap out;
    out.semantics = map_f.semantics;
    out.values.resize(map_f.size());
    for (std::size_t j = 0; j < map_f.size(); ++j)
        out.values[j] = 0.5 * (map_f.values[j] + map_b.values[j]);
    return out;
}

struct CorrelationResult {
    double r = 0.0;
    double coverage = 0.0;  // fraction of vertices activated in both maps
    std::size_t common = 0; // number of vertices compared
};

/// Pearson correlation of activation times over the jointly activated support.
inline CorrelationResult pearson_correlation(const ActivationMap& map_a,
                                             const ActivationMap& map_b) {
    if (map_a.size() != map_b.size())
        throw DimensionError("pearson_correlation: maps are on different meshes");
    std::vector<double> a, b;
    for (std::size_t j = 0; j < map_a.size(); ++j) {
        if (map_a.activated[j] && map_b.activated[j]) {
            a.push_back(map_a.time_ms[j]);
            b.push_back(map_b.time_ms[j]);
        }
    }
    CorrelationResult res;
    res.common = a.size();
    res.coverage = static_cast<double>(a.size()) / static_cast<double>(map_a.size());
    if (a.size() < 2)
        throw ValidationError("pearson_correlation: common activated support has fewer than 2 "
                              "vertices");
    const double n = static_cast<double>(a.size());
    const double ma = pairwise_sum(a) / n;
    const double mb = pairwise_sum(b) / n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw ValidationError("pearson_correlation: zero variance on the common support");
    res.r = sab / std::sqrt(saa * sbb);
    return res;
}

/// Vertices whose value is >= all edge-graph neighbors and above
/// floor_fraction * max(map). Used to enumerate candidate activation sites.
inline std::vector<std::uint32_t> local_maxima(const ScalarMap& map, const TriMesh& mesh,
                                               double floor_fraction = 0.05) {
    if (map.size() != mesh.vertex_count())
        throw DimensionError("local_maxima: map size does not match mesh");
    const auto adj = detail::vertex_adjacency(mesh);
    double mx = 0.0;
    for (double v : map.values) mx = std::max(mx, v);
    std::vector<std::uint32_t> out;
    for (std::uint32_t v = 0; v < map.size(); ++v) {
        if (map.values[v] <= floor_fraction * mx) continue;
        bool is_max = true;
        for (std::uint32_t w : adj[v]) {
            if (map.values[w] > map.values[v]) {
                is_max = false;
                break;
            }
        }
        if (is_max) out.push_back(v);
    }
    return out;
}

} // namespace ecgi
