#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ecgi/error.hpp"
#include "ecgi/forward.hpp"
#include "ecgi/front.hpp"
#include "ecgi/geodesic.hpp"
#include "ecgi/parallel.hpp"
#include "ecgi/rng.hpp"

namespace ecgi {

// Sequential importance resampling over a low-dimensional wavefront state:
// each particle is l activation centers (mesh vertices), l ball radii, and a
// discrete mode selecting one (geodesic metric, transfer operator) pair.

struct Particle {
    std::vector<std::uint32_t> centers;
    std::vector<double> radii;
    std::uint32_t mode = 0;

    bool operator==(const Particle&) const = default;
};

struct Ensemble {
    std::vector<Particle> particles;
    std::vector<double> weights;
    int time_index = 0;

    std::size_t size() const { return particles.size(); }
};

enum class Direction { forward, backward };

inline const char* to_string(Direction d) { return d == Direction::forward ? "fwd" : "bwd"; }

struct FilterConfig {
    int N = 1000;                       // particles
    int l = 3;                          // centers per particle
    double sigma_r = 10.0;              // mm, radius random-walk std
    double lambda_mm = 5.0;             // mm, mean of the exponential jump bound
    double sigma_w = 0.02;              // observation noise std
    double width_mm = 5.0;              // front half-width
    Direction direction = Direction::forward;
    double resample_fraction = 1.0 / 3.0; // resample when N_eff < fraction * N
    double mode_keep_prob = 0.99;
    double r_init_fwd = 1.0;   // mm
    double r_init_bwd = 150.0; // mm
    std::uint64_t seed = 0;
    bool systematic_resampling = false;
    unsigned workers = 0; // 0 = hardware default

    double r_init() const { return direction == Direction::forward ? r_init_fwd : r_init_bwd; }

    void validate() const {
        if (N < 1) throw ConfigError("filter.N must be >= 1");
        if (l < 1) throw ConfigError("filter.l must be >= 1");
        if (sigma_r < 0.0) throw ConfigError("filter.sigma_r must be >= 0");
        if (lambda_mm < 0.0) throw ConfigError("filter.lambda must be >= 0");
        if (!(sigma_w > 0.0)) throw ConfigError("filter.sigma_w must be > 0");
        if (!(width_mm > 0.0)) throw ConfigError("filter.width must be > 0");
        if (!(resample_fraction > 0.0 && resample_fraction <= 1.0))
            throw ConfigError("filter.resample_fraction must be in (0, 1]");
        if (mode_keep_prob < 0.0 || mode_keep_prob > 1.0)
            throw ConfigError("filter.mode_keep_prob must be in [0, 1]");
        if (r_init_fwd < 0.0 || r_init_bwd < 0.0) throw ConfigError("initial radii must be >= 0");
    }
};

/// One (metric, operator) pair selectable by the discrete mode.
struct Mode {
    const GeodesicTable* table = nullptr;
    const TransferOperator* op = nullptr;
    std::string label;
};

using ModeSet = std::vector<Mode>;

struct StepRecord {
    int step = 0;           // 0-based position in the processed sequence
    int time_index = 0;     // physical observation index (reversed for bwd)
    double n_eff = 0.0;     // before any resampling this step
    bool resampled = false;
    bool degenerate = false; // all likelihoods underflowed to zero
    std::vector<double> mode_probs;
    Ensemble state; // posterior representation after correction (+resampling)
};

struct FilterTrace {
    Direction direction = Direction::forward;
    int n_modes = 1;
    double dt_ms = 1.0;
    std::vector<StepRecord> steps;
};

// ---------------------------------------------------------------------------

inline Ensemble init_ensemble(const FilterConfig& config, std::size_t vertex_count,
                              std::size_t n_modes, std::uint64_t seed) {
    config.validate();
    if (n_modes < 1) throw ConfigError("at least one mode is required");
    Ensemble ens;
    ens.particles.resize(config.N);
    ens.weights.assign(config.N, 1.0 / config.N);
    ens.time_index = -1;
    RngStream rng = RngStream::derive(seed, rng_phase::init);
    const double r0 = config.r_init();
    for (auto& p : ens.particles) {
        p.centers.resize(config.l);
        for (auto& c : p.centers)
            c = static_cast<std::uint32_t>(rng.uniform_below(vertex_count));
        p.radii.assign(config.l, r0);
        p.mode = static_cast<std::uint32_t>(rng.uniform_below(n_modes));
    }
    return ens;
}

/// State transition: radius random walk (clamped at 0), center redrawn
/// uniformly inside a geodesic ball of exponentially distributed radius, and
/// an occasional uniform mode redraw. Weights are untouched.
inline Ensemble predict(const Ensemble& ensemble, const ModeSet& modes, const FilterConfig& config,
                        int step, std::uint64_t seed) {
    Ensemble next = ensemble;
    next.time_index = ensemble.time_index + 1;
    const std::size_t n_modes = modes.size();
    parallel_for(next.particles.size(), config.workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Particle& p = next.particles[i];
            RngStream rng = RngStream::derive(seed, rng_phase::predict,
                                              static_cast<std::uint64_t>(step), i);
            for (double& r : p.radii) r = std::max(r + config.sigma_r * rng.normal(), 0.0);
            const GeodesicTable& table = *modes[p.mode].table;
            for (auto& c : p.centers) {
                const double d_max = rng.exponential(config.lambda_mm);
                const auto ball = ball_vertices(table, c, d_max);
                c = ball[rng.uniform_below(ball.size())];
            }
            if (n_modes > 1 && rng.uniform01() >= config.mode_keep_prob)
                p.mode = static_cast<std::uint32_t>(rng.uniform_below(n_modes));
        }
    });
    return next;
}

/// Gaussian observation kernel with Sigma_w = sigma_w^2 I; both the data and
/// the modeled potentials are projected to zero mean before comparison.
inline double likelihood(const Particle& particle, std::span<const double> observation,
                         const ModeSet& modes, const FilterConfig& config) {
    const Mode& mode = modes[particle.mode];
    const FrontTemplate tmpl(config.width_mm);
    const VoltageField field = reconstruct_tmv(particle.centers, particle.radii, *mode.table, tmpl);
    std::vector<double> predicted = apply(*mode.op, field);
    if (predicted.size() != observation.size())
        throw DimensionError("likelihood: observation has " + std::to_string(observation.size()) +
                             " entries, operator produces " + std::to_string(predicted.size()));
    zero_mean_inplace(predicted);
    const std::vector<double> y = zero_mean(observation);
    double ss = 0.0;
    for (std::size_t e = 0; e < y.size(); ++e) {
        const double r = y[e] - predicted[e];
        ss += r * r;
    }
    return std::exp(-ss / (2.0 * config.sigma_w * config.sigma_w));
}

namespace detail {

/// Likelihoods for the whole ensemble; scratch buffers per worker block keep
/// this allocation-light. The data vector must already be zero-mean.
inline std::vector<double> likelihood_batch(const Ensemble& ensemble,
                                            std::span<const double> y_zero_mean,
                                            const ModeSet& modes, const FilterConfig& config) {
    std::vector<double> like(ensemble.size());
    const FrontTemplate tmpl(config.width_mm);
    const double inv_two_var = 1.0 / (2.0 * config.sigma_w * config.sigma_w);
    parallel_for(ensemble.size(), config.workers, [&](std::size_t begin, std::size_t end) {
        std::vector<double> field;
        std::vector<double> predicted;
        for (std::size_t i = begin; i < end; ++i) {
            const Particle& p = ensemble.particles[i];
            const Mode& mode = modes[p.mode];
            field.resize(mode.table->m);
            reconstruct_tmv_into(p.centers, p.radii, *mode.table, tmpl, field);
            predicted.assign(mode.op->q, 0.0);
            for (std::size_t v = 0; v < mode.op->m; ++v) {
                const double x = field[v];
                if (x == 0.0) continue;
                const double* c = mode.op->col(v);
                for (std::size_t e = 0; e < mode.op->q; ++e) predicted[e] += c[e] * x;
            }
            zero_mean_inplace(predicted);
            double ss = 0.0;
            for (std::size_t e = 0; e < predicted.size(); ++e) {
                const double r = y_zero_mean[e] - predicted[e];
                ss += r * r;
            }
            like[i] = std::exp(-ss * inv_two_var);
        }
    });
    return like;
}

} // namespace detail

struct CorrectResult {
    bool degenerate = false;
};

inline CorrectResult correct_with_likelihoods(Ensemble& ensemble, std::span<const double> like) {
    std::vector<double> prod(ensemble.size());
    for (std::size_t i = 0; i < ensemble.size(); ++i) prod[i] = ensemble.weights[i] * like[i];
    const double total = pairwise_sum(prod);
    CorrectResult res;
    if (total <= 0.0) {
        res.degenerate = true;
        const double u = 1.0 / static_cast<double>(ensemble.size());
        for (double& w : ensemble.weights) w = u;
        return res;
    }
    for (std::size_t i = 0; i < ensemble.size(); ++i) ensemble.weights[i] = prod[i] / total;
    return res;
}

/// Bayes update of the weights; particles unchanged. If every product
/// w_i * L_i underflows to zero the weights reset to uniform and the step is
/// flagged degenerate.
inline CorrectResult correct(Ensemble& ensemble, std::span<const double> observation,
                             const ModeSet& modes, const FilterConfig& config) {
    const std::vector<double> y = zero_mean(observation);
    const auto like = detail::likelihood_batch(ensemble, y, modes, config);
    return correct_with_likelihoods(ensemble, like);
}

inline double effective_sample_size(std::span<const double> weights) {
    std::vector<double> sq(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) sq[i] = weights[i] * weights[i];
    return 1.0 / pairwise_sum(sq);
}

namespace detail {

inline std::vector<std::uint32_t> multinomial_indices(std::span<const double> weights,
                                                      std::size_t count, RngStream& rng) {
    std::vector<double> cdf(weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        cdf[i] = acc;
    }
    std::vector<std::uint32_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double u = rng.uniform01() * acc;
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        idx[i] = static_cast<std::uint32_t>(std::min<std::size_t>(
            static_cast<std::size_t>(it - cdf.begin()), weights.size() - 1));
    }
    return idx;
}

inline std::vector<std::uint32_t> systematic_indices(std::span<const double> weights,
                                                     std::size_t count, RngStream& rng) {
    std::vector<std::uint32_t> idx(count);
    const double step = 1.0 / static_cast<double>(count);
    double u = rng.uniform01() * step;
    double acc = weights[0];
    std::size_t j = 0;
    for (std::size_t i = 0; i < count; ++i) {
        while (u > acc && j + 1 < weights.size()) acc += weights[++j];
        idx[i] = static_cast<std::uint32_t>(j);
        u += step;
    }
    return idx;
}

} // namespace detail

/// Resample (multinomial by default) when N_eff < resample_fraction * N.
inline bool maybe_resample(Ensemble& ensemble, const FilterConfig& config, int step,
                           std::uint64_t seed) {
    const double n_eff = effective_sample_size(ensemble.weights);
    if (n_eff >= config.resample_fraction * static_cast<double>(ensemble.size())) return false;
    RngStream rng = RngStream::derive(seed, rng_phase::resample, static_cast<std::uint64_t>(step));
    const auto idx = config.systematic_resampling
                         ? detail::systematic_indices(ensemble.weights, ensemble.size(), rng)
                         : detail::multinomial_indices(ensemble.weights, ensemble.size(), rng);
    std::vector<Particle> resampled(ensemble.size());
    for (std::size_t i = 0; i < idx.size(); ++i) resampled[i] = ensemble.particles[idx[i]];
    ensemble.particles = std::move(resampled);
    const double u = 1.0 / static_cast<double>(ensemble.size());
    for (double& w : ensemble.weights) w = u;
    return true;
}

inline std::vector<double> mode_probability(const Ensemble& ensemble, std::size_t n_modes) {
    std::vector<double> p(n_modes, 0.0);
    for (std::size_t i = 0; i < ensemble.size(); ++i) p[ensemble.particles[i].mode] += ensemble.weights[i];
    return p;
}

/// Full SIR loop over an observation sequence. The backward direction feeds
/// the observations in reverse chronological order; records keep the physical
/// time index so estimators can re-align. Deterministic given the seed for
/// any worker count.
inline FilterTrace run_filter(const ObservationSeq& observations, const ModeSet& modes,
                              const FilterConfig& config) {
    config.validate();
    if (observations.n == 0) throw ParameterError("run_filter: empty observation sequence");
    if (modes.empty()) throw ConfigError("run_filter: empty mode set");
    for (const Mode& mode : modes) {
        if (mode.table == nullptr || mode.op == nullptr)
            throw ConfigError("run_filter: mode without table or operator");
        if (mode.op->q != observations.q)
            throw DimensionError("run_filter: operator has q=" + std::to_string(mode.op->q) +
                                 ", observations have q=" + std::to_string(observations.q));
        if (mode.op->m != mode.table->m)
            throw DimensionError("run_filter: operator m does not match table m");
    }

    const std::size_t n = observations.n;
    const std::size_t m = modes[0].table->m;
    FilterTrace trace;
    trace.direction = config.direction;
    trace.n_modes = static_cast<int>(modes.size());
    trace.dt_ms = observations.dt_ms;
    trace.steps.reserve(n);

    Ensemble ens = init_ensemble(config, m, modes.size(), config.seed);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t obs_index = config.direction == Direction::forward ? k : n - 1 - k;
        ens = predict(ens, modes, config, static_cast<int>(k), config.seed);
        const std::vector<double> y = zero_mean(observations.step(obs_index));
        const auto like = detail::likelihood_batch(ens, y, modes, config);
        const CorrectResult cr = correct_with_likelihoods(ens, like);
        StepRecord rec;
        rec.step = static_cast<int>(k);
        rec.time_index = static_cast<int>(obs_index);
        rec.n_eff = effective_sample_size(ens.weights);
        rec.degenerate = cr.degenerate;
        rec.resampled = maybe_resample(ens, config, static_cast<int>(k), config.seed);
        rec.mode_probs = mode_probability(ens, modes.size());
        rec.state = ens;
        trace.steps.push_back(std::move(rec));
    }
    return trace;
}

} // namespace ecgi
