#pragma once

// Exact discrete filter used as the oracle for the SIR implementation on tiny
// meshes. The state (center, mode, radius) is propagated by numerically exact
// forward recursion: the center move and mode switch kernels are computed in
// closed form, the Gaussian radius walk is integrated on a fine grid (with the
// clamp at zero absorbed into the first cell), and the likelihood is
// re-derived here rather than taken from the filter under test.

#include <cmath>
#include <cstdint>
#include <vector>

#include "ecgi/filter.hpp"
#include "ecgi/forward.hpp"
#include "ecgi/front.hpp"
#include "ecgi/geodesic.hpp"

namespace ecgi::testing {

struct GridFilterProblem {
    const ModeSet* modes = nullptr;
    const ObservationSeq* observations = nullptr;
    double sigma_r = 1.0;
    double lambda_mm = 1.0;
    double sigma_w = 0.05;
    double width_mm = 1.0;
    double mode_keep_prob = 0.99;
    double r_init = 0.0;
    double r_cell = 0.25; // radius grid spacing; r_init must be a multiple
    double r_max = 100.0;
    Direction direction = Direction::forward;
};

class GridFilter {
public:
    explicit GridFilter(const GridFilterProblem& prob) : prob_(prob) {
        m_ = (*prob.modes)[0].table->m;
        n_modes_ = prob.modes->size();
        grid_ = static_cast<std::size_t>(std::round(prob.r_max / prob.r_cell)) + 1;
        build_radius_kernel();
        build_center_kernels();
    }

    /// Posterior marginal over (center, mode) after filtering the whole
    /// observation sequence; row-major [center][mode].
    std::vector<double> final_marginal() const {
        const std::size_t n = prob_.observations->n;
        // density[c][mode][j], flattened
        std::vector<double> p(m_ * n_modes_ * grid_, 0.0);
        const std::size_t j0 = static_cast<std::size_t>(std::round(prob_.r_init / prob_.r_cell));
        const double init_mass = 1.0 / static_cast<double>(m_ * n_modes_);
        for (std::size_t c = 0; c < m_; ++c)
            for (std::size_t d = 0; d < n_modes_; ++d) p[index(c, d, j0)] = init_mass;

        std::vector<double> work(p.size());
        for (std::size_t k = 0; k < n; ++k) {
            predict_radius(p, work);
            predict_center(work, p);
            predict_mode(p, work);
            p.swap(work);
            const std::size_t obs_index =
                prob_.direction == Direction::forward ? k : n - 1 - k;
            correct(p, prob_.observations->step(obs_index));
        }

        std::vector<double> marginal(m_ * n_modes_, 0.0);
        for (std::size_t c = 0; c < m_; ++c)
            for (std::size_t d = 0; d < n_modes_; ++d)
                for (std::size_t j = 0; j < grid_; ++j)
                    marginal[c * n_modes_ + d] += p[index(c, d, j)];
        return marginal;
    }

    /// Same marginal computed from a SIR ensemble.
    std::vector<double> marginal_of(const Ensemble& ensemble) const {
        std::vector<double> marginal(m_ * n_modes_, 0.0);
        for (std::size_t i = 0; i < ensemble.size(); ++i) {
            const Particle& particle = ensemble.particles[i];
            marginal[particle.centers[0] * n_modes_ + particle.mode] += ensemble.weights[i];
        }
        return marginal;
    }

    static double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
        double tv = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
        return 0.5 * tv;
    }

private:
    std::size_t index(std::size_t c, std::size_t d, std::size_t j) const {
        return (c * n_modes_ + d) * grid_ + j;
    }

    static double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

    void build_radius_kernel() {
        // radius_kernel_[i][j] = P(cell j | r = i * h) for r' = max(r + N(0, s^2), 0)
        radius_kernel_.assign(grid_ * grid_, 0.0);
        const double h = prob_.r_cell;
        const double s = prob_.sigma_r;
        for (std::size_t i = 0; i < grid_; ++i) {
            const double r = static_cast<double>(i) * h;
            double* row = radius_kernel_.data() + i * grid_;
            row[0] = normal_cdf((0.5 * h - r) / s); // clamp atom + (0, h/2)
            for (std::size_t j = 1; j + 1 < grid_; ++j) {
                const double lo = (static_cast<double>(j) - 0.5) * h;
                const double hi = (static_cast<double>(j) + 0.5) * h;
                row[j] = normal_cdf((hi - r) / s) - normal_cdf((lo - r) / s);
            }
            row[grid_ - 1] = 1.0 - normal_cdf(((static_cast<double>(grid_) - 1.5) * h - r) / s);
        }
    }

    void build_center_kernels() {
        // center_kernel_[mode][c'][c] = P(new center c | old center c'), exact:
        // the exponential bound d_max falls between consecutive distinct row
        // distances, and the ball is uniform over its members.
        center_kernels_.assign(n_modes_, std::vector<double>(m_ * m_, 0.0));
        for (std::size_t d = 0; d < n_modes_; ++d) {
            const GeodesicTable& table = *(*prob_.modes)[d].table;
            for (std::size_t c = 0; c < m_; ++c) {
                const auto row = table.row(static_cast<std::uint32_t>(c));
                std::vector<double> cuts(row.begin(), row.end());
                std::sort(cuts.begin(), cuts.end());
                cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
                double* out = center_kernels_[d].data() + c * m_;
                for (std::size_t s = 0; s < cuts.size(); ++s) {
                    const double lo = cuts[s];
                    const double interval_prob =
                        (s + 1 < cuts.size())
                            ? std::exp(-lo / prob_.lambda_mm) -
                                  std::exp(-cuts[s + 1] / prob_.lambda_mm)
                            : std::exp(-lo / prob_.lambda_mm);
                    std::size_t ball_size = 0;
                    for (std::size_t j = 0; j < m_; ++j)
                        if (row[j] <= lo) ++ball_size;
                    const double per_member = interval_prob / static_cast<double>(ball_size);
                    for (std::size_t j = 0; j < m_; ++j)
                        if (row[j] <= lo) out[j] += per_member;
                }
            }
        }
    }

    void predict_radius(const std::vector<double>& in, std::vector<double>& out) const {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t c = 0; c < m_; ++c) {
            for (std::size_t d = 0; d < n_modes_; ++d) {
                const double* src = in.data() + index(c, d, 0);
                double* dst = out.data() + index(c, d, 0);
                for (std::size_t i = 0; i < grid_; ++i) {
                    const double mass = src[i];
                    if (mass == 0.0) continue;
                    const double* row = radius_kernel_.data() + i * grid_;
                    for (std::size_t j = 0; j < grid_; ++j) dst[j] += mass * row[j];
                }
            }
        }
    }

    void predict_center(const std::vector<double>& in, std::vector<double>& out) const {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t d = 0; d < n_modes_; ++d) {
            const auto& kernel = center_kernels_[d];
            for (std::size_t c_old = 0; c_old < m_; ++c_old) {
                const double* krow = kernel.data() + c_old * m_;
                for (std::size_t c_new = 0; c_new < m_; ++c_new) {
                    const double k = krow[c_new];
                    if (k == 0.0) continue;
                    const double* src = in.data() + index(c_old, d, 0);
                    double* dst = out.data() + index(c_new, d, 0);
                    for (std::size_t j = 0; j < grid_; ++j) dst[j] += k * src[j];
                }
            }
        }
    }

    void predict_mode(const std::vector<double>& in, std::vector<double>& out) const {
        const double redraw = (1.0 - prob_.mode_keep_prob) / static_cast<double>(n_modes_);
        const double keep = prob_.mode_keep_prob + redraw;
        if (n_modes_ == 1) {
            out = in;
            return;
        }
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t c = 0; c < m_; ++c) {
            for (std::size_t d_old = 0; d_old < n_modes_; ++d_old) {
                const double* src = in.data() + index(c, d_old, 0);
                for (std::size_t d_new = 0; d_new < n_modes_; ++d_new) {
                    const double k = d_new == d_old ? keep : redraw;
                    double* dst = out.data() + index(c, d_new, 0);
                    for (std::size_t j = 0; j < grid_; ++j) dst[j] += k * src[j];
                }
            }
        }
    }

    /// Likelihood re-derived from the model definition (template + operator +
    /// zero-mean Gaussian kernel), independent of ecgi::likelihood.
    double state_likelihood(std::size_t c, std::size_t d, double radius,
                            std::span<const double> y_zero_mean) const {
        const Mode& mode = (*prob_.modes)[d];
        const auto row = mode.table->row(static_cast<std::uint32_t>(c));
        std::vector<double> v(m_);
        for (std::size_t j = 0; j < m_; ++j) {
            const double xi = radius - static_cast<double>(row[j]);
            if (xi < -prob_.width_mm) v[j] = 0.0;
            else if (xi > prob_.width_mm) v[j] = 1.0;
            else {
                const double w = prob_.width_mm;
                v[j] = -xi * xi * xi / (4.0 * w * w * w) + 3.0 * xi / (4.0 * w) + 0.5;
            }
        }
        std::vector<double> pots(mode.op->q, 0.0);
        for (std::size_t j = 0; j < m_; ++j)
            for (std::size_t e = 0; e < mode.op->q; ++e) pots[e] += mode.op->at(e, j) * v[j];
        double mean = 0.0;
        for (double x : pots) mean += x;
        mean /= static_cast<double>(pots.size());
        double ss = 0.0;
        for (std::size_t e = 0; e < pots.size(); ++e) {
            const double r = y_zero_mean[e] - (pots[e] - mean);
            ss += r * r;
        }
        return std::exp(-ss / (2.0 * prob_.sigma_w * prob_.sigma_w));
    }

    void correct(std::vector<double>& p, std::span<const double> observation) const {
        std::vector<double> y(observation.begin(), observation.end());
        double mean = 0.0;
        for (double x : y) mean += x;
        mean /= static_cast<double>(y.size());
        for (double& x : y) x -= mean;
        double total = 0.0;
        for (std::size_t c = 0; c < m_; ++c) {
            for (std::size_t d = 0; d < n_modes_; ++d) {
                for (std::size_t j = 0; j < grid_; ++j) {
                    double& mass = p[index(c, d, j)];
                    if (mass == 0.0) continue;
                    mass *= state_likelihood(c, d, static_cast<double>(j) * prob_.r_cell, y);
                    total += mass;
                }
            }
        }
        for (double& mass : p) mass /= total;
    }

    GridFilterProblem prob_;
    std::size_t m_ = 0;
    std::size_t n_modes_ = 0;
    std::size_t grid_ = 0;
    std::vector<double> radius_kernel_;
    std::vector<std::vector<double>> center_kernels_;
};

} // namespace ecgi::testing
