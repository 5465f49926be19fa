#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rsslim/bounds.hpp"
#include "rsslim/correlation.hpp"
#include "rsslim/errors.hpp"
#include "rsslim/estimator.hpp"
#include "rsslim/geometry.hpp"
#include "rsslim/noisegen.hpp"
#include "rsslim/parallel.hpp"
#include "rsslim/propagation.hpp"
#include "rsslim/random.hpp"

namespace rsslim {

/// P_i - P̄(r_i) for every measurement, in the MeasurementSet layout.
inline Eigen::VectorXd residuals(const MeasurementSet& meas, const PropagationParams& params, const Vec2& blind) {
    validate(meas);
    Eigen::VectorXd out(static_cast<Eigen::Index>(meas.size()));
    for (std::size_t i = 0; i < meas.positions.size(); ++i) {
        const double mean = mean_power(params, distance(meas.positions[i], blind));
        for (int r = 0; r < meas.repeats; ++r) {
            const std::size_t k = i * static_cast<std::size_t>(meas.repeats) + static_cast<std::size_t>(r);
            out[static_cast<Eigen::Index>(k)] = meas.powers[k] - mean;
        }
    }
    return out;
}

/// Residuals of one spatial realization.
struct ResidualSet {
    PositionList positions;
    Eigen::VectorXd values;
};

/// Splits a measurement set into one ResidualSet per repeat.
inline std::vector<ResidualSet> residual_sets(const MeasurementSet& meas, const PropagationParams& params,
                                              const Vec2& blind) {
    const Eigen::VectorXd all = residuals(meas, params, blind);
    const auto n = static_cast<Eigen::Index>(meas.positions.size());
    std::vector<ResidualSet> out;
    for (int r = 0; r < meas.repeats; ++r) {
        ResidualSet s{meas.positions, Eigen::VectorXd(n)};
        for (Eigen::Index i = 0; i < n; ++i) s.values[i] = all[i * meas.repeats + r];
        out.push_back(std::move(s));
    }
    return out;
}

/// Mean of squared residuals (the mean is known to be zero under the model).
inline double residual_variance(const std::vector<ResidualSet>& sets) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : sets) {
        sum += s.values.squaredNorm();
        count += static_cast<std::size_t>(s.values.size());
    }
    if (count == 0) throw DegenerateError("no residuals");
    return sum / static_cast<double>(count);
}

/// Binned spatial cross-covariance. Bin k covers separations in
/// [(k - ½)·w, (k + ½)·w) and is centered at k·w; bin 0 holds the variance.
/// Bins without pairs have count 0 and NaN covariance.
struct CovarianceCurve {
    double bin_width = 0.0;
    std::vector<double> bin_centers;
    std::vector<double> covariance;
    std::vector<double> correlation;
    std::vector<std::size_t> counts;

    std::size_t size() const { return bin_centers.size(); }
    bool present(std::size_t k) const { return counts[k] > 0; }
};

namespace detail {

struct BinnedPair {
    std::uint32_t i;
    std::uint32_t j;
    std::uint32_t bin;
};

inline std::vector<BinnedPair> binned_pairs(const PositionList& pos, double bin_width, std::size_t last_bin) {
    std::vector<BinnedPair> out;
    const double max_sep = (static_cast<double>(last_bin) + 0.5) * bin_width;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i), 0});
        for (std::size_t j = i + 1; j < pos.size(); ++j) {
            const double d = distance(pos[i], pos[j]);
            if (d >= max_sep) continue;
            const auto k = static_cast<std::size_t>(std::floor(d / bin_width + 0.5));
            if (k > last_bin) continue;
            out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(k)});
        }
    }
    return out;
}

}  // namespace detail

/// Average of residual products over all position pairs in each separation
/// bin, pooled over every set. Sets sharing the same positions reuse the pair
/// list; per-set sums are merged in set order so threading cannot change the
/// result.
inline CovarianceCurve spatial_covariance(const std::vector<ResidualSet>& sets, double bin_width, double max_sep,
                                          unsigned threads = 0) {
    if (!(bin_width > 0.0)) throw DomainError("bin width must be positive");
    if (!(max_sep >= 0.0)) throw DomainError("max separation must be nonnegative");
    if (sets.empty()) throw DegenerateError("no residual sets");
    for (const auto& s : sets) {
        if (s.positions.size() < 2) throw DegenerateError("each residual set needs at least two positions");
        if (static_cast<std::size_t>(s.values.size()) != s.positions.size()) {
            throw DomainError("residual count does not match positions");
        }
    }

    const auto last_bin = static_cast<std::size_t>(std::floor(max_sep / bin_width + 1e-9));
    const std::size_t bins = last_bin + 1;

    // Pair lists, one per distinct run of identical position lists.
    std::vector<std::size_t> pair_index(sets.size());
    std::vector<std::vector<detail::BinnedPair>> pair_lists;
    for (std::size_t s = 0; s < sets.size(); ++s) {
        if (s > 0 && sets[s].positions == sets[s - 1].positions) {
            pair_index[s] = pair_index[s - 1];
            continue;
        }
        pair_lists.push_back(detail::binned_pairs(sets[s].positions, bin_width, last_bin));
        pair_index[s] = pair_lists.size() - 1;
    }

    std::vector<std::vector<double>> sums(sets.size(), std::vector<double>(bins, 0.0));
    parallel_for(sets.size(), threads, [&](std::size_t s) {
        const Eigen::VectorXd& v = sets[s].values;
        auto& acc = sums[s];
        for (const auto& p : pair_lists[pair_index[s]]) acc[p.bin] += v[p.i] * v[p.j];
    });

    CovarianceCurve curve;
    curve.bin_width = bin_width;
    curve.bin_centers.resize(bins);
    curve.covariance.assign(bins, 0.0);
    curve.counts.assign(bins, 0);
    for (std::size_t k = 0; k < bins; ++k) curve.bin_centers[k] = static_cast<double>(k) * bin_width;
    std::vector<std::size_t> uses(pair_lists.size(), 0);
    for (std::size_t s = 0; s < sets.size(); ++s) {
        for (std::size_t k = 0; k < bins; ++k) curve.covariance[k] += sums[s][k];
        ++uses[pair_index[s]];
    }
    for (std::size_t l = 0; l < pair_lists.size(); ++l)
        for (const auto& p : pair_lists[l]) curve.counts[p.bin] += uses[l];
    curve.correlation.resize(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        curve.covariance[k] = curve.counts[k] > 0 ? curve.covariance[k] / static_cast<double>(curve.counts[k])
                                                  : std::numeric_limits<double>::quiet_NaN();
    }
    const double c0 = curve.covariance[0];
    for (std::size_t k = 0; k < bins; ++k) curve.correlation[k] = c0 > 0.0 ? curve.covariance[k] / c0 : 0.0;
    return curve;
}

/// Separation of the first local minimum past bin 0, skipping absent bins.
/// Returns NaN if the curve never turns upward.
inline double first_minimum(const CovarianceCurve& curve) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < curve.size(); ++k)
        if (curve.present(k)) idx.push_back(k);
    for (std::size_t a = 1; a + 1 < idx.size(); ++a) {
        if (curve.covariance[idx[a]] <= curve.covariance[idx[a + 1]]) return curve.bin_centers[idx[a]];
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// One-sided power spectrum of a covariance curve.
struct SpectrumCurve {
    std::vector<double> k_values;  // rad/m
    std::vector<double> power;     // sums to 1
};

struct SpectrumOptions {
    /// Frequency grid is `zero_pad` times finer than the plain DFT grid.
    int zero_pad = 4;
};

/// Blackman-Tukey estimate: the binned covariance is mirrored to negative
/// lags, tapered with a Hann lag window and cosine-transformed; the magnitude
/// is normalized to unit total. Absent bins are linearly interpolated.
inline SpectrumCurve spatial_spectrum(const CovarianceCurve& curve, double wavelength, SpectrumOptions opt = {}) {
    if (curve.size() < 2 || !curve.present(0)) throw DegenerateError("covariance curve needs a variance bin");
    if (curve.bin_centers.back() < wavelength) {
        throw DomainError("covariance span is shorter than one wavelength; the cutoff cannot be resolved");
    }
    const std::size_t lags = curve.size() - 1;
    std::vector<double> c(curve.covariance);
    for (std::size_t k = 1; k < c.size(); ++k) {
        if (curve.present(k)) continue;
        std::size_t hi = k + 1;
        while (hi < c.size() && !curve.present(hi)) ++hi;
        if (hi == c.size()) {
            c[k] = 0.0;
            continue;
        }
        const double t = 1.0 / static_cast<double>(hi - k + 1);
        c[k] = c[k - 1] + t * (c[hi] - c[k - 1]);
    }

    const double dx = curve.bin_width;
    const double m_total = static_cast<double>(lags + 1);
    const std::size_t n_seq = 2 * lags + 1;
    const std::size_t grid = static_cast<std::size_t>(opt.zero_pad) * n_seq;
    const double dk = 2.0 * M_PI / (static_cast<double>(grid) * dx);

    SpectrumCurve out;
    const std::size_t points = grid / 2 + 1;
    out.k_values.resize(points);
    out.power.resize(points);
    double total = 0.0;
    for (std::size_t j = 0; j < points; ++j) {
        const double k = static_cast<double>(j) * dk;
        double s = c[0];
        for (std::size_t m = 1; m <= lags; ++m) {
            const double w = 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(m) / m_total));
            s += 2.0 * w * c[m] * std::cos(k * static_cast<double>(m) * dx);
        }
        out.k_values[j] = k;
        out.power[j] = std::abs(s);
        total += out.power[j];
    }
    if (!(total > 0.0)) throw DegenerateError("spectrum has no power");
    for (double& p : out.power) p /= total;
    return out;
}

/// Fraction of spectral power at |k| <= k_cut.
inline double spectral_fraction_below(const SpectrumCurve& s, double k_cut) {
    double f = 0.0;
    for (std::size_t j = 0; j < s.k_values.size(); ++j)
        if (s.k_values[j] <= k_cut) f += s.power[j];
    return f;
}

struct MonteCarloOptions {
    int repeats = 1;
    double temporal_sigma_db = 0.0;
    unsigned threads = 0;
    bool keep_runs = false;
    LocateOptions locate;
};

struct MonteCarloReport {
    int runs = 0;
    double bias_m = 0.0;
    double rmse_m = 0.0;
    double efficiency_gap_m = 0.0;
    double crlb_reference_m = 0.0;
    int nonconverged = 0;
    double density = 0.0;
    std::size_t n = 0;
    std::vector<EstimateResult> estimates;  // filled when keep_runs
};

/// Reference bound for a Monte Carlo study: the independent CRLB for the
/// independent kernel, the Bienaymé bound otherwise. Zero when sigma_db = 0.
inline double reference_bound(const PositionList& pos, const Vec2& blind, const PropagationParams& params,
                              const CorrelationKernel& kernel) {
    if (params.sigma_db == 0.0) return 0.0;
    const FisherMatrix f = fisher_independent(mean_jacobian(params, pos, blind), params.sigma_db);
    if (kernel.kind == KernelKind::independent) return crlb_rmse(f);
    const double n = static_cast<double>(pos.size());
    return bienayme_bound(f, n, effective_count(n, mean_correlation(kernel, pos)));
}

/// Runs `locate` on `runs` synthetic measurement sets. Run r is synthesized
/// with seed stream_seed(seed, r). Throws ConvergenceError when more than 1%
/// of runs fail to converge.
inline MonteCarloReport monte_carlo(const SetupConfig& cfg, const PropagationParams& params,
                                    const CorrelationKernel& kernel, int runs, double density, std::uint64_t seed,
                                    const MonteCarloOptions& opt = {}) {
    if (runs < 100) throw ConfigError("Monte Carlo needs at least 100 runs, got " + std::to_string(runs));
    const SetupConfig c = with_density(cfg, density);
    const Synthesizer syn(c, params, kernel, SynthesisOptions{opt.temporal_sigma_db});
    const SearchBox box = SearchBox::from(c);

    std::vector<EstimateResult> est(static_cast<std::size_t>(runs));
    parallel_for(est.size(), opt.threads, [&](std::size_t r) {
        const MeasurementSet m = syn(opt.repeats, stream_seed(seed, r));
        est[r] = locate(m, box, opt.locate);
    });

    MonteCarloReport rep;
    rep.runs = runs;
    rep.density = density;
    rep.n = syn.positions().size();
    double sx = 0.0, sy = 0.0, s2 = 0.0;
    for (const auto& e : est) {
        const double dx = e.x_mle - c.blind_position.x();
        const double dy = e.y_mle - c.blind_position.y();
        sx += dx;
        sy += dy;
        s2 += dx * dx + dy * dy;
        if (!e.converged) ++rep.nonconverged;
    }
    if (rep.nonconverged * 100 > runs) {
        throw ConvergenceError(std::to_string(rep.nonconverged) + " of " + std::to_string(runs) +
                               " runs did not converge");
    }
    rep.bias_m = std::hypot(sx / runs, sy / runs);
    rep.rmse_m = std::sqrt(s2 / runs);
    rep.crlb_reference_m = reference_bound(syn.positions(), c.blind_position, params, kernel);
    rep.efficiency_gap_m = std::abs(rep.rmse_m - rep.crlb_reference_m);
    if (opt.keep_runs) rep.estimates = std::move(est);
    return rep;
}

}  // namespace rsslim
