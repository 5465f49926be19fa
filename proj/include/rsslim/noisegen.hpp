#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "rsslim/correlation.hpp"
#include "rsslim/errors.hpp"
#include "rsslim/geometry.hpp"
#include "rsslim/propagation.hpp"
#include "rsslim/random.hpp"

namespace rsslim {

/// Eigenvalues below kClipRelative·σ² are treated as zero.
inline constexpr double kClipRelative = 1e-10;

/// Square-root factor of a (possibly singular) covariance: C_reg = root·rootᵀ,
/// where root spans only the eigen-subspace that survives clipping.
struct NoiseFactor {
    Eigen::MatrixXd root;            // n × rank; empty when diagonal
    Eigen::VectorXd diagonal_sd;     // per-component std when C is diagonal
    bool diagonal = false;
    Eigen::Index dimension = 0;
    Eigen::Index rank = 0;
    bool clipped = false;
    double clip_threshold = 0.0;
    double retained_variance_fraction = 1.0;
};

inline bool is_diagonal(const Eigen::MatrixXd& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (i != j && m(i, j) != 0.0) return false;
    return true;
}

inline NoiseFactor factorize(const CovarianceMatrix& cov) {
    const Eigen::Index n = cov.size();
    NoiseFactor f;
    f.dimension = n;
    f.clip_threshold = kClipRelative * cov.sigma_db * cov.sigma_db;

    if (is_diagonal(cov.entries)) {
        f.diagonal = true;
        f.diagonal_sd = cov.entries.diagonal().cwiseMax(0.0).cwiseSqrt();
        f.rank = (cov.entries.diagonal().array() > f.clip_threshold).count();
        f.clipped = f.rank < n && cov.sigma_db > 0.0;
        return f;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov.entries);
    if (eig.info() != Eigen::Success) throw DegenerateError("covariance eigen-decomposition failed");
    const Eigen::VectorXd& values = eig.eigenvalues();  // ascending

    Eigen::Index first = 0;
    while (first < n && values[first] <= f.clip_threshold) ++first;
    f.rank = n - first;
    f.clipped = first > 0;

    const double total = cov.entries.trace();
    const double retained = f.rank > 0 ? values.tail(f.rank).sum() : 0.0;
    f.retained_variance_fraction = total > 0.0 ? retained / total : 1.0;
    if (total > 0.0 && f.retained_variance_fraction < 1e-3) {
        throw DegenerateError("eigenvalue clipping removed more than 99.9% of the noise variance");
    }
    f.root = eig.eigenvectors().rightCols(f.rank) * values.tail(f.rank).cwiseSqrt().asDiagonal();
    return f;
}

/// One draw from N(0, C_reg) using sub-stream `stream` of `master`.
inline Eigen::VectorXd draw(const NoiseFactor& f, std::uint64_t master, std::uint64_t stream) {
    auto rng = make_stream(master, stream);
    std::normal_distribution<double> normal(0.0, 1.0);
    if (f.diagonal) {
        Eigen::VectorXd x(f.dimension);
        for (Eigen::Index i = 0; i < f.dimension; ++i) x[i] = f.diagonal_sd[i] * normal(rng);
        return x;
    }
    Eigen::VectorXd z(f.rank);
    for (Eigen::Index i = 0; i < f.rank; ++i) z[i] = normal(rng);
    if (f.rank == 0) return Eigen::VectorXd::Zero(f.dimension);
    return f.root * z;
}

/// `draws` independent rows from N(0, C_reg); row d uses sub-stream d.
inline Eigen::MatrixXd sample_noise(const CovarianceMatrix& cov, std::uint64_t seed, Eigen::Index draws) {
    const NoiseFactor f = factorize(cov);
    Eigen::MatrixXd out(draws, cov.size());
    for (Eigen::Index d = 0; d < draws; ++d) out.row(d) = draw(f, seed, static_cast<std::uint64_t>(d)).transpose();
    return out;
}

/// Powers at every position, repeated `repeats` times per position.
/// Index layout is position-major: powers[i·repeats + r].
struct MeasurementSet {
    PositionList positions;
    std::vector<double> powers;
    int repeats = 1;
    std::uint64_t seed = 0;

    double power(std::size_t position, int repeat) const {
        return powers[position * static_cast<std::size_t>(repeats) + static_cast<std::size_t>(repeat)];
    }
    std::size_t size() const { return powers.size(); }
};

inline void validate(const MeasurementSet& m) {
    if (m.repeats < 1) throw ConfigError("repeats must be at least 1");
    if (m.powers.size() != m.positions.size() * static_cast<std::size_t>(m.repeats)) {
        throw ConfigError("measurement count does not equal positions × repeats");
    }
    for (double p : m.powers)
        if (!std::isfinite(p)) throw DomainError("measurement powers must be finite");
}

struct SynthesisOptions {
    /// Extra i.i.d. per-measurement noise added to each repeat. At 0 the
    /// repeats at a position duplicate its single spatial draw.
    double temporal_sigma_db = 0.0;
};

/// Holds everything that is fixed across seeds: positions, mean powers and
/// the noise factor. Seeds then only cost a draw.
///
/// Streams of a seed: 0 is the spatial draw, 1 + r the temporal noise of repeat r.
class Synthesizer {
public:
    Synthesizer(const SetupConfig& cfg, const PropagationParams& params, const CorrelationKernel& kernel,
                SynthesisOptions options = {})
        : positions_(perimeter_positions(cfg)),
          mean_(mean_power_vector(params, positions_, cfg.blind_position, cfg.far_field_guard())),
          factor_(factorize(build_covariance(kernel, positions_, params.sigma_db))),
          options_(options) {
        validate(params);
        if (options_.temporal_sigma_db < 0.0) throw DomainError("temporal_sigma_db must be nonnegative");
    }

    MeasurementSet operator()(int repeats, std::uint64_t seed) const {
        if (repeats < 1) throw ConfigError("repeats must be at least 1");
        const Eigen::VectorXd spatial = draw(factor_, seed, 0);
        const std::size_t n = positions_.size();
        const auto reps = static_cast<std::size_t>(repeats);

        MeasurementSet m{positions_, std::vector<double>(n * reps), repeats, seed};
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = 0; r < reps; ++r)
                m.powers[i * reps + r] = mean_[static_cast<Eigen::Index>(i)] + spatial[static_cast<Eigen::Index>(i)];

        if (options_.temporal_sigma_db > 0.0) {
            for (std::size_t r = 0; r < reps; ++r) {
                auto rng = make_stream(seed, 1 + r);
                std::normal_distribution<double> normal(0.0, options_.temporal_sigma_db);
                for (std::size_t i = 0; i < n; ++i) m.powers[i * reps + r] += normal(rng);
            }
        }
        return m;
    }

    const PositionList& positions() const { return positions_; }
    const Eigen::VectorXd& mean() const { return mean_; }
    const NoiseFactor& factor() const { return factor_; }

private:
    PositionList positions_;
    Eigen::VectorXd mean_;
    NoiseFactor factor_;
    SynthesisOptions options_;
};

inline MeasurementSet synthesize(const SetupConfig& cfg, const PropagationParams& params,
                                 const CorrelationKernel& kernel, int repeats, std::uint64_t seed,
                                 SynthesisOptions options = {}) {
    return Synthesizer(cfg, params, kernel, options)(repeats, seed);
}

}  // namespace rsslim
