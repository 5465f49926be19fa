#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "rsslim/correlation.hpp"
#include "rsslim/errors.hpp"
#include "rsslim/geometry.hpp"
#include "rsslim/noisegen.hpp"
#include "rsslim/parallel.hpp"
#include "rsslim/propagation.hpp"

namespace rsslim {

/// Fisher information over θ = [x, y, p_r0, eta].
struct FisherMatrix {
    Eigen::Matrix4d entries = Eigen::Matrix4d::Zero();
    /// Set when a clipped pseudo-inverse of the covariance was used.
    bool regularized = false;
};

/// Bounds for one sampling density.
struct BoundReport {
    double density = 0.0;  // samples per wavelength
    std::size_t n = 0;
    double rho_bar = 0.0;
    double n_eff = 0.0;
    double rmse_crlb_indep = 0.0;
    std::optional<double> rmse_crlb_correlated;
    double rmse_bienayme = 0.0;
    double condition_number = 1.0;
    bool degenerate = false;
};

/// Rows ∂P̄_i/∂θ at the true parameters:
/// [-b(x - x_i)/r_i², -b(y - y_i)/r_i², 1, -10·log10(r_i / r0)] with b = 10·eta/ln 10.
inline Eigen::MatrixXd mean_jacobian(const PropagationParams& params, const PositionList& positions,
                                     const Vec2& blind) {
    const auto n = static_cast<Eigen::Index>(positions.size());
    const double b = 10.0 * params.eta / std::log(10.0);
    Eigen::MatrixXd j(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec2 d = blind - positions[static_cast<std::size_t>(i)];
        const double r2 = d.squaredNorm();
        if (!(r2 > 0.0)) throw DomainError("position " + std::to_string(i) + " coincides with the blind radio");
        j(i, 0) = -b * d.x() / r2;
        j(i, 1) = -b * d.y() / r2;
        j(i, 2) = 1.0;
        j(i, 3) = -10.0 / std::log(10.0) * std::log(std::sqrt(r2) / params.r0);
    }
    return j;
}

/// F = JᵀJ / σ² for independent equal-variance noise.
inline FisherMatrix fisher_independent(const Eigen::MatrixXd& jac, double sigma_db) {
    if (!(sigma_db > 0.0)) throw DegenerateError("Fisher information is unbounded for zero noise");
    FisherMatrix f;
    f.entries = jac.transpose() * jac / (sigma_db * sigma_db);
    f.entries = 0.5 * (f.entries + f.entries.transpose()).eval();
    return f;
}

/// Symmetric eigen-decomposition of a covariance matrix, reused for the
/// condition number and for C⁻¹.
struct CovarianceSpectrum {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    double clip_threshold = 0.0;

    explicit CovarianceSpectrum(const CovarianceMatrix& cov)
        : clip_threshold(kClipRelative * cov.sigma_db * cov.sigma_db) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov.entries);
        if (eig.info() != Eigen::Success) throw DegenerateError("covariance eigen-decomposition failed");
        values = eig.eigenvalues();
        vectors = eig.eigenvectors();
    }

    bool singular() const { return values.size() == 0 || values[0] <= clip_threshold; }

    double condition_number() const {
        if (values.size() == 0 || values[0] <= 0.0) return std::numeric_limits<double>::infinity();
        return values[values.size() - 1] / values[0];
    }
};

/// F = Jᵀ C⁻¹ J computed in the eigenbasis of C. Eigenvalues at or below the
/// clip threshold are dropped when `allow_pseudo_inverse`, otherwise they
/// raise DegenerateError.
inline FisherMatrix fisher(const Eigen::MatrixXd& jac, const CovarianceSpectrum& spec,
                           bool allow_pseudo_inverse = false) {
    if (spec.singular() && !allow_pseudo_inverse) {
        throw DegenerateError("covariance is singular; the CRLB needs regularization");
    }
    const Eigen::Index n = spec.values.size();
    Eigen::Index first = 0;
    while (first < n && spec.values[first] <= spec.clip_threshold) ++first;
    const Eigen::Index rank = n - first;

    const Eigen::MatrixXd projected = spec.vectors.rightCols(rank).transpose() * jac;  // rank × 4
    const Eigen::VectorXd inv = spec.values.tail(rank).cwiseInverse();
    FisherMatrix f;
    f.entries = projected.transpose() * inv.asDiagonal() * projected;
    f.entries = 0.5 * (f.entries + f.entries.transpose()).eval();
    f.regularized = first > 0;
    return f;
}

inline FisherMatrix fisher(const Eigen::MatrixXd& jac, const CovarianceMatrix& cov,
                           bool allow_pseudo_inverse = false) {
    if (jac.rows() != cov.size()) throw DomainError("Jacobian rows must match covariance size");
    if (is_diagonal(cov.entries)) {
        const Eigen::VectorXd d = cov.entries.diagonal();
        if ((d.array() <= kClipRelative * cov.sigma_db * cov.sigma_db).any() || !(cov.sigma_db > 0.0)) {
            throw DegenerateError("covariance has a zero variance");
        }
        FisherMatrix f;
        f.entries = jac.transpose() * d.cwiseInverse().asDiagonal() * jac;
        f.entries = 0.5 * (f.entries + f.entries.transpose()).eval();
        return f;
    }
    return fisher(jac, CovarianceSpectrum(cov), allow_pseudo_inverse);
}

/// Inverse of F, rejecting rank-deficient information.
inline Eigen::Matrix4d inverse_fisher(const FisherMatrix& f) {
    const Eigen::Vector4d d = f.entries.diagonal();
    if ((d.array() <= 0.0).any()) throw RankDeficiencyError("Fisher information has an empty direction");
    const Eigen::Vector4d s = d.cwiseSqrt().cwiseInverse();
    // Rank test on the unit-diagonal form so parameter units do not matter.
    const Eigen::Matrix4d normalized = s.asDiagonal() * f.entries * s.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(normalized);
    if (eig.eigenvalues()[0] <= 1e-12 * eig.eigenvalues()[3]) {
        throw RankDeficiencyError("Fisher information matrix is rank deficient");
    }
    const Eigen::Matrix4d inv_normalized =
        eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    return s.asDiagonal() * inv_normalized * s.asDiagonal();
}

/// Position RMSE bound √([F⁻¹]_xx + [F⁻¹]_yy), with p_r0 and eta kept as
/// nuisance parameters. `full_trace` gives √tr(F⁻¹) instead.
inline double crlb_rmse(const FisherMatrix& f, bool full_trace = false) {
    const Eigen::Matrix4d inv = inverse_fisher(f);
    return std::sqrt(full_trace ? inv.trace() : inv(0, 0) + inv(1, 1));
}

/// √(n / n_eff) · crlb_rmse(F) for F computed under independent noise.
inline double bienayme_bound(const FisherMatrix& f_indep, double n, double n_eff, bool full_trace = false) {
    if (!(n_eff > 0.0) || !(n >= n_eff)) throw DomainError("need 0 < n_eff <= n");
    return std::sqrt(n / n_eff) * crlb_rmse(f_indep, full_trace);
}

struct SweepOptions {
    bool full_trace = false;
    /// Correlated CRLB is reported only below this condition number.
    double max_condition = 1e12;
    unsigned threads = 0;
};

/// Bounds at a single density; see bound_sweep.
inline BoundReport bound_at_density(const SetupConfig& cfg, const PropagationParams& params,
                                    const CorrelationKernel& kernel, double density, const SweepOptions& opt = {}) {
    const SetupConfig c = with_density(cfg, density);
    const PositionList pos = perimeter_positions(c);
    BoundReport rep;
    rep.density = density;
    rep.n = pos.size();
    const double n = static_cast<double>(rep.n);

    const Eigen::MatrixXd jac = mean_jacobian(params, pos, c.blind_position);
    const FisherMatrix f_ind = fisher_independent(jac, params.sigma_db);
    rep.rmse_crlb_indep = crlb_rmse(f_ind, opt.full_trace);

    rep.rho_bar = rep.n >= 2 ? mean_correlation(kernel, pos) : 0.0;
    rep.n_eff = effective_count(n, rep.rho_bar);
    rep.rmse_bienayme = bienayme_bound(f_ind, n, rep.n_eff, opt.full_trace);

    const CovarianceMatrix cov = build_covariance(kernel, pos, params.sigma_db);
    if (is_diagonal(cov.entries)) {
        rep.condition_number = 1.0;
        rep.rmse_crlb_correlated = crlb_rmse(fisher(jac, cov), opt.full_trace);
        return rep;
    }
    const CovarianceSpectrum spec(cov);
    rep.condition_number = spec.condition_number();
    if (rep.condition_number < opt.max_condition && !spec.singular()) {
        rep.rmse_crlb_correlated = crlb_rmse(fisher(jac, spec), opt.full_trace);
    } else {
        rep.degenerate = true;
    }
    return rep;
}

/// Independent CRLB, Bienaymé bound and (when C is well conditioned) the
/// exact correlated CRLB for each density in samples per wavelength.
/// Positions are regenerated per density; truth is cfg.blind_position with
/// `params`.
inline std::vector<BoundReport> bound_sweep(const SetupConfig& cfg, const PropagationParams& params,
                                            const CorrelationKernel& kernel, const std::vector<double>& densities,
                                            const SweepOptions& opt = {}) {
    validate(params);
    for (double d : densities)
        if (!(d > 0.0)) throw ConfigError("densities must be positive");
    std::vector<BoundReport> out(densities.size());
    parallel_for(densities.size(), opt.threads,
                 [&](std::size_t i) { out[i] = bound_at_density(cfg, params, kernel, densities[i], opt); });
    return out;
}

}  // namespace rsslim
