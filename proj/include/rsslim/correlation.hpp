#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "rsslim/errors.hpp"
#include "rsslim/geometry.hpp"

namespace rsslim {

enum class KernelKind { independent, diffraction_sinc2, exponential };

/// Spatial correlation coefficient ρ(δx) between two measurements δx apart.
///
/// - independent: 1 at δx = 0, 0 elsewhere.
/// - diffraction_sinc2: (sin(k0·δx) / (k0·δx))² with k0 = 2π/λ0; the
///   unnormalized sinc puts the first zero at δx = λ0/2.
/// - exponential: exp(-2·δx / χ).
struct CorrelationKernel {
    KernelKind kind = KernelKind::independent;
    double wavelength = 0.125;
    double correlation_length = 0.0625;

    static CorrelationKernel independent() { return {KernelKind::independent, 0.125, 0.0625}; }
    static CorrelationKernel diffraction(double wavelength) {
        return {KernelKind::diffraction_sinc2, wavelength, wavelength / 2.0};
    }
    /// Exponential kernel; the correlation length defaults to half the wavelength.
    static CorrelationKernel exponential(double wavelength, double chi = 0.0) {
        return {KernelKind::exponential, wavelength, chi > 0.0 ? chi : wavelength / 2.0};
    }
};

inline std::string_view to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::independent: return "independent";
        case KernelKind::diffraction_sinc2: return "sinc2";
        case KernelKind::exponential: return "exponential";
    }
    return "independent";
}

inline KernelKind parse_kernel_kind(std::string_view name) {
    if (name == "independent") return KernelKind::independent;
    if (name == "sinc2" || name == "diffraction_sinc2") return KernelKind::diffraction_sinc2;
    if (name == "exponential") return KernelKind::exponential;
    throw ConfigError("unknown correlation kernel '" + std::string(name) + "'");
}

inline double kernel_eval(const CorrelationKernel& kernel, double dx) {
    if (!(dx >= 0.0)) throw DomainError("separation must be nonnegative");
    switch (kernel.kind) {
        case KernelKind::independent:
            return dx == 0.0 ? 1.0 : 0.0;
        case KernelKind::diffraction_sinc2: {
            const double u = 2.0 * M_PI / kernel.wavelength * dx;
            if (u == 0.0) return 1.0;
            const double s = std::sin(u) / u;
            return s * s;
        }
        case KernelKind::exponential:
            return std::exp(-2.0 * dx / kernel.correlation_length);
    }
    return 0.0;
}

/// Noise covariance C[i][j] = ρ(|x_i - x_j|)·σ² in dB².
struct CovarianceMatrix {
    Eigen::MatrixXd entries;
    double sigma_db = 0.0;

    Eigen::Index size() const { return entries.rows(); }
};

/// Upper triangle is evaluated once and mirrored, so the result is exactly symmetric.
inline CovarianceMatrix build_covariance(const CorrelationKernel& kernel, const PositionList& positions,
                                         double sigma_db) {
    const auto n = static_cast<Eigen::Index>(positions.size());
    const double var = sigma_db * sigma_db;
    CovarianceMatrix cov{Eigen::MatrixXd(n, n), sigma_db};
    for (Eigen::Index i = 0; i < n; ++i) {
        cov.entries(i, i) = var;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double c = kernel_eval(kernel, distance(positions[i], positions[j])) * var;
            cov.entries(i, j) = c;
            cov.entries(j, i) = c;
        }
    }
    return cov;
}

/// Mean correlation ρ̄ over the n(n-1) ordered pairs of distinct positions.
inline double mean_correlation(const CorrelationKernel& kernel, const PositionList& positions) {
    const std::size_t n = positions.size();
    if (n < 2) throw DegenerateError("mean correlation needs at least two positions");
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) row += kernel_eval(kernel, distance(positions[i], positions[j]));
        sum += row;
    }
    return 2.0 * sum / (static_cast<double>(n) * static_cast<double>(n - 1));
}

/// Bienaymé effective number of independent measurements, n / (1 + (n-1)·ρ̄).
inline double effective_count(double n, double rho_bar) {
    if (!(n >= 1.0)) throw DomainError("measurement count must be at least 1");
    if (!(rho_bar >= 0.0 && rho_bar <= 1.0)) {
        throw DomainError("mean correlation must lie in [0, 1], got " + std::to_string(rho_bar));
    }
    return n / (1.0 + (n - 1.0) * rho_bar);
}

}  // namespace rsslim
