#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "rsslim/errors.hpp"
#include "rsslim/geometry.hpp"

namespace rsslim {

/// Log-normal shadowing model: mean power p_r0 - 10·eta·log10(r / r0) in dBm,
/// with zero-mean Gaussian noise of standard deviation sigma_db on top.
struct PropagationParams {
    double p_r0 = -16.7;
    double eta = 3.36;
    double sigma_db = 1.68;
    double r0 = 1.0;
};

inline void validate(const PropagationParams& p) {
    if (!(p.eta > 0.0)) throw DomainError("path-loss exponent eta must be positive");
    if (!(p.sigma_db >= 0.0)) throw DomainError("sigma_db must be nonnegative");
    if (!(p.r0 > 0.0)) throw DomainError("reference distance r0 must be positive");
}

/// Mean received power at distance r. `min_distance` is the far-field guard.
inline double mean_power(const PropagationParams& p, double r, double min_distance = 0.0) {
    if (!(r > 0.0)) throw DomainError("distance must be positive, got " + std::to_string(r));
    if (r < min_distance) {
        throw FarFieldError("distance " + std::to_string(r) + " m is inside the far-field guard of " +
                            std::to_string(min_distance) + " m");
    }
    return p.p_r0 - 10.0 * p.eta * std::log10(r / p.r0);
}

/// Mean power at every position for a transmitter at `blind`.
inline Eigen::VectorXd mean_power_vector(const PropagationParams& p, const PositionList& positions, const Vec2& blind,
                                         double min_distance = 0.0) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(positions.size()));
    for (std::size_t i = 0; i < positions.size(); ++i) {
        try {
            out[static_cast<Eigen::Index>(i)] = mean_power(p, distance(positions[i], blind), min_distance);
        } catch (const FarFieldError& e) {
            throw FarFieldError("position " + std::to_string(i) + ": " + e.what());
        } catch (const DomainError& e) {
            throw DomainError("position " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace rsslim
