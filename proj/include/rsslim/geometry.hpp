#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rsslim/errors.hpp"

namespace rsslim {

using Vec2 = Eigen::Vector2d;

/// Ordered reference-radio positions, in meters.
using PositionList = std::vector<Vec2>;

/// Closed interval [low, high] in meters.
struct Interval {
    double low = 0.0;
    double high = 0.0;

    double width() const { return high - low; }
    bool contains(double v) const { return v >= low && v <= high; }
    bool contains_strictly(double v) const { return v > low && v < high; }
    double clamp(double v) const { return v < low ? low : (v > high ? high : v); }
};

/// Geometry, wavelength and far-field guard of one localization experiment.
///
/// The localization square is bounds_x × bounds_y; both widths must equal
/// side_length. The same box constrains the position search of the estimator.
/// Defaults: a 3 m square spanning x ∈ [-1, 2], y ∈ [-2, 1], one reference
/// position every 5 mm, 12.5 cm wavelength and the blind radio at the origin.
struct SetupConfig {
    double side_length = 3.0;
    double spacing = 0.005;
    double wavelength = 0.125;
    Vec2 blind_position = Vec2(0.0, 0.0);
    Interval bounds_x{-1.0, 2.0};
    Interval bounds_y{-2.0, 1.0};
    /// Unset means 2·wavelength.
    std::optional<double> min_far_field_distance;

    double far_field_guard() const { return min_far_field_distance.value_or(2.0 * wavelength); }
    double perimeter() const { return 4.0 * side_length; }
    double wavenumber() const { return 2.0 * M_PI / wavelength; }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

namespace detail {

inline constexpr double kTileTolerance = 1e-9;

inline std::size_t tiled_count(const SetupConfig& cfg) {
    const double ratio = cfg.perimeter() / cfg.spacing;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(rounded - ratio) > kTileTolerance * ratio) {
        throw ConfigError("spacing " + std::to_string(cfg.spacing) + " m does not tile the " +
                          std::to_string(cfg.perimeter()) + " m perimeter");
    }
    return static_cast<std::size_t>(rounded);
}

}  // namespace detail

/// Throws ConfigError when any structural invariant of cfg is violated.
inline void validate(const SetupConfig& cfg) {
    if (!(cfg.side_length > 0.0) || !(cfg.spacing > 0.0) || !(cfg.wavelength > 0.0)) {
        throw ConfigError("side_length, spacing and wavelength must be positive");
    }
    const double tol = detail::kTileTolerance * cfg.side_length;
    if (std::abs(cfg.bounds_x.width() - cfg.side_length) > tol ||
        std::abs(cfg.bounds_y.width() - cfg.side_length) > tol) {
        throw ConfigError("bounds must describe a square of side side_length");
    }
    if (!cfg.bounds_x.contains_strictly(cfg.blind_position.x()) ||
        !cfg.bounds_y.contains_strictly(cfg.blind_position.y())) {
        throw ConfigError("blind position must lie strictly inside the localization square");
    }
    if (cfg.min_far_field_distance && *cfg.min_far_field_distance < 0.0) {
        throw ConfigError("min_far_field_distance must be nonnegative");
    }
    detail::tiled_count(cfg);
}

/// Reference positions evenly spaced along the square's perimeter,
/// counter-clockwise from the (bounds_x.low, bounds_y.low) corner.
inline PositionList perimeter_positions(const SetupConfig& cfg) {
    validate(cfg);
    const std::size_t count = detail::tiled_count(cfg);
    const double side = cfg.side_length;
    const double x0 = cfg.bounds_x.low;
    const double y0 = cfg.bounds_y.low;
    const double x1 = cfg.bounds_x.high;
    const double y1 = cfg.bounds_y.high;

    PositionList out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        // Arc length from the start corner, computed without accumulation.
        const double s = cfg.perimeter() * static_cast<double>(i) / static_cast<double>(count);
        int edge = static_cast<int>(std::floor(s / side));
        if (edge > 3) edge = 3;
        const double t = s - edge * side;
        switch (edge) {
            case 0: out.emplace_back(x0 + t, y0); break;
            case 1: out.emplace_back(x1, y0 + t); break;
            case 2: out.emplace_back(x1 - t, y1); break;
            default: out.emplace_back(x0, y1 - t); break;
        }
    }

    const double guard = cfg.far_field_guard();
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (distance(out[i], cfg.blind_position) < guard) {
            throw FarFieldError("position " + std::to_string(i) + " is closer than " + std::to_string(guard) +
                                " m to the blind radio");
        }
    }
    return out;
}

/// Copy of cfg whose spacing gives `samples_per_wavelength` along the
/// perimeter, rounded to the nearest count that tiles it exactly.
inline SetupConfig with_density(SetupConfig cfg, double samples_per_wavelength) {
    if (!(samples_per_wavelength > 0.0)) throw ConfigError("density must be positive");
    double count = std::round(cfg.perimeter() * samples_per_wavelength / cfg.wavelength);
    if (count < 1.0) count = 1.0;
    cfg.spacing = cfg.perimeter() / count;
    return cfg;
}

/// Samples per wavelength realized by cfg.spacing.
inline double density_of(const SetupConfig& cfg) { return cfg.wavelength / cfg.spacing; }

}  // namespace rsslim
