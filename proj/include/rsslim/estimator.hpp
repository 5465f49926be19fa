#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Cholesky>

#include "rsslim/errors.hpp"
#include "rsslim/geometry.hpp"
#include "rsslim/noisegen.hpp"
#include "rsslim/propagation.hpp"

namespace rsslim {

/// Parameter vector θ = [x, y, p_r0, eta].
using Theta = Eigen::Vector4d;

namespace theta {
inline constexpr Eigen::Index x = 0;
inline constexpr Eigen::Index y = 1;
inline constexpr Eigen::Index p_r0 = 2;
inline constexpr Eigen::Index eta = 3;
}  // namespace theta

/// Box constraint on the blind-radio position.
struct SearchBox {
    Interval x{-1.0, 2.0};
    Interval y{-2.0, 1.0};

    static SearchBox from(const SetupConfig& cfg) { return {cfg.bounds_x, cfg.bounds_y}; }
    bool contains(double px, double py) const { return x.contains(px) && y.contains(py); }
    Vec2 center() const { return {0.5 * (x.low + x.high), 0.5 * (y.low + y.high)}; }
};

struct LocateOptions {
    int max_iterations = 500;
    /// Converged when the projected gradient norm of V drops below
    /// gradient_tolerance·max(1, V) ...
    double gradient_tolerance = 1e-9;
    /// ... or an accepted step moves θ by less than this.
    double step_tolerance = 1e-12;
    double eta_floor = 1e-3;
    /// V(θ) = Σ(P_i - P̄_i)² / σ². Only rescales V; the argmin is unchanged.
    double noise_sigma_db = 1.0;
    double r0 = 1.0;
};

struct EstimateResult {
    double x_mle = 0.0;
    double y_mle = 0.0;
    double p_r0_mle = 0.0;
    double eta_mle = 0.0;
    double objective_value = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<std::string> active_constraints;
    int start_index = 0;

    Theta theta() const { return {x_mle, y_mle, p_r0_mle, eta_mle}; }
};

namespace detail {

inline void require_measurements(const MeasurementSet& m) {
    validate(m);
    if (m.powers.empty()) throw DegenerateError("measurement set is empty");
}

/// Per-position mean of the repeats.
inline Eigen::VectorXd position_means(const MeasurementSet& m) {
    const auto n = m.positions.size();
    Eigen::VectorXd out(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int r = 0; r < m.repeats; ++r) s += m.power(i, r);
        out[static_cast<Eigen::Index>(i)] = s / m.repeats;
    }
    return out;
}

/// Least-squares fit of P = p_r0 + eta·g with g = -10·log10(r / r0), distances
/// taken from `blind`. Returns {p_r0, eta, rms residual}.
inline std::array<double, 3> fit_power_law(const MeasurementSet& m, const Vec2& blind, double r0) {
    const auto n = m.positions.size();
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = distance(m.positions[i], blind);
        if (!(r > 0.0)) throw DomainError("a reference position coincides with the blind position");
        g[i] = -10.0 * std::log10(r / r0);
    }
    const Eigen::VectorXd ybar = position_means(m);
    double gm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        gm += g[i];
        ym += ybar[static_cast<Eigen::Index>(i)];
    }
    gm /= static_cast<double>(n);
    ym /= static_cast<double>(n);
    double sgg = 0.0, sgy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sgg += (g[i] - gm) * (g[i] - gm);
        sgy += (g[i] - gm) * (ybar[static_cast<Eigen::Index>(i)] - ym);
    }
    if (!(sgg > 1e-20 * static_cast<double>(n) * (1.0 + gm * gm))) {
        throw RankDeficiencyError("all reference distances are equal; eta is not identifiable");
    }
    const double eta = sgy / sgg;
    const double p = ym - eta * gm;
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (int r = 0; r < m.repeats; ++r) {
            const double e = m.power(i, r) - (p + eta * g[i]);
            ssr += e * e;
        }
    return {p, eta, std::sqrt(ssr / static_cast<double>(m.size()))};
}

inline void require_non_collinear(const PositionList& pos) {
    if (pos.size() < 3) throw DegenerateError("need at least three reference positions");
    const Vec2& a = pos.front();
    std::size_t far = 0;
    double best = 0.0;
    for (std::size_t i = 1; i < pos.size(); ++i) {
        const double d = (pos[i] - a).squaredNorm();
        if (d > best) {
            best = d;
            far = i;
        }
    }
    const Vec2 u = pos[far] - a;
    for (const Vec2& c : pos) {
        const Vec2 v = c - a;
        if (std::abs(u.x() * v.y() - u.y() * v.x()) > 1e-12 * best) return;
    }
    throw DegenerateError("reference positions are collinear");
}

/// Damped Gauss-Newton on the sum of squared residuals with a projected
/// active set for the box on (x, y) and the floor on eta.
class LevenbergSolver {
public:
    static constexpr double kResolutionFactor = 64.0;

    LevenbergSolver(const MeasurementSet& m, const SearchBox& box, const LocateOptions& opt)
        : m_(m), box_(box), opt_(opt), weight_(static_cast<double>(m.repeats)) {}

    /// Σ (P - P̄)² over every measurement; +inf where the model is undefined.
    double ssr(const Theta& t) const {
        double s = 0.0;
        for (std::size_t i = 0; i < m_.positions.size(); ++i) {
            const double r = std::hypot(t[theta::x] - m_.positions[i].x(), t[theta::y] - m_.positions[i].y());
            if (!(r > 0.0)) return std::numeric_limits<double>::infinity();
            const double model = t[theta::p_r0] - 10.0 * t[theta::eta] * std::log10(r / opt_.r0);
            for (int k = 0; k < m_.repeats; ++k) {
                const double e = m_.power(i, k) - model;
                s += e * e;
            }
        }
        return s;
    }

    double objective(const Theta& t) const { return ssr(t) / (opt_.noise_sigma_db * opt_.noise_sigma_db); }

    EstimateResult solve(Theta t) const {
        EstimateResult res;
        double f = ssr(t);
        double mu = 1e-3;
        const double sigma2 = opt_.noise_sigma_db * opt_.noise_sigma_db;

        int it = 0;
        for (; it < opt_.max_iterations; ++it) {
            Eigen::Matrix4d a;
            Eigen::Vector4d b;
            normal_equations(t, a, b);  // a = JᵀWJ, b = JᵀWe; ∇SSR = -2b

            std::array<bool, 4> free{true, true, true, true};
            const Eigen::Vector4d grad = -2.0 * b;
            if ((t[theta::x] <= box_.x.low && grad[theta::x] > 0.0) ||
                (t[theta::x] >= box_.x.high && grad[theta::x] < 0.0))
                free[theta::x] = false;
            if ((t[theta::y] <= box_.y.low && grad[theta::y] > 0.0) ||
                (t[theta::y] >= box_.y.high && grad[theta::y] < 0.0))
                free[theta::y] = false;
            if (t[theta::eta] <= opt_.eta_floor && grad[theta::eta] > 0.0) free[theta::eta] = false;

            double pg2 = 0.0;
            for (int k = 0; k < 4; ++k)
                if (free[k]) pg2 += grad[k] * grad[k];
            const double v = f / sigma2;
            if (std::sqrt(pg2) / sigma2 < opt_.gradient_tolerance * std::max(1.0, v)) {
                res.converged = true;
                break;
            }

            bool accepted = false;
            while (mu < 1e20) {
                Eigen::Matrix4d damped = a;
                for (int k = 0; k < 4; ++k) {
                    damped(k, k) += mu * std::max(a(k, k), 1e-12);
                    if (!free[k]) {
                        damped.row(k).setZero();
                        damped.col(k).setZero();
                        damped(k, k) = 1.0;
                    }
                }
                Eigen::Vector4d rhs = b;
                for (int k = 0; k < 4; ++k)
                    if (!free[k]) rhs[k] = 0.0;
                const Eigen::Vector4d step = damped.ldlt().solve(rhs);
                const Theta cand = project(t + step);
                const double fc = ssr(cand);
                if (std::isfinite(fc) && fc < f) {
                    const double moved = (cand - t).norm();
                    t = cand;
                    f = fc;
                    mu = std::max(mu / 3.0, 1e-15);
                    accepted = true;
                    if (moved < opt_.step_tolerance) res.converged = true;
                    break;
                }
                mu *= 4.0;
            }
            if (!accepted) {
                // No representable descent. Converged if the undamped Gauss-Newton
                // model promises less improvement than f can resolve.
                Eigen::Matrix4d reduced = a;
                Eigen::Vector4d rhs = b;
                for (int k = 0; k < 4; ++k) {
                    if (free[k]) continue;
                    reduced.row(k).setZero();
                    reduced.col(k).setZero();
                    reduced(k, k) = 1.0;
                    rhs[k] = 0.0;
                }
                const double predicted = rhs.dot(reduced.ldlt().solve(rhs));
                res.converged = predicted <= kResolutionFactor * std::numeric_limits<double>::epsilon() * f;
                break;
            }
            if (res.converged) {
                ++it;
                break;
            }
        }

        res.x_mle = t[theta::x];
        res.y_mle = t[theta::y];
        res.p_r0_mle = t[theta::p_r0];
        res.eta_mle = t[theta::eta];
        res.objective_value = f / sigma2;
        res.iterations = it;
        if (t[theta::x] <= box_.x.low) res.active_constraints.emplace_back("x_min");
        if (t[theta::x] >= box_.x.high) res.active_constraints.emplace_back("x_max");
        if (t[theta::y] <= box_.y.low) res.active_constraints.emplace_back("y_min");
        if (t[theta::y] >= box_.y.high) res.active_constraints.emplace_back("y_max");
        if (t[theta::eta] <= opt_.eta_floor) res.active_constraints.emplace_back("eta_floor");
        return res;
    }

    Theta project(Theta t) const {
        t[theta::x] = box_.x.clamp(t[theta::x]);
        t[theta::y] = box_.y.clamp(t[theta::y]);
        t[theta::eta] = std::max(t[theta::eta], opt_.eta_floor);
        return t;
    }

private:
    void normal_equations(const Theta& t, Eigen::Matrix4d& a, Eigen::Vector4d& b) const {
        a.setZero();
        b.setZero();
        const double bcoef = 10.0 * t[theta::eta] / std::log(10.0);
        for (std::size_t i = 0; i < m_.positions.size(); ++i) {
            const double dx = t[theta::x] - m_.positions[i].x();
            const double dy = t[theta::y] - m_.positions[i].y();
            const double r2 = dx * dx + dy * dy;
            const double r = std::sqrt(r2);
            const double model = t[theta::p_r0] - 10.0 * t[theta::eta] * std::log10(r / opt_.r0);
            double esum = 0.0;
            for (int k = 0; k < m_.repeats; ++k) esum += m_.power(i, k) - model;
            const Eigen::Vector4d row(-bcoef * dx / r2, -bcoef * dy / r2, 1.0, -10.0 * std::log10(r / opt_.r0));
            a.noalias() += weight_ * row * row.transpose();
            b.noalias() += esum * row;
        }
    }

    const MeasurementSet& m_;
    SearchBox box_;
    LocateOptions opt_;
    double weight_;
};

}  // namespace detail

/// Least-squares calibration of (p_r0, eta) with the blind position known.
/// sigma_db is the RMS residual of the fit.
inline PropagationParams calibrate(const MeasurementSet& meas, const Vec2& blind, double r0 = 1.0) {
    detail::require_measurements(meas);
    const auto [p, eta, sd] = detail::fit_power_law(meas, blind, r0);
    if (!(eta > 0.0)) throw DomainError("calibrated path-loss exponent is not positive");
    return {p, eta, sd, r0};
}

/// Start points: box center, then the points halfway from the center to the
/// midpoints of the bottom, right, top and left sides.
inline std::vector<Vec2> default_starts(const SearchBox& box) {
    const Vec2 c = box.center();
    const std::array<Vec2, 4> mids{Vec2(c.x(), box.y.low), Vec2(box.x.high, c.y()), Vec2(c.x(), box.y.high),
                                   Vec2(box.x.low, c.y())};
    std::vector<Vec2> out{c};
    for (const Vec2& m : mids) out.push_back(0.5 * (c + m));
    return out;
}

/// Bound-constrained least-squares estimate of θ = [x, y, p_r0, eta] under
/// independent equal-variance noise. Without `init`, runs every default
/// start with (p_r0, eta) warm-started by a fit at the start position and
/// keeps the lowest objective (first start wins ties).
inline EstimateResult locate(const MeasurementSet& meas, const SearchBox& box, const LocateOptions& opt = {},
                             std::optional<Theta> init = std::nullopt) {
    detail::require_measurements(meas);
    if (meas.size() < 4) throw DegenerateError("need at least four measurements");
    detail::require_non_collinear(meas.positions);

    const detail::LevenbergSolver solver(meas, box, opt);
    if (init) {
        const Theta& t = *init;
        if (!box.contains(t[theta::x], t[theta::y]) || !(t[theta::eta] > 0.0)) {
            throw ConfigError("initial estimate violates the search constraints");
        }
        return solver.solve(t);
    }

    const auto starts = default_starts(box);
    std::optional<EstimateResult> best;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        double p = 0.0;
        double eta = 2.0;
        try {
            const auto fit = detail::fit_power_law(meas, starts[s], opt.r0);
            p = fit[0];
            eta = fit[1];
        } catch (const Error&) {
            p = detail::position_means(meas).mean();
        }
        if (!(eta > opt.eta_floor)) eta = std::max(opt.eta_floor, 1.0);
        EstimateResult r = solver.solve(Theta(starts[s].x(), starts[s].y(), p, eta));
        r.start_index = static_cast<int>(s);
        if (!best || r.objective_value < best->objective_value) best = std::move(r);
    }
    return *best;
}

/// V(θ) as minimized by locate.
inline double objective(const MeasurementSet& meas, const Theta& t, const LocateOptions& opt = {}) {
    return detail::LevenbergSolver(meas, SearchBox{}, opt).objective(t);
}

}  // namespace rsslim
