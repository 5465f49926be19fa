#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "rsslim/analysis.hpp"
#include "rsslim/bounds.hpp"
#include "rsslim/errors.hpp"
#include "rsslim/estimator.hpp"
#include "rsslim/noisegen.hpp"

namespace rsslim::csv {

inline constexpr std::string_view kMeasurementHeader = "x_m,y_m,repeat,power_dbm";
inline constexpr std::string_view kLocateHeader = "x_mle_m,y_mle_m,p_r0_dbm,eta,objective,converged";
inline constexpr std::string_view kCalibrationHeader = "p_r0_dbm,eta,sigma_db";
inline constexpr std::string_view kCrlbHeader =
    "density_per_lambda,n,n_eff,rmse_indep_m,rmse_corr_m,rmse_bienayme_m,degenerate";
inline constexpr std::string_view kCovarianceHeader = "sep_m,covariance_db2,correlation,count";
inline constexpr std::string_view kSpectrumHeader = "k_rad_per_m,power_norm";
inline constexpr std::string_view kMonteCarloHeader = "runs,bias_m,rmse_m,efficiency_gap_m,crlb_m";
inline constexpr std::string_view kRunsHeader = "run,x_mle_m,y_mle_m,p_r0_dbm,eta,objective,converged";

/// Shortest decimal that round-trips; empty for NaN (absent value).
inline std::string num(double v) { return std::isnan(v) ? std::string() : fmt::format("{}", v); }

/// Largest |power_dbm| accepted on ingestion.
inline constexpr double kMaxAbsPower = 200.0;

inline void write_measurements(std::ostream& out, const MeasurementSet& m) {
    out << kMeasurementHeader << '\n';
    for (std::size_t i = 0; i < m.positions.size(); ++i)
        for (int r = 0; r < m.repeats; ++r)
            out << num(m.positions[i].x()) << ',' << num(m.positions[i].y()) << ',' << r << ','
                << num(m.power(i, r)) << '\n';
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

/// 1-based column of field `index` within `line`.
inline std::size_t column_of(const std::vector<std::string_view>& fields, std::size_t index) {
    std::size_t col = 1;
    for (std::size_t f = 0; f < index; ++f) col += fields[f].size() + 1;
    return col;
}

template <typename T>
T parse_field(const std::vector<std::string_view>& fields, std::size_t index, std::size_t line,
              std::string_view name) {
    T value{};
    const std::string_view f = fields[index];
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
    if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError(line, column_of(fields, index), "invalid " + std::string(name) + " '" + std::string(f) + "'");
    }
    return value;
}

inline std::string_view strip_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

}  // namespace detail

/// Parses a measurement CSV. Positions are deduplicated in order of first
/// appearance; every position must carry repeats 0..R-1 exactly once.
inline MeasurementSet read_measurements(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || detail::strip_cr(line) != kMeasurementHeader) {
        throw ParseError(1, 1, "expected header '" + std::string(kMeasurementHeader) + "'");
    }

    std::vector<Vec2> positions;
    std::map<std::pair<double, double>, std::size_t> index;
    std::vector<std::map<int, double>> by_position;
    std::size_t number = 1;
    while (std::getline(in, line)) {
        ++number;
        const std::string_view l = detail::strip_cr(line);
        if (l.empty()) continue;
        const auto fields = detail::split(l);
        if (fields.size() != 4) {
            throw ParseError(number, 1, "expected 4 fields, found " + std::to_string(fields.size()));
        }
        const double x = detail::parse_field<double>(fields, 0, number, "x_m");
        const double y = detail::parse_field<double>(fields, 1, number, "y_m");
        const int repeat = detail::parse_field<int>(fields, 2, number, "repeat");
        const double power = detail::parse_field<double>(fields, 3, number, "power_dbm");
        if (!std::isfinite(x) || !std::isfinite(y)) throw ParseError(number, 1, "non-finite position");
        if (repeat < 0) throw ParseError(number, detail::column_of(fields, 2), "negative repeat index");
        if (!std::isfinite(power) || std::abs(power) > kMaxAbsPower) {
            throw DomainError("line " + std::to_string(number) + ": power_dbm " + std::string(fields[3]) +
                              " fails the |P| <= 200 dBm unit check");
        }
        const auto key = std::make_pair(x, y);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, positions.size()).first;
            positions.emplace_back(x, y);
            by_position.emplace_back();
        }
        if (!by_position[it->second].emplace(repeat, power).second) {
            throw ParseError(number, detail::column_of(fields, 2), "duplicate repeat index for this position");
        }
    }
    if (positions.empty()) throw DegenerateError("measurement file contains no rows");

    const std::size_t repeats = by_position.front().size();
    MeasurementSet m;
    m.positions = std::move(positions);
    m.repeats = static_cast<int>(repeats);
    m.powers.reserve(m.positions.size() * repeats);
    for (std::size_t i = 0; i < by_position.size(); ++i) {
        const auto& reps = by_position[i];
        if (reps.size() != repeats || reps.rbegin()->first != static_cast<int>(repeats) - 1) {
            throw ConfigError("position " + std::to_string(i) + " does not carry repeats 0.." +
                              std::to_string(repeats - 1));
        }
        for (const auto& [r, p] : reps) m.powers.push_back(p);
    }
    return m;
}

inline MeasurementSet read_measurements_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open measurement file '" + path + "'");
    return read_measurements(in);
}

inline void write_locate(std::ostream& out, const EstimateResult& e) {
    out << kLocateHeader << '\n'
        << num(e.x_mle) << ',' << num(e.y_mle) << ',' << num(e.p_r0_mle) << ',' << num(e.eta_mle) << ','
        << num(e.objective_value) << ',' << (e.converged ? 1 : 0) << '\n';
}

inline void write_calibration(std::ostream& out, const PropagationParams& p) {
    out << kCalibrationHeader << '\n' << num(p.p_r0) << ',' << num(p.eta) << ',' << num(p.sigma_db) << '\n';
}

inline void write_crlb_curve(std::ostream& out, const std::vector<BoundReport>& reports) {
    out << kCrlbHeader << '\n';
    for (const auto& r : reports) {
        out << num(r.density) << ',' << r.n << ',' << num(r.n_eff) << ',' << num(r.rmse_crlb_indep) << ','
            << (r.rmse_crlb_correlated ? num(*r.rmse_crlb_correlated) : std::string()) << ','
            << num(r.rmse_bienayme) << ',' << (r.degenerate ? 1 : 0) << '\n';
    }
}

inline void write_covariance(std::ostream& out, const CovarianceCurve& c) {
    out << kCovarianceHeader << '\n';
    for (std::size_t k = 0; k < c.size(); ++k) {
        out << num(c.bin_centers[k]) << ',' << num(c.covariance[k]) << ','
            << (c.present(k) ? num(c.correlation[k]) : std::string()) << ',' << c.counts[k] << '\n';
    }
}

/// Reads a covariance CSV back; bin width is taken from the first two rows.
inline CovarianceCurve read_covariance(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || detail::strip_cr(line) != kCovarianceHeader) {
        throw ParseError(1, 1, "expected header '" + std::string(kCovarianceHeader) + "'");
    }
    CovarianceCurve c;
    std::size_t number = 1;
    while (std::getline(in, line)) {
        ++number;
        const std::string_view l = detail::strip_cr(line);
        if (l.empty()) continue;
        const auto fields = detail::split(l);
        if (fields.size() != 4) throw ParseError(number, 1, "expected 4 fields");
        c.bin_centers.push_back(detail::parse_field<double>(fields, 0, number, "sep_m"));
        const auto count = detail::parse_field<std::size_t>(fields, 3, number, "count");
        c.counts.push_back(count);
        if (count == 0) {
            c.covariance.push_back(std::nan(""));
            c.correlation.push_back(std::nan(""));
        } else {
            c.covariance.push_back(detail::parse_field<double>(fields, 1, number, "covariance_db2"));
            c.correlation.push_back(detail::parse_field<double>(fields, 2, number, "correlation"));
        }
    }
    if (c.size() < 2) throw DegenerateError("covariance file needs at least two bins");
    c.bin_width = c.bin_centers[1] - c.bin_centers[0];
    return c;
}

inline void write_spectrum(std::ostream& out, const SpectrumCurve& s) {
    out << kSpectrumHeader << '\n';
    for (std::size_t j = 0; j < s.k_values.size(); ++j) out << num(s.k_values[j]) << ',' << num(s.power[j]) << '\n';
}

inline void write_monte_carlo(std::ostream& out, const std::vector<MonteCarloReport>& reports) {
    out << kMonteCarloHeader << '\n';
    for (const auto& r : reports) {
        out << r.runs << ',' << num(r.bias_m) << ',' << num(r.rmse_m) << ',' << num(r.efficiency_gap_m) << ','
            << num(r.crlb_reference_m) << '\n';
    }
}

inline void write_runs(std::ostream& out, const std::vector<EstimateResult>& runs) {
    out << kRunsHeader << '\n';
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto& e = runs[r];
        out << r << ',' << num(e.x_mle) << ',' << num(e.y_mle) << ',' << num(e.p_r0_mle) << ',' << num(e.eta_mle)
            << ',' << num(e.objective_value) << ',' << (e.converged ? 1 : 0) << '\n';
    }
}

}  // namespace rsslim::csv
