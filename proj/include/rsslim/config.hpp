#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "rsslim/correlation.hpp"
#include "rsslim/errors.hpp"
#include "rsslim/geometry.hpp"
#include "rsslim/propagation.hpp"

namespace rsslim {

/// Everything a CLI run depends on. Loaded from a flat `key = value` file
/// (`#` starts a comment); unknown keys are rejected.
///
/// | key                | meaning                                   | default          |
/// |--------------------|-------------------------------------------|------------------|
/// | side_length_m      | side of the localization square           | 3.0              |
/// | spacing_m          | distance between perimeter positions      | 0.005            |
/// | wavelength_m       | carrier wavelength                        | 0.125            |
/// | blind_x_m/_y_m     | blind radio position                      | 0, 0             |
/// | corner_x_m/_y_m    | lower-left corner of the square           | -1, -2           |
/// | min_far_field_m    | far-field guard distance                  | 2·wavelength     |
/// | seed               | master seed                               | 1                |
/// | p_r0_dbm, eta      | model mean at 1 m, path-loss exponent     | -16.7, 3.36      |
/// | sigma_db, r0_m     | shadowing std, reference distance         | 1.68, 1.0        |
/// | correlation        | independent / sinc2 / exponential         | sinc2            |
/// | chi_m              | exponential correlation length            | wavelength/2     |
/// | repeats            | measurements per position                 | 1                |
/// | temporal_sigma_db  | extra i.i.d. noise per repeat             | 0                |
/// | runs               | Monte Carlo runs                          | 1000             |
/// | density_per_lambda | perimeter samples per wavelength          | from spacing_m   |
/// | densities          | comma list for crlb-curve / mc-study      | sweep 0.1..25    |
/// | sets               | simulated residual sets for corr-analyze  | 200              |
/// | bin_width_m        | covariance bin width                      | spacing          |
/// | max_sep_m          | largest covariance separation             | 4·wavelength     |
/// | full_trace         | bound uses √tr(F⁻¹) instead of (x, y)     | false            |
/// | threads            | worker threads, 0 = hardware              | 0                |
struct RunConfig {
    SetupConfig setup;
    Vec2 corner = Vec2(-1.0, -2.0);
    PropagationParams params;
    KernelKind kernel = KernelKind::diffraction_sinc2;
    std::optional<double> chi;
    std::uint64_t seed = 1;
    int repeats = 1;
    double temporal_sigma_db = 0.0;
    int runs = 1000;
    std::optional<double> density;
    std::vector<double> densities;
    int sets = 200;
    std::optional<double> bin_width;
    std::optional<double> max_sep;
    bool full_trace = false;
    unsigned threads = 0;

    /// Setup with bounds derived from corner + side and the density applied.
    SetupConfig resolved_setup() const {
        SetupConfig s = setup;
        s.bounds_x = {corner.x(), corner.x() + s.side_length};
        s.bounds_y = {corner.y(), corner.y() + s.side_length};
        if (density) s = with_density(s, *density);
        return s;
    }

    CorrelationKernel resolved_kernel() const {
        switch (kernel) {
            case KernelKind::independent: return CorrelationKernel::independent();
            case KernelKind::diffraction_sinc2: return CorrelationKernel::diffraction(setup.wavelength);
            case KernelKind::exponential: return CorrelationKernel::exponential(setup.wavelength, chi.value_or(0.0));
        }
        return CorrelationKernel::independent();
    }

    std::vector<double> resolved_densities() const {
        if (!densities.empty()) return densities;
        if (density) return {*density};
        return {0.1, 0.15, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 20.0, 25.0};
    }

    double resolved_bin_width() const { return bin_width.value_or(resolved_setup().spacing); }
    double resolved_max_sep() const { return max_sep.value_or(4.0 * setup.wavelength); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError("key '" + std::string(key) + "': not a number: '" + std::string(v) + "'");
    return out;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
    Int out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError("key '" + std::string(key) + "': not an integer: '" + std::string(v) + "'");
    return out;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + std::string(key) + "': not a boolean: '" + std::string(v) + "'");
}

}  // namespace detail

/// Applies one key. Throws ConfigError on unknown keys or malformed values.
inline void set_key(RunConfig& c, std::string_view key, std::string_view raw) {
    using detail::parse_double;
    const std::string_view v = detail::trim(raw);
    if (key == "side_length_m") c.setup.side_length = parse_double(key, v);
    else if (key == "spacing_m") c.setup.spacing = parse_double(key, v);
    else if (key == "wavelength_m") c.setup.wavelength = parse_double(key, v);
    else if (key == "blind_x_m") c.setup.blind_position.x() = parse_double(key, v);
    else if (key == "blind_y_m") c.setup.blind_position.y() = parse_double(key, v);
    else if (key == "corner_x_m") c.corner.x() = parse_double(key, v);
    else if (key == "corner_y_m") c.corner.y() = parse_double(key, v);
    else if (key == "min_far_field_m") c.setup.min_far_field_distance = parse_double(key, v);
    else if (key == "seed") c.seed = detail::parse_int<std::uint64_t>(key, v);
    else if (key == "p_r0_dbm") c.params.p_r0 = parse_double(key, v);
    else if (key == "eta") c.params.eta = parse_double(key, v);
    else if (key == "sigma_db") c.params.sigma_db = parse_double(key, v);
    else if (key == "r0_m") c.params.r0 = parse_double(key, v);
    else if (key == "correlation") c.kernel = parse_kernel_kind(v);
    else if (key == "chi_m") c.chi = parse_double(key, v);
    else if (key == "repeats") c.repeats = detail::parse_int<int>(key, v);
    else if (key == "temporal_sigma_db") c.temporal_sigma_db = parse_double(key, v);
    else if (key == "runs") c.runs = detail::parse_int<int>(key, v);
    else if (key == "density_per_lambda") c.density = parse_double(key, v);
    else if (key == "densities") {
        c.densities.clear();
        std::string_view rest = v;
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            c.densities.push_back(parse_double(key, detail::trim(rest.substr(0, comma))));
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
    }
    else if (key == "sets") c.sets = detail::parse_int<int>(key, v);
    else if (key == "bin_width_m") c.bin_width = parse_double(key, v);
    else if (key == "max_sep_m") c.max_sep = parse_double(key, v);
    else if (key == "full_trace") c.full_trace = detail::parse_bool(key, v);
    else if (key == "threads") c.threads = detail::parse_int<unsigned>(key, v);
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

inline void load_config(RunConfig& c, std::istream& in) {
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::string_view l = line;
        if (const auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
        l = detail::trim(l);
        if (l.empty()) continue;
        const auto eq = l.find('=');
        if (eq == std::string_view::npos) throw ParseError(number, 1, "expected 'key = value'");
        try {
            set_key(c, detail::trim(l.substr(0, eq)), l.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
        }
    }
}

inline RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    RunConfig c;
    load_config(c, in);
    return c;
}

/// Sanity checks that do not need geometry generation.
inline void validate(const RunConfig& c) {
    validate(c.resolved_setup());
    validate(c.params);
    if (c.repeats < 1) throw ConfigError("repeats must be at least 1");
    if (c.temporal_sigma_db < 0.0) throw ConfigError("temporal_sigma_db must be nonnegative");
    if (c.sets < 1) throw ConfigError("sets must be at least 1");
    if (c.chi && !(*c.chi > 0.0)) throw ConfigError("chi_m must be positive");
}

/// Canonical `key = value` listing of the resolved configuration. Stable
/// across runs; the config digest is taken over it.
inline std::string canonical(const RunConfig& c) {
    const SetupConfig s = c.resolved_setup();
    std::map<std::string, std::string> kv;
    kv["side_length_m"] = fmt::format("{}", s.side_length);
    kv["spacing_m"] = fmt::format("{}", s.spacing);
    kv["wavelength_m"] = fmt::format("{}", s.wavelength);
    kv["blind_x_m"] = fmt::format("{}", s.blind_position.x());
    kv["blind_y_m"] = fmt::format("{}", s.blind_position.y());
    kv["corner_x_m"] = fmt::format("{}", c.corner.x());
    kv["corner_y_m"] = fmt::format("{}", c.corner.y());
    kv["min_far_field_m"] = fmt::format("{}", s.far_field_guard());
    kv["seed"] = fmt::format("{}", c.seed);
    kv["p_r0_dbm"] = fmt::format("{}", c.params.p_r0);
    kv["eta"] = fmt::format("{}", c.params.eta);
    kv["sigma_db"] = fmt::format("{}", c.params.sigma_db);
    kv["r0_m"] = fmt::format("{}", c.params.r0);
    kv["correlation"] = std::string(to_string(c.kernel));
    kv["chi_m"] = fmt::format("{}", c.resolved_kernel().correlation_length);
    kv["repeats"] = fmt::format("{}", c.repeats);
    kv["temporal_sigma_db"] = fmt::format("{}", c.temporal_sigma_db);
    kv["runs"] = fmt::format("{}", c.runs);
    kv["density_per_lambda"] = fmt::format("{}", density_of(s));
    std::string ds;
    for (double d : c.resolved_densities()) ds += (ds.empty() ? "" : ",") + fmt::format("{}", d);
    kv["densities"] = ds;
    kv["sets"] = fmt::format("{}", c.sets);
    kv["bin_width_m"] = fmt::format("{}", c.resolved_bin_width());
    kv["max_sep_m"] = fmt::format("{}", c.resolved_max_sep());
    kv["full_trace"] = c.full_trace ? "true" : "false";
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return fmt::format("{:016x}", h);
}

}  // namespace rsslim
