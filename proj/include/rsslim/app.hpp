#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsslim/analysis.hpp"
#include "rsslim/bounds.hpp"
#include "rsslim/config.hpp"
#include "rsslim/csv.hpp"
#include "rsslim/estimator.hpp"
#include "rsslim/noisegen.hpp"
#include "rsslim/plots.hpp"

namespace rsslim {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> names{"simulate", "calibrate",     "locate",  "crlb-curve",
                                                "mc-study", "corr-analyze", "spectrum"};
    return names;
}

struct RunRequest {
    std::string command;
    std::optional<std::string> config_path;
    /// Config keys set from the command line; applied after the file.
    std::vector<std::pair<std::string, std::string>> overrides;
    std::string out_dir = ".";
    std::optional<std::string> input;
    bool verbose = false;
};

struct RunManifest {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    std::vector<std::string> outputs;
};

namespace detail {

class OutputWriter {
public:
    OutputWriter(std::filesystem::path dir, RunManifest& manifest) : dir_(std::move(dir)), manifest_(manifest) {
        std::filesystem::create_directories(dir_);
    }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw ConfigError("cannot write '" + (dir_ / name).string() + "'");
        out << content;
        manifest_.outputs.push_back(name);
    }

    template <typename Fn>
    void write_with(const std::string& name, Fn&& fn) {
        std::ostringstream s;
        fn(s);
        write(name, s.str());
    }

private:
    std::filesystem::path dir_;
    RunManifest& manifest_;
};

inline nlohmann::ordered_json sidecar(const RunRequest& req, const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = req.command;
    j["tool_version"] = kToolVersion;
    j["seed"] = cfg.seed;
    j["kernel"] = std::string(to_string(cfg.kernel));
    j["correlation_length_m"] = cfg.resolved_kernel().correlation_length;
    nlohmann::ordered_json conf = nlohmann::ordered_json::object();
    std::istringstream lines(canonical(cfg));
    std::string line;
    while (std::getline(lines, line)) {
        const auto eq = line.find(" = ");
        conf[line.substr(0, eq)] = line.substr(eq + 3);
    }
    j["config"] = conf;
    return j;
}

/// Residual sets for corr-analyze / spectrum: from the input file (with
/// calibrated parameters and the configured blind position) or simulated.
inline std::vector<ResidualSet> collect_residuals(const RunRequest& req, const RunConfig& cfg) {
    const SetupConfig setup = cfg.resolved_setup();
    if (req.input) {
        const MeasurementSet m = csv::read_measurements_file(*req.input);
        const PropagationParams cal = calibrate(m, setup.blind_position, cfg.params.r0);
        return residual_sets(m, cal, setup.blind_position);
    }
    const Synthesizer syn(setup, cfg.params, cfg.resolved_kernel(), SynthesisOptions{cfg.temporal_sigma_db});
    std::vector<ResidualSet> sets(static_cast<std::size_t>(cfg.sets));
    parallel_for(sets.size(), cfg.threads, [&](std::size_t s) {
        const MeasurementSet m = syn(1, stream_seed(cfg.seed, s));
        ResidualSet r{syn.positions(), Eigen::VectorXd(static_cast<Eigen::Index>(m.size()))};
        for (std::size_t i = 0; i < m.size(); ++i)
            r.values[static_cast<Eigen::Index>(i)] = m.powers[i] - syn.mean()[static_cast<Eigen::Index>(i)];
        sets[s] = std::move(r);
    });
    return sets;
}

inline CovarianceCurve covariance_for(const RunRequest& req, const RunConfig& cfg) {
    return spatial_covariance(collect_residuals(req, cfg), cfg.resolved_bin_width(), cfg.resolved_max_sep(),
                              cfg.threads);
}

}  // namespace detail

/// Executes one command and writes its outputs plus manifest.json into
/// req.out_dir. Outputs depend only on the config, overrides and input file.
inline RunManifest run(const RunRequest& req) {
    RunConfig cfg = req.config_path ? load_config_file(*req.config_path) : RunConfig{};
    for (const auto& [k, v] : req.overrides) set_key(cfg, k, v);
    validate(cfg);

    RunManifest manifest;
    manifest.command = req.command;
    manifest.seed = cfg.seed;
    manifest.config_hash = fnv1a_hex(canonical(cfg));

    const SetupConfig setup = cfg.resolved_setup();
    const CorrelationKernel kernel = cfg.resolved_kernel();
    const auto meta = detail::sidecar(req, cfg);
    detail::OutputWriter out(req.out_dir, manifest);
    auto write_meta = [&](const std::string& csv_name, nlohmann::ordered_json extra = {}) {
        auto j = meta;
        j["file"] = csv_name;
        for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
        out.write(csv_name + ".meta.json", j.dump(2) + "\n");
    };
    auto require_input = [&] {
        if (!req.input) throw ConfigError("command '" + req.command + "' needs --input");
    };

    if (req.command == "simulate") {
        const MeasurementSet m = synthesize(setup, cfg.params, kernel, cfg.repeats, cfg.seed,
                                            SynthesisOptions{cfg.temporal_sigma_db});
        out.write_with("measurements.csv", [&](std::ostream& s) { csv::write_measurements(s, m); });
        write_meta("measurements.csv", {{"positions", m.positions.size()}, {"repeats", m.repeats}});
    } else if (req.command == "calibrate") {
        require_input();
        const MeasurementSet m = csv::read_measurements_file(*req.input);
        const PropagationParams p = calibrate(m, setup.blind_position, cfg.params.r0);
        out.write_with("calibration.csv", [&](std::ostream& s) { csv::write_calibration(s, p); });
        write_meta("calibration.csv", {{"input", *req.input}});
    } else if (req.command == "locate") {
        require_input();
        const MeasurementSet m = csv::read_measurements_file(*req.input);
        const EstimateResult e = locate(m, SearchBox::from(setup));
        out.write_with("locate.csv", [&](std::ostream& s) { csv::write_locate(s, e); });
        write_meta("locate.csv", {{"input", *req.input},
                                  {"iterations", e.iterations},
                                  {"start_index", e.start_index},
                                  {"active_constraints", e.active_constraints}});
    } else if (req.command == "crlb-curve") {
        SweepOptions opt;
        opt.full_trace = cfg.full_trace;
        opt.threads = cfg.threads;
        const auto reports = bound_sweep(setup, cfg.params, kernel, cfg.resolved_densities(), opt);
        out.write_with("crlb_curve.csv", [&](std::ostream& s) { csv::write_crlb_curve(s, reports); });
        write_meta("crlb_curve.csv", {{"full_trace", cfg.full_trace}});
        out.write("plot_crlb_curve.py", plots::crlb_curve(setup.wavelength));
    } else if (req.command == "mc-study") {
        if (cfg.runs < 100) {
            throw ConfigError("mc-study needs at least 100 runs (got " + std::to_string(cfg.runs) + ")");
        }
        MonteCarloOptions opt;
        opt.repeats = cfg.repeats;
        opt.temporal_sigma_db = cfg.temporal_sigma_db;
        opt.threads = cfg.threads;
        opt.keep_runs = req.verbose;
        const auto densities = cfg.densities.empty() ? std::vector<double>{density_of(setup)} : cfg.densities;
        std::vector<MonteCarloReport> reports;
        for (std::size_t d = 0; d < densities.size(); ++d) {
            reports.push_back(monte_carlo(setup, cfg.params, kernel, cfg.runs, densities[d],
                                          d == 0 ? cfg.seed : stream_seed(cfg.seed, 1'000'000 + d), opt));
        }
        out.write_with("mc_summary.csv", [&](std::ostream& s) { csv::write_monte_carlo(s, reports); });
        std::vector<std::size_t> ns;
        std::vector<int> nonconverged;
        for (const auto& r : reports) {
            ns.push_back(r.n);
            nonconverged.push_back(r.nonconverged);
        }
        write_meta("mc_summary.csv", {{"densities", densities}, {"n", ns}, {"nonconverged", nonconverged}});
        if (req.verbose) {
            for (std::size_t d = 0; d < reports.size(); ++d) {
                const std::string name = densities.size() == 1 ? "mc_runs.csv" : fmt::format("mc_runs_{}.csv", d);
                out.write_with(name, [&](std::ostream& s) { csv::write_runs(s, reports[d].estimates); });
            }
        }
        out.write("plot_mc_study.py", plots::monte_carlo(setup.wavelength));
    } else if (req.command == "corr-analyze") {
        const CovarianceCurve curve = detail::covariance_for(req, cfg);
        out.write_with("corr.csv", [&](std::ostream& s) { csv::write_covariance(s, curve); });
        nlohmann::ordered_json extra{{"first_minimum_m", first_minimum(curve)}};
        if (req.input) extra["input"] = *req.input;
        write_meta("corr.csv", extra);
        out.write("plot_corr.py", plots::covariance(setup.wavelength));
    } else if (req.command == "spectrum") {
        CovarianceCurve curve;
        if (req.input) {
            std::ifstream in(*req.input);
            if (!in) throw ConfigError("cannot open '" + *req.input + "'");
            curve = csv::read_covariance(in);
        } else {
            curve = detail::covariance_for(req, cfg);
        }
        const SpectrumCurve s = spatial_spectrum(curve, setup.wavelength);
        const double cutoff = 2.0 * setup.wavenumber();
        out.write_with("spectrum.csv", [&](std::ostream& o) { csv::write_spectrum(o, s); });
        write_meta("spectrum.csv", {{"cutoff_k_rad_per_m", cutoff},
                                    {"fraction_below_cutoff", spectral_fraction_below(s, cutoff)}});
        out.write("plot_spectrum.py", plots::spectrum(setup.wavelength));
    } else {
        throw ConfigError("unknown command '" + req.command + "'");
    }

    nlohmann::ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = manifest.command;
    j["config_hash"] = manifest.config_hash;
    j["seed"] = manifest.seed;
    j["tool_version"] = manifest.tool_version;
    auto outputs = manifest.outputs;
    outputs.push_back("manifest.json");
    j["outputs"] = outputs;
    manifest.outputs = outputs;
    std::ofstream mf(std::filesystem::path(req.out_dir) / "manifest.json", std::ios::binary);
    mf << j.dump(2) << "\n";
    return manifest;
}

}  // namespace rsslim
