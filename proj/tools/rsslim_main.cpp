#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "rsslim/app.hpp"

namespace {

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const rsslim::ParseError*>(&e)) return "parse";
    if (dynamic_cast<const rsslim::ConfigError*>(&e)) return "config";
    if (dynamic_cast<const rsslim::FarFieldError*>(&e)) return "far_field";
    if (dynamic_cast<const rsslim::DomainError*>(&e)) return "domain";
    if (dynamic_cast<const rsslim::RankDeficiencyError*>(&e)) return "rank_deficiency";
    if (dynamic_cast<const rsslim::DegenerateError*>(&e)) return "degenerate";
    if (dynamic_cast<const rsslim::ConvergenceError*>(&e)) return "convergence";
    return "internal";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RSS localization bounds and simulation toolkit"};
    app.set_version_flag("--version", std::string(rsslim::kToolVersion));

    rsslim::RunRequest req;
    std::optional<std::string> seed, density, kernel, chi, runs, repeats;
    app.add_option("command", req.command, "simulate | calibrate | locate | crlb-curve | mc-study | corr-analyze | spectrum")
        ->required()
        ->check(CLI::IsMember(rsslim::commands()));
    app.add_option("--config", req.config_path, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--out", req.out_dir, "output directory")->capture_default_str();
    app.add_option("--input", req.input, "measurement CSV (calibrate, locate, corr-analyze) or corr.csv (spectrum)");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--density", density, "samples per wavelength");
    app.add_option("--kernel", kernel, "independent | sinc2 | exponential");
    app.add_option("--chi", chi, "exponential correlation length [m]");
    app.add_option("--runs", runs, "Monte Carlo runs");
    app.add_option("--repeats", repeats, "measurements per position");
    app.add_flag("--verbose", req.verbose, "also write per-run Monte Carlo estimates");

    CLI11_PARSE(app, argc, argv);

    const std::pair<const char*, const std::optional<std::string>*> flags[] = {
        {"seed", &seed}, {"density_per_lambda", &density}, {"correlation", &kernel},
        {"chi_m", &chi}, {"runs", &runs},                  {"repeats", &repeats}};
    for (const auto& [key, value] : flags)
        if (*value) req.overrides.emplace_back(key, **value);

    try {
        const rsslim::RunManifest m = rsslim::run(req);
        for (const auto& f : m.outputs) std::cout << f << '\n';
        return 0;
    } catch (const std::exception& e) {
        nlohmann::ordered_json j{{"status", "error"}, {"command", req.command}, {"kind", error_kind(e)},
                                 {"message", e.what()}};
        if (const auto* pe = dynamic_cast<const rsslim::ParseError*>(&e)) {
            j["line"] = pe->line();
            j["column"] = pe->column();
        }
        std::cerr << j.dump() << '\n';
        return 2;
    }
}
