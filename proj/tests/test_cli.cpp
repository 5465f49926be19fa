#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rsslim/app.hpp"

using namespace rsslim;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("rsslim_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Exec {
    int status;
    std::string err;
};

Exec run_cli(const std::string& args, const fs::path& dir) {
    const fs::path err = dir / "stderr.txt";
    const std::string cmd =
        std::string(RSSLIM_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " + err.string();
    const int rc = std::system(cmd.c_str());
    return {WEXITSTATUS(rc), slurp(err)};
}

RunRequest request(const std::string& command, const fs::path& out,
                   std::vector<std::pair<std::string, std::string>> overrides = {}) {
    RunRequest r;
    r.command = command;
    r.out_dir = out.string();
    r.overrides = std::move(overrides);
    return r;
}

}  // namespace

TEST(Measurements, CsvRoundTrip) {
    const MeasurementSet m = synthesize(with_density(SetupConfig{}, 2.0), PropagationParams{},
                                        CorrelationKernel::diffraction(0.125), 3, 4, SynthesisOptions{0.3});
    std::stringstream s;
    csv::write_measurements(s, m);
    const MeasurementSet back = csv::read_measurements(s);
    EXPECT_EQ(back.positions, m.positions);
    EXPECT_EQ(back.powers, m.powers);
    EXPECT_EQ(back.repeats, m.repeats);
}

TEST(Measurements, HeaderOnlyIsEmptySet) {
    std::istringstream s("x_m,y_m,repeat,power_dbm\n");
    EXPECT_THROW(csv::read_measurements(s), DegenerateError);
}

TEST(Measurements, NonNumericPowerNamesLineTwo) {
    std::istringstream s("x_m,y_m,repeat,power_dbm\n1.0,0.0,0,abc\n");
    try {
        csv::read_measurements(s);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_EQ(e.column(), 11u);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(Measurements, RejectsMalformedFiles) {
    std::istringstream bad_header("x,y,r,p\n1,0,0,-10\n");
    EXPECT_THROW(csv::read_measurements(bad_header), ParseError);
    std::istringstream fields("x_m,y_m,repeat,power_dbm\n1,0,0\n");
    EXPECT_THROW(csv::read_measurements(fields), ParseError);
    std::istringstream units("x_m,y_m,repeat,power_dbm\n1,0,0,-10\n0,1,0,-250\n");
    EXPECT_THROW(csv::read_measurements(units), DomainError);
    std::istringstream ragged("x_m,y_m,repeat,power_dbm\n1,0,0,-10\n1,0,1,-11\n0,1,0,-12\n");
    EXPECT_THROW(csv::read_measurements(ragged), ConfigError);
    std::istringstream dup("x_m,y_m,repeat,power_dbm\n1,0,0,-10\n1,0,0,-11\n");
    EXPECT_THROW(csv::read_measurements(dup), ParseError);
}

TEST(Measurements, PositionsDeduplicatedInFileOrder) {
    std::istringstream s("x_m,y_m,repeat,power_dbm\n2,1,0,-10\n-1,0,0,-11\n2,1,1,-12\n-1,0,1,-13\n");
    const MeasurementSet m = csv::read_measurements(s);
    ASSERT_EQ(m.positions.size(), 2u);
    EXPECT_EQ(m.positions[0], Vec2(2, 1));
    EXPECT_EQ(m.repeats, 2);
    EXPECT_EQ(m.power(0, 1), -12);
    EXPECT_EQ(m.power(1, 0), -11);
}

TEST(Config, ParsesKeysAndComments) {
    std::istringstream s("# experiment\nseed = 42\ncorrelation = exponential  # kernel\nchi_m=0.1\n\n"
                         "densities = 0.5, 1, 2\nfull_trace = true\n");
    RunConfig c;
    load_config(c, s);
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.kernel, KernelKind::exponential);
    EXPECT_DOUBLE_EQ(c.resolved_kernel().correlation_length, 0.1);
    EXPECT_EQ(c.densities, (std::vector<double>{0.5, 1, 2}));
    EXPECT_TRUE(c.full_trace);
}

TEST(Config, UnknownKeyIsHardError) {
    std::istringstream s("seed = 1\nwavelenght_m = 0.1\n");
    RunConfig c;
    try {
        load_config(c, s);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("wavelenght_m"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    std::istringstream no_eq("seed 1\n");
    EXPECT_THROW(load_config(c, no_eq), ParseError);
    EXPECT_THROW(set_key(c, "runs", "many"), ConfigError);
}

TEST(Config, CanonicalDigestTracksContent) {
    RunConfig a;
    RunConfig b;
    b.threads = 7;
    EXPECT_EQ(fnv1a_hex(canonical(a)), fnv1a_hex(canonical(b)));
    b.seed = 2;
    EXPECT_NE(fnv1a_hex(canonical(a)), fnv1a_hex(canonical(b)));
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(Run, SimulateTwiceIsByteIdentical) {
    const auto a = fresh_dir("sim_a");
    const auto b = fresh_dir("sim_b");
    const std::vector<std::pair<std::string, std::string>> o{{"seed", "5"}, {"density_per_lambda", "2"},
                                                              {"repeats", "2"}};
    const RunManifest ma = run(request("simulate", a, o));
    const RunManifest mb = run(request("simulate", b, o));
    EXPECT_EQ(ma.config_hash, mb.config_hash);
    ASSERT_EQ(ma.outputs, mb.outputs);
    for (const auto& f : ma.outputs) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    const MeasurementSet m = csv::read_measurements_file((a / "measurements.csv").string());
    EXPECT_EQ(m.positions.size(), 192u);
    EXPECT_EQ(m.repeats, 2);
}

TEST(Run, ManifestAndSidecars) {
    const auto d = fresh_dir("manifest");
    const RunManifest m = run(request("simulate", d, {{"density_per_lambda", "1"}}));
    const auto j = nlohmann::json::parse(slurp(d / "manifest.json"));
    EXPECT_EQ(j["command"], "simulate");
    EXPECT_EQ(j["config_hash"], m.config_hash);
    EXPECT_EQ(j["tool_version"], kToolVersion);
    for (const auto& f : j["outputs"]) EXPECT_TRUE(fs::exists(d / f.get<std::string>())) << f;
    for (const auto& e : fs::directory_iterator(d)) {
        const auto name = e.path().filename().string();
        EXPECT_NE(std::find(m.outputs.begin(), m.outputs.end(), name), m.outputs.end()) << name;
    }
    const auto meta = nlohmann::json::parse(slurp(d / "measurements.csv.meta.json"));
    EXPECT_EQ(meta["schema_version"], kSchemaVersion);
    EXPECT_EQ(meta["kernel"], "sinc2");
    EXPECT_EQ(meta["seed"], 1);
}

TEST(Run, CalibrateAndLocateFromFile) {
    const auto d = fresh_dir("pipeline");
    run(request("simulate", d, {{"density_per_lambda", "4"}, {"sigma_db", "0"}}));
    RunRequest cal = request("calibrate", d);
    cal.input = (d / "measurements.csv").string();
    run(cal);
    std::istringstream c(slurp(d / "calibration.csv"));
    std::string header, row;
    std::getline(c, header);
    std::getline(c, row);
    EXPECT_EQ(header, csv::kCalibrationHeader);
    EXPECT_EQ(row.substr(0, 5), "-16.7");

    RunRequest loc = request("locate", d);
    loc.input = cal.input;
    run(loc);
    std::istringstream l(slurp(d / "locate.csv"));
    std::getline(l, header);
    std::getline(l, row);
    EXPECT_EQ(header, csv::kLocateHeader);
    EXPECT_EQ(row.back(), '1');
    EXPECT_THROW(run(request("locate", d)), ConfigError);
}

TEST(Run, CrlbCurveMatchesLibrary) {
    const auto d = fresh_dir("crlb");
    run(request("crlb-curve", d, {{"densities", "0.5,2,25"}}));
    std::istringstream s(slurp(d / "crlb_curve.csv"));
    std::string line, last;
    std::getline(s, line);
    EXPECT_EQ(line, csv::kCrlbHeader);
    int rows = 0;
    while (std::getline(s, line)) {
        last = line;
        ++rows;
    }
    EXPECT_EQ(rows, 3);
    const auto lib = bound_sweep(SetupConfig{}, PropagationParams{}, CorrelationKernel::diffraction(0.125), {25.0});
    std::vector<std::string> fields;
    std::stringstream fs_(last);
    for (std::string f; std::getline(fs_, f, ',');) fields.push_back(f);
    ASSERT_EQ(fields.size(), 7u);
    EXPECT_EQ(std::stod(fields[5]), lib[0].rmse_bienayme);
    EXPECT_EQ(fields[4], "");
    EXPECT_EQ(fields[6], "1");
    EXPECT_TRUE(fs::exists(d / "plot_crlb_curve.py"));
}

TEST(Run, CorrAnalyzeAndSpectrumFromFile) {
    const auto d = fresh_dir("corr");
    run(request("corr-analyze", d, {{"sets", "20"}}));
    const auto meta = nlohmann::json::parse(slurp(d / "corr.csv.meta.json"));
    EXPECT_NEAR(meta["first_minimum_m"].get<double>(), 0.0625, 0.01);
    RunRequest sp = request("spectrum", d);
    sp.input = (d / "corr.csv").string();
    run(sp);
    const auto smeta = nlohmann::json::parse(slurp(d / "spectrum.csv.meta.json"));
    EXPECT_GE(smeta["fraction_below_cutoff"].get<double>(), 0.9);
}

TEST(Cli, McStudyRefusesFewRuns) {
    const auto d = fresh_dir("cli_runs");
    const Exec e = run_cli("mc-study --runs 50 --out " + (d / "out").string(), d);
    EXPECT_NE(e.status, 0);
    const auto j = nlohmann::json::parse(e.err);
    EXPECT_EQ(j["status"], "error");
    EXPECT_EQ(j["kind"], "config");
    EXPECT_NE(j["message"].get<std::string>().find("at least 100 runs"), std::string::npos);
}

TEST(Cli, UnknownConfigKeyFails) {
    const auto d = fresh_dir("cli_key");
    std::ofstream(d / "bad.cfg") << "seed = 3\nsigma = 2\n";
    const Exec e = run_cli("simulate --config " + (d / "bad.cfg").string() + " --out " + (d / "out").string(), d);
    EXPECT_NE(e.status, 0);
    const auto j = nlohmann::json::parse(e.err);
    EXPECT_NE(j["message"].get<std::string>().find("unknown config key 'sigma'"), std::string::npos);
}

TEST(Cli, ParseErrorCarriesPosition) {
    const auto d = fresh_dir("cli_parse");
    std::ofstream(d / "m.csv") << "x_m,y_m,repeat,power_dbm\n1.0,0.0,0,abc\n";
    const Exec e = run_cli("calibrate --input " + (d / "m.csv").string() + " --out " + (d / "out").string(), d);
    EXPECT_NE(e.status, 0);
    const auto j = nlohmann::json::parse(e.err);
    EXPECT_EQ(j["kind"], "parse");
    EXPECT_EQ(j["line"], 2);
}

TEST(Cli, FlagsOverrideConfigAndRunsAreReproducible) {
    const auto d = fresh_dir("cli_flags");
    std::ofstream(d / "a.cfg") << "seed = 3\ncorrelation = independent\n";
    const std::string base = "simulate --config " + (d / "a.cfg").string() + " --seed 9 --kernel exponential --chi 0.05 "
                             "--density 1 --repeats 2 --out ";
    ASSERT_EQ(run_cli(base + (d / "x").string(), d).status, 0);
    ASSERT_EQ(run_cli(base + (d / "y").string(), d).status, 0);
    EXPECT_EQ(slurp(d / "x" / "measurements.csv"), slurp(d / "y" / "measurements.csv"));
    EXPECT_EQ(slurp(d / "x" / "manifest.json"), slurp(d / "y" / "manifest.json"));
    const auto meta = nlohmann::json::parse(slurp(d / "x" / "measurements.csv.meta.json"));
    EXPECT_EQ(meta["seed"], 9);
    EXPECT_EQ(meta["kernel"], "exponential");
    EXPECT_EQ(meta["correlation_length_m"], 0.05);
    EXPECT_EQ(meta["repeats"], 2);
}

TEST(Cli, RejectsUnknownCommand) {
    const auto d = fresh_dir("cli_cmd");
    EXPECT_NE(run_cli("explode --out " + (d / "o").string(), d).status, 0);
}
