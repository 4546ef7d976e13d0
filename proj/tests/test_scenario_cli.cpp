#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fluxtrace/config.hpp"
#include "fluxtrace/errors.hpp"
#include "fluxtrace/scenario.hpp"
#include "fluxtrace/tracefile.hpp"

using namespace fluxtrace;
using doctest::Approx;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("fluxtrace_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& leaf) const { return (path / leaf).string(); }
};

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(FLUXTRACE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

} // namespace

TEST_CASE("built-in scenario library") {
    const auto& lib = scenario::library();
    REQUIRE(lib.size() == 6);
    CHECK_NOTHROW(scenario::find("machined-aluminum"));
    CHECK_NOTHROW(scenario::find("gold-cu-pcb"));
    CHECK_THROWS_AS(scenario::find("teflon-box"), ConfigError);
    for (const auto& sc : lib) CHECK_NOTHROW(sc.validate());
}

TEST_CASE("scenario classifications match the package groups") {
    scenario::RunOptions opts;
    opts.seed = 7;
    opts.emit_plots = false;
    opts.write_traces = false;
    TempDir tmp("scen_cls");

    auto cls = [&](const std::string& name) {
        auto res = scenario::run_scenario(scenario::find(name), tmp.file(name), opts);
        return res.package.cls;
    };
    CHECK(cls("machined-aluminum") == estimators::PackageClass::Good);
    CHECK(cls("al-pcb-2layer") == estimators::PackageClass::Good);
    CHECK(cls("al-pcb-3layer") == estimators::PackageClass::Good);
    CHECK(cls("short-bias-line") == estimators::PackageClass::Good);
    CHECK(cls("cu-via-pcb") == estimators::PackageClass::Bad);
    CHECK(cls("gold-cu-pcb") == estimators::PackageClass::VeryBad);
}

TEST_CASE("baseline scenario reproduces its settling fit") {
    TempDir tmp("scen_fit");
    scenario::RunOptions opts;
    opts.seed = 7;
    auto res = scenario::run_scenario(scenario::find("machined-aluminum"),
                                      tmp.file("out"), opts);
    REQUIRE(res.settling_fit.n_terms == 3);
    const auto& t = res.settling_fit.model.terms;
    CHECK(std::abs(t[0].alpha - 0.48) < 0.01);
    CHECK(std::abs(t[1].alpha - 0.04) < 0.01);
    CHECK(std::abs(t[2].alpha - 0.01) < 0.01);
    CHECK(t[0].tau_ns == Approx(0.73).epsilon(0.10));
    CHECK(t[1].tau_ns == Approx(7.9).epsilon(0.10));
    CHECK(t[2].tau_ns == Approx(53.5).epsilon(0.10));

    // The bundle lands on disk.
    CHECK(fs::exists(tmp.file("out/report.txt")));
    CHECK(fs::exists(tmp.file("out/step_flux.csv")));
    CHECK(fs::exists(tmp.file("out/longstep_phase.csv")));
    CHECK(fs::exists(tmp.file("out/step.svg")));
    CHECK(res.report_text.find("class: good") != std::string::npos);
}

TEST_CASE("a scenario with no settling distortion fits flat") {
    TempDir tmp("scen_flat");
    scenario::Scenario sc = scenario::find("machined-aluminum");
    sc.name = "ideal";
    sc.settling = waveforms::ExpSettlingModel{};
    sc.package_settling.reset();
    scenario::RunOptions opts;
    opts.seed = 3;
    opts.emit_plots = false;
    opts.write_traces = false;
    auto res = scenario::run_scenario(sc, tmp.file("out"), opts);
    CHECK(res.package.cls == estimators::PackageClass::Good);
    // The response is already the ideal step: every fitted amplitude is
    // negligible.
    for (const auto& t : res.settling_fit.model.terms)
        CHECK(std::abs(t.alpha) < 1e-3);
}

TEST_CASE("scenario runs are deterministic for a fixed seed") {
    TempDir tmp("scen_det");
    scenario::RunOptions opts;
    opts.seed = 99;
    scenario::run_scenario(scenario::find("cu-via-pcb"), tmp.file("a"), opts);
    scenario::run_scenario(scenario::find("cu-via-pcb"), tmp.file("b"), opts);
    CHECK(slurp(tmp.file("a/report.txt")) == slurp(tmp.file("b/report.txt")));
    CHECK(slurp(tmp.file("a/step_flux.csv")) == slurp(tmp.file("b/step_flux.csv")));
    CHECK(slurp(tmp.file("a/step.svg")) == slurp(tmp.file("b/step.svg")));

    scenario::RunOptions other = opts;
    other.seed = 100;
    scenario::run_scenario(scenario::find("cu-via-pcb"), tmp.file("c"), other);
    CHECK(slurp(tmp.file("a/step_flux.csv")) != slurp(tmp.file("c/step_flux.csv")));
}

TEST_CASE("config parsing and validation") {
    auto cfg = config::Config::parse(
        "# device\n"
        "circuit.ic_per_junction_ua = 1.8\n"
        "circuit.z0_ohm: 14.8\n"
        "circuit.c_shunt_pf = 3.8\n"
        "noise.jitter_ps = 20\n");
    auto params = config::circuit_from(cfg);
    CHECK(params.ic_total == Approx(3.6e-6));
    CHECK(params.z0 == Approx(14.8));
    CHECK(params.c_shunt == Approx(3.8e-12));
    auto noise = config::noise_from(cfg);
    CHECK(noise.jitter_pkpk == Approx(20e-12));

    // Invalid values name the key or field.
    auto bad = config::Config::parse("circuit.c_shunt_pf = -4\n");
    try {
        config::circuit_from(bad);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("c_shunt") != std::string::npos);
    }
    CHECK_THROWS_AS(config::Config::parse("just some words\n"), ConfigError);
    CHECK_THROWS_AS(
        config::circuit_from(config::Config::parse("circuit.probe_ghz = abc\n")),
        ConfigError);

    // Both current conventions cannot be mixed.
    auto both = config::Config::parse(
        "circuit.ic_total_ua = 4\ncircuit.ic_per_junction_ua = 2\n");
    CHECK_THROWS_AS(config::circuit_from(both), ConfigError);
}

TEST_CASE("cli: model sweep, plots, determinism") {
    TempDir tmp("cli_model");
    std::string csv = tmp.file("cal.csv");
    std::string svg = tmp.file("cal.svg");
    int rc = run_cli("model --what calibration --points 101 --out " + csv +
                     " --svg " + svg);
    REQUIRE(rc == 0);
    REQUIRE(fs::exists(csv));
    REQUIRE(fs::exists(svg));

    std::string csv2 = tmp.file("cal2.csv");
    std::string svg2 = tmp.file("cal2.svg");
    rc = run_cli("model --what calibration --points 101 --out " + csv2 + " --svg " +
                 svg2);
    REQUIRE(rc == 0);
    CHECK(slurp(csv) == slurp(csv2));
    CHECK(slurp(svg) == slurp(svg2));

    // The sweep table feeds straight back into the calibration fitter.
    std::string rep = tmp.file("calfit.txt");
    rc = run_cli("fit-cal --in " + csv + " --report " + rep);
    REQUIRE(rc == 0);
    CHECK(slurp(rep).find("ic_total_ua: 4") != std::string::npos);
}

TEST_CASE("cli: simulate then fit a settling step") {
    TempDir tmp("cli_fit");
    std::string flux_csv = tmp.file("step.csv");
    // Distort with a single known term and fit it back through the CLI.
    int rc = run_cli(
        "simulate --start 0.0 --end 0.25 --edge-ns 80 --duration-ns 400 "
        "--no-shape --set settling.alpha0=0.2 --set settling.tau0_ns=10 "
        "--out-flux " + flux_csv);
    REQUIRE(rc == 0);
    REQUIRE(fs::exists(flux_csv));

    std::string report = tmp.file("fit.txt");
    rc = run_cli("fit-step --in " + flux_csv + " --edge-ns 80 --terms 1 --report " +
                 report);
    REQUIRE(rc == 0);
    auto rep = slurp(report);
    CHECK(rep.find("alpha0: 0.2") != std::string::npos);
    CHECK(rep.find("tau0_ns: 10") != std::string::npos);
}

TEST_CASE("cli: scenario subcommand and exit codes") {
    TempDir tmp("cli_scen");
    int rc = run_cli("scenario machined-aluminum --seed 5 --out " + tmp.file("out"));
    CHECK(rc == 0);
    CHECK(fs::exists(tmp.file("out/report.txt")));

    // Unknown scenario is a config error.
    CHECK(run_cli("scenario unknown-package --out " + tmp.file("x")) == 2);

    // Malformed trace data is a data error.
    std::ofstream bad(tmp.file("bad.csv"));
    bad << "not a trace\n";
    bad.close();
    CHECK(run_cli("fit-step --in " + tmp.file("bad.csv") + " --edge-ns 10") == 3);

    // Listing works.
    CHECK(run_cli("scenario --list") == 0);
}

TEST_CASE("cli: reflect-scan reports a bounded reflector") {
    TempDir tmp("cli_scan");
    std::string report = tmp.file("scan.txt");
    int rc = run_cli(
        "reflect-scan --family-n 16 --span-deg 180 --final-flux 0.08 "
        "--set reflection.amp_db=-30 --set reflection.delay_ns=2.5 "
        "--set awg.rate_gsps=4 --report " + report +
        " --out " + tmp.file("scan.csv") + " --svg " + tmp.file("scan.svg"));
    REQUIRE(rc == 0);
    auto rep = slurp(report);
    CHECK(rep.find("max_spread_deg:") != std::string::npos);
    CHECK(rep.find("distance_ns:") != std::string::npos);
    CHECK(fs::exists(tmp.file("scan.svg")));

    // Scan without a configured reflector is a config error.
    CHECK(run_cli("reflect-scan --report " + tmp.file("none.txt")) == 2);
}
