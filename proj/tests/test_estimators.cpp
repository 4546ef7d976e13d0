#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fluxtrace/circuit.hpp"
#include "fluxtrace/errors.hpp"
#include "fluxtrace/estimators.hpp"
#include "fluxtrace/rng.hpp"
#include "fluxtrace/waveforms.hpp"

using namespace fluxtrace;
using namespace fluxtrace::estimators;
using doctest::Approx;

namespace {

std::pair<std::vector<double>, std::vector<double>> synthetic_calibration(
    const circuit::CircuitParams& truth, double noise_deg, Rng& rng,
    double span = 0.38, int n = 64) {
    std::vector<double> flux, phase;
    for (int i = 0; i < n; ++i) {
        double f = -span + 2.0 * span * i / (n - 1);
        flux.push_back(f);
        phase.push_back(circuit::reflection_angle(f, truth) + rng.gauss(0.0, noise_deg));
    }
    return {flux, phase};
}

signalchain::PhaseTrace long_step_with_model(
    const waveforms::ExpSettlingModel& fast,
    const waveforms::SettlingTerm* package, double rate, double pre_us,
    double total_us) {
    waveforms::FluxWaveform wf;
    wf.sample_rate = rate;
    auto n = static_cast<std::size_t>(total_us * 1e-6 * rate);
    wf.samples.assign(n, 1.0);
    auto edge = static_cast<std::size_t>(pre_us * 1e-6 * rate);
    std::fill(wf.samples.begin(), wf.samples.begin() + edge, 0.0);
    auto out = waveforms::apply_settling(wf, fast);
    if (package) {
        waveforms::ExpSettlingModel pkg({*package});
        out = waveforms::apply_settling(out, pkg);
    }
    signalchain::PhaseTrace tr;
    tr.sample_rate = rate;
    tr.phase_deg = out.samples;
    return tr;
}

} // namespace

TEST_CASE("calibration fit recovers the measured device from designed start") {
    auto truth = circuit::CircuitParams::fitted();
    auto init = circuit::CircuitParams::designed();
    Rng rng(31);
    auto [flux, phase] = synthetic_calibration(truth, 0.25, rng);

    auto fit = fit_calibration(flux, phase, 6.4e9, init);
    CHECK(fit.params.ic_total == Approx(truth.ic_total).epsilon(0.02));
    CHECK(fit.params.z0 == Approx(truth.z0).epsilon(0.02));
    CHECK(fit.params.c_shunt == Approx(truth.c_shunt).epsilon(0.02));
    CHECK(fit.residual_rms_deg < 0.3);
    CHECK(fit.n_used == 64);
}

TEST_CASE("noiseless calibration data fits to numerical precision") {
    auto truth = circuit::CircuitParams::fitted();
    Rng rng(1);
    auto [flux, phase] = synthetic_calibration(truth, 0.0, rng);
    auto fit = fit_calibration(flux, phase, 6.4e9, circuit::CircuitParams::designed());
    CHECK(fit.residual_rms_deg < 1e-6);
}

TEST_CASE("points beyond the exclusion threshold are dropped") {
    auto truth = circuit::CircuitParams::fitted();
    Rng rng(5);
    auto [flux, phase] = synthetic_calibration(truth, 0.25, rng);

    // Add wild points outside |0.38| that do not follow the model.
    auto flux2 = flux;
    auto phase2 = phase;
    for (double f : {0.40, 0.43, -0.41, -0.45}) {
        flux2.push_back(f);
        phase2.push_back(-150.0); // nonlinear-regime junk
    }
    auto clean = fit_calibration(flux, phase, 6.4e9, circuit::CircuitParams::designed());
    auto mixed = fit_calibration(flux2, phase2, 6.4e9, circuit::CircuitParams::designed());
    CHECK(mixed.n_excluded == 4);
    CHECK(mixed.params.ic_total == Approx(clean.params.ic_total).epsilon(1e-9));
    CHECK(mixed.params.c_shunt == Approx(clean.params.c_shunt).epsilon(1e-9));
}

TEST_CASE("calibration fit rejects degenerate data") {
    auto init = circuit::CircuitParams::designed();
    std::vector<double> flux(10, 0.1), phase(10, 50.0);
    CHECK_THROWS_AS(fit_calibration(flux, phase, 6.4e9, init), DataError);

    std::vector<double> few = {0.0, 0.1, 0.26};
    std::vector<double> fph = {120.0, 110.0, 70.0};
    CHECK_THROWS_AS(fit_calibration(few, fph, 6.4e9, init), DataError);
}

TEST_CASE("calibration recovery property over random devices") {
    // A single-frequency angle sweep pins two parameter combinations;
    // with the transformer impedance gauge-fixed, the recoverable pair
    // (ic, C) comes back within 5% over +-30% draws.
    auto init = circuit::CircuitParams::designed();
    Rng rng(997);
    for (int trial = 0; trial < 50; ++trial) {
        auto truth = circuit::CircuitParams::designed();
        truth.ic_total *= rng.uniform(0.7, 1.3);
        truth.c_shunt *= rng.uniform(0.7, 1.3);
        auto [flux, phase] = synthetic_calibration(truth, 0.25, rng);
        auto fit = fit_calibration(flux, phase, 6.4e9, init);
        CHECK(fit.params.ic_total == Approx(truth.ic_total).epsilon(0.05));
        CHECK(fit.params.c_shunt == Approx(truth.c_shunt).epsilon(0.05));
    }
}

TEST_CASE("calibration inversion") {
    auto params = circuit::CircuitParams::fitted();
    CalibrationFit fit;
    fit.params = params;

    SUBCASE("inverse of the forward curve on 1000 branch points") {
        for (int i = 0; i <= 1000; ++i) {
            double f = 0.38 * i / 1000.0;
            double ph = circuit::reflection_angle(f, params);
            CHECK(std::abs(invert_calibration(ph, fit) - f) < 1e-6);
        }
    }

    SUBCASE("round trip at the sensitive point") {
        double ph = circuit::reflection_angle(0.31, params);
        CHECK(invert_calibration(ph, fit) == Approx(0.31).epsilon(1e-6));
    }

    SUBCASE("noise converts through the local gain") {
        double ph = circuit::reflection_angle(0.31, params) + 0.25;
        double err = std::abs(invert_calibration(ph, fit) - 0.31);
        CHECK(err == Approx(2.1e-4).epsilon(0.25));
    }

    SUBCASE("phases beyond the branch are rejected") {
        double top = circuit::reflection_angle(0.0, params);
        CHECK_THROWS_AS(invert_calibration(top + 5.0, fit), ModelError);
        double bottom = circuit::reflection_angle(params.flux_clamp, params);
        CHECK_THROWS_AS(invert_calibration(bottom - 5.0, fit), ModelError);
    }

    SUBCASE("a fitted offset is removed before inversion") {
        CalibrationFit offset_fit;
        offset_fit.params = params;
        offset_fit.offset_deg = 33.0;
        double ph = circuit::reflection_angle(0.2, params) + 33.0;
        CHECK(invert_calibration(ph, offset_fit) == Approx(0.2).epsilon(1e-9));
    }
}

TEST_CASE("settling fit recovers the injected model") {
    auto model = waveforms::ExpSettlingModel::baseline_apparatus();
    auto step = waveforms::make_step(0.08, 0.31, 100.0, 500.0, {});
    auto dist = waveforms::apply_settling(step, model);
    Rng rng(7);
    for (auto& v : dist.samples) v += rng.gauss(0.0, 2e-4);

    auto fit = fit_settling(dist, 100.0, 3);
    REQUIRE(fit.n_terms == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(fit.model.terms[i].alpha - model.terms[i].alpha) < 0.01);
        CHECK(fit.model.terms[i].tau_ns ==
              Approx(model.terms[i].tau_ns).epsilon(0.10));
    }
    CHECK_FALSE(fit.degenerate);
    CHECK(fit.step_amplitude == Approx(0.23).epsilon(0.01));
}

TEST_CASE("single-term settling fit round trip") {
    waveforms::ExpSettlingModel single({{0.2, 10.0}});
    auto step = waveforms::make_step(0.0, 0.25, 80.0, 400.0, {});
    auto dist = waveforms::apply_settling(step, single);
    Rng rng(13);
    for (auto& v : dist.samples) v += rng.gauss(0.0, 1e-4);

    auto fit = fit_settling(dist, 80.0, 1);
    CHECK(fit.model.terms[0].alpha == Approx(0.2).epsilon(0.02));
    CHECK(fit.model.terms[0].tau_ns == Approx(10.0).epsilon(0.05));
}

TEST_CASE("an undistorted step fits with negligible amplitudes") {
    auto step = waveforms::make_step(0.0, 0.25, 80.0, 400.0, {});
    Rng rng(17);
    for (auto& v : step.samples) v += rng.gauss(0.0, 2e-4);
    auto fit = fit_settling(step, 80.0, 1);
    CHECK(std::abs(fit.model.terms[0].alpha) < 5e-3);
}

TEST_CASE("settling fit is invariant to offset and scale") {
    auto model = waveforms::ExpSettlingModel::baseline_apparatus();
    auto step = waveforms::make_step(0.08, 0.31, 100.0, 500.0, {});
    auto dist = waveforms::apply_settling(step, model);
    Rng rng(7);
    for (auto& v : dist.samples) v += rng.gauss(0.0, 2e-4);

    auto base = fit_settling(dist, 100.0, 3);
    auto scaled = dist;
    for (auto& v : scaled.samples) v = 5.5 * v + 20.0;
    auto again = fit_settling(scaled, 100.0, 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(again.model.terms[i].alpha ==
              Approx(base.model.terms[i].alpha).epsilon(1e-6));
        CHECK(again.model.terms[i].tau_ns ==
              Approx(base.model.terms[i].tau_ns).epsilon(1e-6));
    }
}

TEST_CASE("model order selection") {
    Rng rng(7);
    auto step = waveforms::make_step(0.08, 0.31, 100.0, 500.0, {});

    SUBCASE("three-term data selects three terms") {
        auto dist = waveforms::apply_settling(
            step, waveforms::ExpSettlingModel::baseline_apparatus());
        for (auto& v : dist.samples) v += rng.gauss(0.0, 2e-4);
        auto pick = select_model_order(dist.samples, dist.sample_rate, 0.0, 100.0);
        CHECK(pick.n_terms == 3);
    }

    SUBCASE("single-term data selects one term") {
        waveforms::ExpSettlingModel single({{0.2, 10.0}});
        auto dist = waveforms::apply_settling(step, single);
        for (auto& v : dist.samples) v += rng.gauss(0.0, 2e-4);
        auto pick = select_model_order(dist.samples, dist.sample_rate, 0.0, 100.0);
        CHECK(pick.n_terms == 1);
        CHECK(pick.model.terms[0].alpha == Approx(0.2).epsilon(0.05));
    }

    SUBCASE("noise around a clean step selects one near-zero term") {
        auto clean = step;
        for (auto& v : clean.samples) v += rng.gauss(0.0, 2e-4);
        auto pick = select_model_order(clean.samples, clean.sample_rate, 0.0, 100.0);
        CHECK(pick.n_terms == 1);
        CHECK(std::abs(pick.model.terms[0].alpha) < 5e-3);
    }

    SUBCASE("selected model never carries near-coincident time constants") {
        for (uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
            Rng r2(seed);
            waveforms::ExpSettlingModel m(
                {{0.3, r2.uniform(1.0, 4.0)}, {0.05, r2.uniform(20.0, 80.0)}});
            auto dist = waveforms::apply_settling(step, m);
            for (auto& v : dist.samples) v += r2.gauss(0.0, 2e-4);
            auto pick = select_model_order(dist.samples, dist.sample_rate, 0.0, 100.0);
            for (std::size_t i = 1; i < pick.model.terms.size(); ++i)
                CHECK(pick.model.terms[i].tau_ns / pick.model.terms[i - 1].tau_ns >=
                      1.2);
        }
    }
}

TEST_CASE("package classification") {
    auto fig_model = waveforms::ExpSettlingModel::baseline_apparatus();
    const double rate = 50e6;

    SUBCASE("fast-settling package is good") {
        auto tr = long_step_with_model(fig_model, nullptr, rate, 20.0, 540.0);
        auto rep = classify_package(tr);
        CHECK(rep.cls == PackageClass::Good);
        CHECK(rep.late_settling < 2e-3);
    }

    SUBCASE("0.5% settling over 100 us is bad") {
        waveforms::SettlingTerm pkg{5e-3, 100e3};
        auto tr = long_step_with_model(fig_model, &pkg, rate, 20.0, 540.0);
        auto rep = classify_package(tr);
        CHECK(rep.cls == PackageClass::Bad);
        CHECK(rep.late_settling == Approx(5e-3).epsilon(0.05));
    }

    SUBCASE("20% settling over a millisecond is very bad") {
        waveforms::SettlingTerm pkg{0.2, 1e6};
        auto tr = long_step_with_model(fig_model, &pkg, rate, 20.0, 540.0);
        auto rep = classify_package(tr);
        CHECK(rep.cls == PackageClass::VeryBad);
        CHECK(rep.late_settling > 5e-2);
    }

    SUBCASE("short records are rejected") {
        auto tr = long_step_with_model(fig_model, nullptr, rate, 20.0, 120.0);
        CHECK_THROWS_AS(classify_package(tr), DataError);
    }
}
