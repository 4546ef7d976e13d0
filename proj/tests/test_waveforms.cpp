#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fluxtrace/errors.hpp"
#include "fluxtrace/rng.hpp"
#include "fluxtrace/waveforms.hpp"

using namespace fluxtrace;
using namespace fluxtrace::waveforms;
using doctest::Approx;

namespace {

// Amplitude of a sinusoid in a sampled record by lock-in projection.
double tone_amplitude(const std::vector<double>& x, double rate, double freq,
                      std::size_t lo, std::size_t hi) {
    double c = 0.0, s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        double t = static_cast<double>(i) / rate;
        c += x[i] * std::cos(kTwoPi * freq * t);
        s += x[i] * std::sin(kTwoPi * freq * t);
    }
    double n = static_cast<double>(hi - lo);
    return 2.0 * std::sqrt(c * c + s * s) / n;
}

ExpSettlingModel random_invertible_model(Rng& rng, double sample_rate) {
    for (;;) {
        int n = 1 + static_cast<int>(rng.uniform() * 3.0);
        std::vector<SettlingTerm> terms;
        double budget = 0.85;
        for (int i = 0; i < n; ++i) {
            double tau = std::pow(10.0, rng.uniform(-0.3, 2.0)); // 0.5 .. 100 ns
            double a = rng.uniform(-0.4, 0.55);
            if (std::abs(a) > budget) a = (a < 0 ? -1 : 1) * budget;
            budget -= std::abs(a);
            terms.push_back({a, tau});
        }
        try {
            ExpSettlingModel m(terms);
            if (detail::settling_invertible(m, sample_rate)) return m;
        } catch (const ConfigError&) {
        }
    }
}

} // namespace

TEST_CASE("make_step levels and timing") {
    auto wf = make_step(0.08, 0.31, 100.0, 200.0, {});
    REQUIRE(wf.samples.size() == 200);
    CHECK(wf.samples[99] == 0.08);
    CHECK(wf.samples[100] == 0.31);
    CHECK(wf.samples.front() == 0.08);
    CHECK(wf.samples.back() == 0.31);

    auto flat = make_step(0.2, 0.2, 50.0, 100.0, {});
    CHECK(*std::min_element(flat.samples.begin(), flat.samples.end()) == 0.2);
    CHECK(*std::max_element(flat.samples.begin(), flat.samples.end()) == 0.2);

    CHECK_THROWS_AS(make_step(0.0, 0.6, 50.0, 100.0, {}), ConfigError);
    CHECK_THROWS_AS(make_step(0.0, 0.3, 100.0, 50.0, {}), ConfigError);
}

TEST_CASE("gaussian lowpass rise time") {
    WaveformConfig cfg;
    cfg.awg_rate = 8e9; // fine sampling so the 10-90 crossing interpolates well
    auto wf = make_step(0.0, 0.3, 40.0, 120.0, cfg);
    auto out = gaussian_lowpass(wf, 220e6);

    // 10-90% rise of a Gaussian filter is ~0.34/fc.
    double lo = 0.1 * 0.3, hi = 0.9 * 0.3;
    double t10 = 0, t90 = 0;
    for (std::size_t i = 1; i < out.samples.size(); ++i) {
        if (out.samples[i - 1] < lo && out.samples[i] >= lo)
            t10 = out.time_ns(i - 1) +
                  out.dt_ns() * (lo - out.samples[i - 1]) /
                      (out.samples[i] - out.samples[i - 1]);
        if (out.samples[i - 1] < hi && out.samples[i] >= hi)
            t90 = out.time_ns(i - 1) +
                  out.dt_ns() * (hi - out.samples[i - 1]) /
                      (out.samples[i] - out.samples[i - 1]);
    }
    double rise = t90 - t10;
    CHECK(rise == Approx(0.34 / 220e6 * 1e9).epsilon(0.10));
}

TEST_CASE("gaussian lowpass attenuation at cutoff is -3 dB") {
    for (double rate : {1e9, 4e9}) {
        double cutoff = 220e6;
        FluxWaveform wf;
        wf.sample_rate = rate;
        std::size_t n = 4096;
        wf.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            wf.samples[i] = 0.1 * std::sin(kTwoPi * cutoff * i / rate);
        auto out = gaussian_lowpass(wf, cutoff);
        double a_in = tone_amplitude(wf.samples, rate, cutoff, n / 4, 3 * n / 4);
        double a_out = tone_amplitude(out.samples, rate, cutoff, n / 4, 3 * n / 4);
        CHECK(a_out / a_in == Approx(1.0 / std::sqrt(2.0)).epsilon(0.01));
    }
}

TEST_CASE("gaussian lowpass DC gain and monotone steps") {
    // Constant input passes through untouched.
    FluxWaveform flat;
    flat.sample_rate = 1e9;
    flat.samples.assign(64, 0.123456789);
    auto out = gaussian_lowpass(flat, 220e6);
    for (double v : out.samples) CHECK(v == Approx(0.123456789).epsilon(1e-14));

    // Never overshoots and preserves monotonicity on 100 random inputs.
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        FluxWaveform wf;
        wf.sample_rate = 1e9;
        double level = -0.3;
        for (int i = 0; i < 80; ++i) {
            level += rng.uniform() * 0.008;
            wf.samples.push_back(level);
        }
        auto filtered = gaussian_lowpass(wf, 100e6 + 300e6 * rng.uniform());
        double lo = wf.samples.front(), hi = wf.samples.back();
        for (std::size_t i = 0; i < filtered.samples.size(); ++i) {
            CHECK(filtered.samples[i] >= lo - 1e-12);
            CHECK(filtered.samples[i] <= hi + 1e-12);
            if (i > 0) CHECK(filtered.samples[i] >= filtered.samples[i - 1] - 1e-12);
        }
    }

    CHECK_THROWS_AS(gaussian_lowpass(flat, 0.6e9), ConfigError);
}

TEST_CASE("apply_settling matches the closed-form step response exactly") {
    auto model = ExpSettlingModel::baseline_apparatus();
    // Unit step built directly; the filter is agnostic to flux ranges.
    FluxWaveform wf;
    wf.sample_rate = 1e9;
    wf.samples.assign(512, 1.0);
    std::fill(wf.samples.begin(), wf.samples.begin() + 64, 0.0);
    auto out = apply_settling(wf, model);

    // First post-edge sample is 1 - sum(alpha) = 0.47.
    CHECK(out.samples[64] == Approx(0.47).epsilon(1e-12));
    // ... and every sample afterwards equals A(t) to better than 1e-6.
    for (std::size_t i = 64; i < out.samples.size(); ++i) {
        double t = out.time_ns(i) - 64.0;
        CHECK(std::abs(out.samples[i] - model.step_response(t)) < 1e-9);
    }
    CHECK(out.samples.back() == Approx(1.0).epsilon(1e-3));

    // Single term at t = tau: 1 - alpha/e.
    ExpSettlingModel one({{0.2, 5.0}});
    FluxWaveform step1;
    step1.sample_rate = 1e9;
    step1.samples.assign(60, 1.0);
    std::fill(step1.samples.begin(), step1.samples.begin() + 10, 0.0);
    auto out1 = apply_settling(step1, one);
    CHECK(out1.samples[15] == Approx(1.0 - 0.2 / std::exp(1.0)).epsilon(1e-12));

    // Empty model is the identity.
    ExpSettlingModel none;
    auto same = apply_settling(wf, none);
    CHECK(same.samples == wf.samples);
}

TEST_CASE("apply_settling is linear") {
    Rng rng(11);
    auto model = ExpSettlingModel({{0.3, 2.0}, {0.1, 20.0}});
    FluxWaveform x, y;
    x.sample_rate = y.sample_rate = 1e9;
    for (int i = 0; i < 200; ++i) {
        x.samples.push_back(rng.uniform(-0.4, 0.4));
        y.samples.push_back(rng.uniform(-0.4, 0.4));
    }
    double a = 0.37, b = -1.21;
    FluxWaveform mix = x;
    for (int i = 0; i < 200; ++i) mix.samples[i] = a * x.samples[i] + b * y.samples[i];

    auto fx = apply_settling(x, model);
    auto fy = apply_settling(y, model);
    auto fmix = apply_settling(mix, model);
    for (int i = 0; i < 200; ++i) {
        double expect = a * fx.samples[i] + b * fy.samples[i];
        CHECK(fmix.samples[i] == Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("predistortion inverts the settling filter") {
    WaveformConfig cfg;
    auto model = ExpSettlingModel::baseline_apparatus();
    auto step = make_step(0.08, 0.31, 50.0, 400.0, cfg);

    auto compensated = apply_settling(predistort(step, model), model);
    double amp = 0.31 - 0.08;
    for (std::size_t i = 2; i < step.samples.size(); ++i)
        CHECK(std::abs(compensated.samples[i] - step.samples[i]) < 1e-3 * amp);

    // Tight round trip on 100 random invertible models.
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        auto m = random_invertible_model(rng, 1e9);
        FluxWaveform wf;
        wf.sample_rate = 1e9;
        for (int i = 0; i < 120; ++i) wf.samples.push_back(rng.uniform(-0.3, 0.3));
        auto round = apply_settling(predistort(wf, m), m);
        for (std::size_t i = 2; i < wf.samples.size(); ++i)
            CHECK(round.samples[i] ==
                  Approx(wf.samples[i]).epsilon(1e-6).scale(std::max(
                      1e-3, std::abs(wf.samples[i]))));
    }

    // Empty model is the identity.
    ExpSettlingModel none;
    CHECK(predistort(step, none).samples == step.samples);
}

TEST_CASE("predistorted step overshoots by alpha/(1-alpha)") {
    ExpSettlingModel one({{0.48, 0.73}});
    auto step = make_step(0.0, 0.2, 20.0, 100.0, {});
    auto pre = predistort(step, one);
    double overshoot = (pre.samples[20] - 0.2) / 0.2;
    CHECK(overshoot == Approx(0.48 / (1.0 - 0.48)).epsilon(1e-9));
}

TEST_CASE("unstable inverse is rejected") {
    // Large amplitude with tau shorter than the sample interval pushes a
    // zero of the discretized filter outside the unit circle.
    ExpSettlingModel harsh({{0.85, 0.35}});
    auto step = make_step(0.0, 0.2, 20.0, 100.0, {});
    CHECK_THROWS_AS(predistort(step, harsh), ModelError);
    // The forward filter itself stays usable.
    CHECK_NOTHROW(apply_settling(step, harsh));
}

TEST_CASE("settling model validation") {
    CHECK_THROWS_AS(ExpSettlingModel({{0.6, 1.0}, {0.5, 10.0}}), ConfigError);
    CHECK_THROWS_AS(ExpSettlingModel({{0.2, -1.0}}), ConfigError);
    CHECK_THROWS_AS(
        ExpSettlingModel({{0.1, 1.0}, {0.1, 2.0}, {0.1, 3.0}, {0.1, 4.0}}),
        ConfigError);

    // Constructor sorts by ascending tau.
    ExpSettlingModel m({{0.01, 53.5}, {0.48, 0.73}, {0.04, 7.9}});
    CHECK(m.terms[0].tau_ns == Approx(0.73));
    CHECK(m.terms[2].tau_ns == Approx(53.5));
}

TEST_CASE("current to flux conversion") {
    WaveformConfig cfg;
    cfg.mutual_inductance = 1.5e-12; // 1.5 pH coupling
    // One flux quantum needs Phi0 / M of bias current.
    double i_phi0 = kFluxQuantum / cfg.mutual_inductance;
    CHECK(current_to_flux(i_phi0, cfg) == Approx(1.0).epsilon(1e-12));
    CHECK(current_to_flux(0.5e-3, cfg) == Approx(1.5e-12 * 0.5e-3 / kFluxQuantum));

    WaveformConfig unset;
    CHECK_THROWS_AS(current_to_flux(1e-3, unset), ConfigError);
}

TEST_CASE("angle sweep family") {
    auto params = circuit::CircuitParams::designed();
    WaveformConfig cfg;

    auto family = angle_sweep_family(params, 16, 0.08, 180.0, cfg);
    REQUIRE(family.size() == 16);

    std::vector<double> initial_angles;
    for (const auto& wf : family) {
        CHECK(wf.samples.back() == Approx(0.08));
        initial_angles.push_back(circuit::reflection_angle(wf.samples.front(), params));
    }
    auto [mn, mx] = std::minmax_element(initial_angles.begin(), initial_angles.end());
    CHECK(*mx - *mn >= 180.0);

    // Distinct initial fluxes.
    for (std::size_t i = 1; i < family.size(); ++i)
        CHECK(family[i].samples.front() != family[i - 1].samples.front());

    auto single = angle_sweep_family(params, 1, 0.08, 180.0, cfg);
    REQUIRE(single.size() == 1);
    CHECK(circuit::reflection_angle(single[0].samples.front(), params).value ==
          Approx(circuit::reflection_angle(0.0, params).value));

    // Only ~200 degrees are reachable within the clamp.
    CHECK_THROWS_AS(angle_sweep_family(params, 16, 0.08, 300.0, cfg), ModelError);
}
