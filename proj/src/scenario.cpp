#include "fluxtrace/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fluxtrace/errors.hpp"
#include "fluxtrace/rng.hpp"
#include "fluxtrace/svgplot.hpp"
#include "fluxtrace/tracefile.hpp"

namespace fluxtrace::scenario {

namespace {

Scenario make_builtin(const std::string& name, const std::string& notes,
                      waveforms::ExpSettlingModel settling,
                      std::optional<waveforms::SettlingTerm> package) {
    Scenario sc;
    sc.name = name;
    sc.notes = notes;
    sc.settling = std::move(settling);
    sc.package_settling = package;
    return sc;
}

std::string fmt(double v, int prec = 6) {
    std::ostringstream ss;
    ss.precision(prec);
    ss << v;
    return ss.str();
}

} // namespace

void Scenario::validate() const {
    if (name.empty()) throw ConfigError("scenario name must not be empty");
    circuit.validate();
    settling.validate();
    if (package_settling && !(package_settling->tau_ns > 0.0))
        throw ConfigError("package settling tau must be > 0");
    if (reflection) reflection->validate();
    noise.validate();
    if (std::abs(step_start) > 0.5 || std::abs(step_end) > 0.5)
        throw ConfigError("scenario step levels must be within +-0.5 Phi0");
}

const std::vector<Scenario>& library() {
    static const std::vector<Scenario> lib = [] {
        using waveforms::ExpSettlingModel;
        std::vector<Scenario> v;
        v.push_back(make_builtin(
            "machined-aluminum",
            "machined aluminum box, normal-metal center traces",
            ExpSettlingModel::baseline_apparatus(), std::nullopt));
        v.push_back(make_builtin(
            "al-pcb-2layer", "two-layer aluminum-plated copper PCB",
            ExpSettlingModel({{0.48, 0.73}, {0.045, 7.9}, {0.01, 53.5}}), std::nullopt));
        v.push_back(make_builtin(
            "al-pcb-3layer", "three-layer aluminum-plated copper PCB",
            ExpSettlingModel({{0.48, 0.73}, {0.035, 7.9}, {0.01, 53.5}}), std::nullopt));
        v.push_back(make_builtin(
            "short-bias-line",
            "normal-metal PCB with the short symmetric on-chip bias line",
            ExpSettlingModel({{0.48, 0.73}, {0.04, 7.9}, {0.012, 53.5}}), std::nullopt));
        v.push_back(make_builtin(
            "cu-via-pcb", "aluminum-plated PCB with copper vias",
            ExpSettlingModel::baseline_apparatus(),
            waveforms::SettlingTerm{5e-3, 100e3 /* 100 us */}));
        v.push_back(make_builtin(
            "gold-cu-pcb", "two-layer gold-plated copper PCB",
            ExpSettlingModel::baseline_apparatus(),
            waveforms::SettlingTerm{0.2, 1e6 /* 1 ms */}));
        return v;
    }();
    return lib;
}

const Scenario& find(const std::string& name) {
    for (const auto& sc : library())
        if (sc.name == name) return sc;
    throw ConfigError("unknown scenario '" + name + "'");
}

waveforms::FluxWaveform apply_scenario_settling(const Scenario& sc,
                                                const waveforms::FluxWaveform& wf) {
    auto out = waveforms::apply_settling(wf, sc.settling);
    if (sc.package_settling) {
        waveforms::ExpSettlingModel pkg({*sc.package_settling});
        out = waveforms::apply_settling(out, pkg);
    }
    return out;
}

RunResult run_scenario(const Scenario& sc, const std::string& out_dir,
                       const RunOptions& opts) {
    sc.validate();
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    RunResult result;
    result.name = sc.name;

    // ---- Short path: settling fit at full generator resolution -------
    // The scenario's settling model is the distortion as it appears in a
    // fitted step response, so the fit path injects it into an ideal step
    // and measures it back through the transducer.
    const double edge_ns = 100.0;
    const double short_dur_ns = 500.0;
    waveforms::WaveformConfig wcfg;
    auto step = waveforms::make_step(sc.step_start, sc.step_end, edge_ns,
                                     short_dur_ns, wcfg);
    auto distorted = apply_scenario_settling(sc, step);
    auto schedule = signalchain::angle_schedule(distorted, sc.circuit);
    if (sc.reflection) schedule = signalchain::bounce_series(schedule, *sc.reflection);

    // Per-trace phase offsets (source/AWG jitter plus any extra phase
    // noise), averaged exactly as the instrument would.
    double omega_deg_per_s = sc.circuit.probe_freq * 360.0;
    std::vector<signalchain::PhaseTrace> traces(opts.n_averages, schedule);
    for (std::size_t k = 0; k < opts.n_averages; ++k) {
        Rng rng = Rng::for_trace(opts.seed, k);
        double off = 0.0;
        if (sc.noise.jitter_pkpk > 0.0)
            off += omega_deg_per_s *
                   rng.uniform(-0.5 * sc.noise.jitter_pkpk, 0.5 * sc.noise.jitter_pkpk);
        if (sc.noise.extra_phase_noise_deg > 0.0)
            off += rng.gauss(0.0, sc.noise.extra_phase_noise_deg);
        for (double& v : traces[k].phase_deg) v += off;
    }
    auto averaged = signalchain::average_traces(traces);

    // Back to flux through the calibration curve, then fit. The residual
    // homodyne offset left by averaging is estimated on the pre-edge
    // segment against the known starting angle.
    estimators::CalibrationFit identity_fit;
    identity_fit.params = sc.circuit;
    std::vector<double> flux_rec(averaged.phase_deg.size());
    double pre_mean = 0.0;
    std::size_t n_pre = 0;
    for (std::size_t i = 0; i < averaged.phase_deg.size(); ++i) {
        if (averaged.t0_ns + i / averaged.sample_rate * 1e9 >= edge_ns - 5.0) break;
        pre_mean += averaged.phase_deg[i];
        ++n_pre;
    }
    pre_mean /= static_cast<double>(std::max<std::size_t>(n_pre, 1));
    double mean_off = pre_mean - circuit::reflection_angle(sc.step_start, sc.circuit);
    for (std::size_t i = 0; i < flux_rec.size(); ++i)
        flux_rec[i] = estimators::invert_calibration(averaged.phase_deg[i] - mean_off,
                                                     identity_fit);
    result.settling_fit = estimators::select_model_order(
        flux_rec, averaged.sample_rate, averaged.t0_ns, edge_ns);

    // ---- Long path: hardware-demodulated classification --------------
    // The analog demodulator digitizes at a low rate; its output is the
    // angle schedule at that rate with the digitizer's DC-settling
    // artifact on top. Synthesizing half a millisecond of carrier to
    // arrive at the same samples would add nothing here.
    const double long_pre_us = 20.0;
    const double long_dur_us = long_pre_us + opts.horizon_us * 1.02;
    auto long_step = waveforms::make_step(sc.step_start, sc.step_end,
                                          long_pre_us * 1e3, long_dur_us * 1e3, wcfg);
    auto long_dist = apply_scenario_settling(sc, long_step);
    auto long_sched = signalchain::angle_schedule(long_dist, sc.circuit);

    auto stride = static_cast<std::size_t>(
        std::llround(long_sched.sample_rate / opts.scope_rate));
    stride = std::max<std::size_t>(stride, 1);
    signalchain::PhaseTrace long_trace;
    long_trace.sample_rate = long_sched.sample_rate / static_cast<double>(stride);
    long_trace.t0_ns = long_sched.t0_ns;
    for (std::size_t i = 0; i < long_sched.phase_deg.size(); i += stride)
        long_trace.phase_deg.push_back(long_sched.phase_deg[i]);

    signalchain::ScopeModel scope;
    if (scope.dc_settle_amp != 0.0) {
        waveforms::ExpSettlingModel artifact(
            {{scope.dc_settle_amp, scope.dc_settle_tau_ns}});
        std::vector<double> settled(long_trace.phase_deg.size());
        waveforms::detail::apply_settling_series(
            artifact, long_trace.sample_rate, long_trace.phase_deg.data(),
            settled.data(), long_trace.phase_deg.size(), false);
        long_trace.phase_deg = std::move(settled);
    }

    estimators::ClassifyOptions copts;
    copts.horizon_us = opts.horizon_us;
    result.package = estimators::classify_package(long_trace, copts);

    // ---- Artifacts ----------------------------------------------------
    auto out_path = [&](const std::string& leaf) {
        return (fs::path(out_dir) / leaf).string();
    };

    if (opts.write_traces) {
        waveforms::FluxWaveform rec;
        rec.sample_rate = averaged.sample_rate;
        rec.t0_ns = averaged.t0_ns;
        rec.samples = flux_rec;
        auto table = io::from_flux_waveform(rec);
        table.scenario = sc.name;
        table.seed = opts.seed;
        io::save_trace(table, out_path("step_flux.csv"));
        result.artifacts.push_back("step_flux.csv");

        auto long_table = io::from_phase_trace(long_trace);
        long_table.scenario = sc.name;
        long_table.seed = opts.seed;
        io::save_trace(long_table, out_path("longstep_phase.csv"));
        result.artifacts.push_back("longstep_phase.csv");
    }

    if (opts.emit_plots) {
        // Normalized short step with the fitted model overlay.
        double base = flux_rec.front();
        double fin = flux_rec.back();
        plot::Series meas{"measured", {}, {}};
        plot::Series fitc{"fit", {}, {}};
        for (std::size_t i = 0; i < flux_rec.size(); ++i) {
            double t = averaged.t0_ns + i / averaged.sample_rate * 1e9 - edge_ns;
            if (t < -20.0) continue;
            meas.x.push_back(t);
            meas.y.push_back((flux_rec[i] - base) / (fin - base));
            fitc.x.push_back(t);
            fitc.y.push_back(t < 0.0 ? 0.0 : result.settling_fit.model.step_response(t));
        }
        plot::PlotOptions po;
        po.title = "Step response: " + sc.name;
        plot::emit_plot({meas, fitc}, plot::PlotKind::Step, out_path("step.svg"), po);
        result.artifacts.push_back("step.svg");
    }

    std::ostringstream rep;
    rep << "scenario: " << sc.name << "\n";
    rep << "notes: " << sc.notes << "\n";
    rep << "seed: " << opts.seed << "\n";
    rep << "class: " << estimators::to_string(result.package.cls) << "\n";
    rep << "late_settling: " << fmt(result.package.late_settling) << "\n";
    rep << "fit_n_terms: " << result.settling_fit.n_terms << "\n";
    for (std::size_t i = 0; i < result.settling_fit.model.terms.size(); ++i) {
        rep << "alpha" << i << ": " << fmt(result.settling_fit.model.terms[i].alpha)
            << "\n";
        rep << "tau" << i << "_ns: " << fmt(result.settling_fit.model.terms[i].tau_ns)
            << "\n";
    }
    rep << "fit_residual_rms: " << fmt(result.settling_fit.residual_rms) << "\n";
    result.report_text = rep.str();

    std::ofstream repf(out_path("report.txt"), std::ios::binary);
    if (!repf) throw DataError("cannot write scenario report");
    repf << result.report_text;
    result.artifacts.push_back("report.txt");

    return result;
}

} // namespace fluxtrace::scenario
