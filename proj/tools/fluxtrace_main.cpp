// fluxtrace: simulate and analyze a flux-to-microwave-phase transducer
// measurement chain from the command line.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 fit non-convergence.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fluxtrace/circuit.hpp"
#include "fluxtrace/config.hpp"
#include "fluxtrace/errors.hpp"
#include "fluxtrace/estimators.hpp"
#include "fluxtrace/scenario.hpp"
#include "fluxtrace/signalchain.hpp"
#include "fluxtrace/svgplot.hpp"
#include "fluxtrace/tracefile.hpp"
#include "fluxtrace/waveforms.hpp"

namespace ft = fluxtrace;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides; // key=value pairs
};

ft::config::Config build_config(const CommonArgs& args) {
    ft::config::Config cfg;
    if (!args.config_path.empty()) cfg = ft::config::Config::load(args.config_path);
    for (const auto& kv : args.overrides) {
        auto sep = kv.find('=');
        if (sep == std::string::npos)
            throw ft::ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, sep), kv.substr(sep + 1));
    }
    return cfg;
}

void add_common(CLI::App* app, CommonArgs& args) {
    app->add_option("--config", args.config_path,
                    "config file (resolved against FLUXTRACE_CONFIG_DIR)");
    app->add_option("--set", args.overrides, "override a config key (key=value)")
        ->take_all();
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ft::DataError("cannot open " + path + " for writing");
    out << text;
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(9);
    ss << v;
    return ss.str();
}

// ---- model: calibration / gain / sensitivity sweeps ---------------------

int cmd_model(const CommonArgs& common, const std::string& what, double fmin,
              double fmax, int points, const std::string& out_csv,
              const std::string& out_svg, double noise_deg) {
    auto cfg = build_config(common);
    auto params = ft::config::circuit_from(cfg);
    if (points < 2) throw ft::ConfigError("need at least 2 sweep points");

    std::vector<double> flux(points), value(points);
    for (int i = 0; i < points; ++i) {
        flux[i] = fmin + (fmax - fmin) * i / (points - 1);
        if (what == "calibration")
            value[i] = ft::circuit::reflection_angle(flux[i], params);
        else if (what == "gain")
            value[i] = ft::circuit::transducer_gain(flux[i], params);
        else if (what == "sensitivity")
            value[i] = ft::circuit::flux_sensitivity(flux[i], params, noise_deg);
        else
            throw ft::ConfigError("unknown sweep '" + what + "'");
    }

    if (!out_csv.empty()) {
        // Sweep tables carry the flux axis as a column (the time column
        // is just the point index), so fit-cal can read them back.
        ft::io::TraceTable t;
        t.sample_rate = 1e9;
        t.columns = {"flux_phi0", what == "calibration" ? "phase_deg"
                                  : what == "gain"      ? "gain_deg_per_phi0"
                                                        : "sensitivity_phi0"};
        t.data = {flux, value};
        ft::io::save_trace(t, out_csv);
    }
    if (!out_svg.empty()) {
        ft::plot::Series s{what, flux, value};
        ft::plot::PlotKind kind = what == "calibration" ? ft::plot::PlotKind::Calibration
                                  : what == "gain"      ? ft::plot::PlotKind::Gain
                                                        : ft::plot::PlotKind::Sensitivity;
        ft::plot::PlotOptions po;
        po.log_y = (what == "sensitivity");
        ft::plot::emit_plot({s}, kind, out_svg, po);
    }

    std::cout << "sweep: " << what << "\n";
    std::cout << "points: " << points << "\n";
    std::cout << "bandwidth_ghz: " << fmt(ft::circuit::bandwidth(params) / 1e9) << "\n";
    std::cout << "max_resonance_ghz: "
              << fmt(ft::circuit::resonant_frequency(0.0, params) / 1e9) << "\n";
    return 0;
}

// ---- simulate: step waveform -> distortion -> optional RF record ---------

int cmd_simulate(const CommonArgs& common, double start, double end, double edge_ns,
                 double duration_ns, bool predist, bool shape,
                 const std::string& out_flux, const std::string& out_rf,
                 double rf_rate_gsps, double rf_window_ns) {
    auto cfg = build_config(common);
    auto params = ft::config::circuit_from(cfg);
    auto wcfg = ft::config::waveform_from(cfg);
    auto noise = ft::config::noise_from(cfg);
    auto refl = ft::config::reflection_from(cfg);

    ft::waveforms::ExpSettlingModel model;
    if (cfg.has("settling.alpha0")) {
        std::vector<ft::waveforms::SettlingTerm> terms;
        for (int i = 0; i < 3; ++i) {
            std::string a = "settling.alpha" + std::to_string(i);
            std::string t = "settling.tau" + std::to_string(i) + "_ns";
            if (!cfg.has(a)) break;
            terms.push_back({cfg.get_double(a, 0.0), cfg.get_double(t, 1.0)});
        }
        model = ft::waveforms::ExpSettlingModel(terms);
    }

    auto wf = ft::waveforms::make_step(start, end, edge_ns, duration_ns, wcfg);
    if (predist && !model.empty()) {
        wf = ft::waveforms::predistort(wf, model);
        // Compensation amplitudes eat into the generator's dynamic range.
        for (double v : wf.samples)
            if (std::abs(v) > 0.5 * wcfg.full_scale_flux)
                throw ft::ConfigError(
                    "predistorted waveform exceeds awg.full_scale_flux");
    }
    if (shape) wf = ft::waveforms::gaussian_lowpass(wf, wcfg.lpf_cutoff);
    if (!model.empty()) wf = ft::waveforms::apply_settling(wf, model);

    if (!out_flux.empty()) {
        auto table = ft::io::from_flux_waveform(wf);
        table.seed = noise.master_seed;
        ft::io::save_trace(table, out_flux);
    }

    if (!out_rf.empty()) {
        // RF records get long quickly; synthesize a window around the edge.
        ft::waveforms::FluxWaveform window = wf;
        if (rf_window_ns > 0.0 && rf_window_ns < duration_ns) {
            auto i0 = static_cast<std::size_t>(
                std::max(0.0, (edge_ns - 0.25 * rf_window_ns) / wf.dt_ns()));
            auto n = static_cast<std::size_t>(rf_window_ns / wf.dt_ns());
            if (i0 + n > wf.samples.size()) i0 = wf.samples.size() - n;
            window.samples.assign(wf.samples.begin() + i0, wf.samples.begin() + i0 + n);
            window.t0_ns = wf.time_ns(i0);
        }
        ft::signalchain::SynthConfig synth;
        synth.rf_rate = rf_rate_gsps * 1e9;
        auto trace = ft::signalchain::synthesize_trace(
            window, params, noise, refl ? &*refl : nullptr, synth);
        auto table = ft::io::from_rf_trace(trace);
        table.seed = noise.master_seed;
        ft::io::save_trace(table, out_rf);
    }

    std::cout << "samples: " << wf.samples.size() << "\n";
    std::cout << "duration_ns: " << fmt(wf.duration_ns()) << "\n";
    return 0;
}

// ---- demod ---------------------------------------------------------------

int cmd_demod(const CommonArgs& common, const std::string& in_path,
              const std::string& mode, double cutoff_ghz,
              const std::string& out_path) {
    auto cfg = build_config(common);
    auto table = ft::io::load_trace(in_path);
    auto rf = ft::io::to_rf_trace(table);

    ft::signalchain::PhaseTrace phase;
    if (mode == "digital") {
        phase = ft::signalchain::digital_demodulate(rf, cutoff_ghz * 1e9);
    } else if (mode == "hardware") {
        phase = ft::signalchain::hardware_demodulate(rf, ft::config::scope_from(cfg));
    } else {
        throw ft::ConfigError("demod mode must be digital or hardware");
    }
    auto out = ft::io::from_phase_trace(phase);
    out.seed = table.seed;
    out.scenario = table.scenario;
    ft::io::save_trace(out, out_path);
    std::cout << "samples: " << phase.phase_deg.size() << "\n";
    return 0;
}

// ---- fit-step --------------------------------------------------------------

int cmd_fit_step(const CommonArgs& common, const std::string& in_path,
                 double edge_ns, const std::string& terms,
                 const std::string& report_path) {
    (void)common;
    auto table = ft::io::load_trace(in_path);

    ft::estimators::SettlingFit fit;
    std::vector<double> samples;
    if (table.column_index("flux_phi0") >= 0)
        samples = table.data[table.column_index("flux_phi0")];
    else if (table.column_index("phase_deg") >= 0)
        samples = table.data[table.column_index("phase_deg")];
    else
        throw ft::DataError("trace has neither flux_phi0 nor phase_deg");

    if (terms == "auto") {
        fit = ft::estimators::select_model_order(samples, table.sample_rate,
                                                 table.t0_ns, edge_ns);
    } else {
        int n = std::stoi(terms);
        fit = ft::estimators::fit_settling(samples, table.sample_rate, table.t0_ns,
                                           edge_ns, n);
    }

    std::ostringstream rep;
    rep << "n_terms: " << fit.n_terms << "\n";
    rep << "step_amplitude: " << fmt(fit.step_amplitude) << "\n";
    for (std::size_t i = 0; i < fit.model.terms.size(); ++i) {
        rep << "alpha" << i << ": " << fmt(fit.model.terms[i].alpha) << "\n";
        rep << "tau" << i << "_ns: " << fmt(fit.model.terms[i].tau_ns) << "\n";
    }
    rep << "residual_rms: " << fmt(fit.residual_rms) << "\n";
    rep << "degenerate: " << (fit.degenerate ? "true" : "false") << "\n";
    write_text(report_path, rep.str());
    return 0;
}

// ---- fit-cal ----------------------------------------------------------------

int cmd_fit_cal(const CommonArgs& common, const std::string& in_path, bool fit_z0,
                const std::string& report_path) {
    auto cfg = build_config(common);
    auto init = ft::config::circuit_from(cfg);
    auto table = ft::io::load_trace(in_path);

    int fi = table.column_index("flux_phi0");
    int pi = table.column_index("phase_deg");
    if (fi < 0 || pi < 0)
        throw ft::DataError("calibration data needs flux_phi0 and phase_deg columns");

    ft::estimators::CalibrationFitOptions opts;
    opts.fit_z0 = fit_z0;
    auto fit = ft::estimators::fit_calibration(table.data[fi], table.data[pi],
                                               init.probe_freq, init, opts);

    std::ostringstream rep;
    rep << "ic_total_ua: " << fmt(fit.params.ic_total * 1e6) << "\n";
    rep << "c_shunt_pf: " << fmt(fit.params.c_shunt * 1e12) << "\n";
    rep << "z0_ohm: " << fmt(fit.params.z0) << "\n";
    rep << "offset_deg: " << fmt(fit.offset_deg) << "\n";
    rep << "residual_rms_deg: " << fmt(fit.residual_rms_deg) << "\n";
    rep << "n_used: " << fit.n_used << "\n";
    rep << "n_excluded: " << fit.n_excluded << "\n";
    write_text(report_path, rep.str());
    return 0;
}

// ---- reflect-scan -----------------------------------------------------------

int cmd_reflect_scan(const CommonArgs& common, int family_n, double span_deg,
                     double final_flux, double window_ns, const std::string& out_csv,
                     const std::string& out_svg, const std::string& report_path) {
    auto cfg = build_config(common);
    auto params = ft::config::circuit_from(cfg);
    auto wcfg = ft::config::waveform_from(cfg);
    auto refl = ft::config::reflection_from(cfg);
    if (!refl)
        throw ft::ConfigError("reflect-scan needs reflection.amp_db in the config");

    auto family = ft::waveforms::angle_sweep_family(
        params, static_cast<std::size_t>(family_n), final_flux, span_deg, wcfg);

    std::vector<ft::signalchain::PhaseTrace> bounced;
    bounced.reserve(family.size());
    for (auto& wf : family) {
        auto shaped = ft::waveforms::gaussian_lowpass(wf, wcfg.lpf_cutoff);
        auto sched = ft::signalchain::angle_schedule(shaped, params);
        bounced.push_back(ft::signalchain::bounce_series(sched, *refl));
    }
    auto scan = ft::signalchain::phase_spread_scan(bounced, window_ns);
    auto bound = ft::signalchain::infer_reflection_bound(scan.max_spread_deg,
                                                         scan.t_peak_ns);

    if (!out_csv.empty()) {
        ft::io::TraceTable t;
        t.sample_rate = 1e9 / (scan.time_ns[1] - scan.time_ns[0]);
        t.t0_ns = scan.time_ns.front();
        t.columns = {"spread_deg"};
        t.data = {scan.spread_deg};
        ft::io::save_trace(t, out_csv);
    }
    if (!out_svg.empty()) {
        ft::plot::Series s{"spread", scan.time_ns, scan.spread_deg};
        ft::plot::emit_plot({s}, ft::plot::PlotKind::ThetaScan, out_svg);
    }

    std::ostringstream rep;
    rep << "max_spread_deg: " << fmt(scan.max_spread_deg) << "\n";
    rep << "t_peak_ns: " << fmt(scan.t_peak_ns) << "\n";
    rep << "amp_high_db: " << fmt(bound.amp_high_db) << "\n";
    rep << "amp_low_db: " << fmt(bound.amp_low_db) << "\n";
    rep << "distance_ns: " << fmt(bound.distance_ns) << "\n";
    write_text(report_path, rep.str());
    return 0;
}

// ---- scenario ----------------------------------------------------------------

int cmd_scenario(const CommonArgs& common, const std::string& name,
                 const std::string& out_dir, uint64_t seed, bool list) {
    (void)common;
    if (list) {
        for (const auto& sc : ft::scenario::library())
            std::cout << sc.name << ": " << sc.notes << "\n";
        return 0;
    }
    const auto& sc = ft::scenario::find(name);
    ft::scenario::RunOptions opts;
    opts.seed = seed;
    auto result = ft::scenario::run_scenario(sc, out_dir, opts);
    std::cout << result.report_text;
    return 0;
}

// ---- plot ----------------------------------------------------------------------

int cmd_plot(const std::string& in_path, const std::string& kind_name,
             const std::string& out_svg) {
    auto table = ft::io::load_trace(in_path);
    auto kind = ft::plot::plot_kind_from_string(kind_name);
    std::vector<ft::plot::Series> series;
    std::vector<double> x(table.rows());
    double dt = 1e9 / table.sample_rate;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = table.t0_ns + i * dt;
    for (std::size_t c = 0; c < table.columns.size(); ++c)
        series.push_back({table.columns[c], x, table.data[c]});
    ft::plot::emit_plot(series, kind, out_svg);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"flux-to-phase transducer simulation and estimation toolkit"};
    app.require_subcommand(1);

    CommonArgs common;

    // model
    auto* model = app.add_subcommand("model", "calibration/gain/sensitivity sweeps");
    std::string model_what = "calibration";
    double model_fmin = -0.38, model_fmax = 0.38, model_noise = 0.25;
    int model_points = 257;
    std::string model_csv, model_svg;
    add_common(model, common);
    model->add_option("--what", model_what, "calibration|gain|sensitivity");
    model->add_option("--flux-min", model_fmin);
    model->add_option("--flux-max", model_fmax);
    model->add_option("--points", model_points);
    model->add_option("--noise-deg", model_noise, "phase noise for sensitivity");
    model->add_option("--out", model_csv, "output CSV");
    model->add_option("--svg", model_svg, "output SVG");

    // simulate
    auto* sim = app.add_subcommand("simulate", "step waveform through the chain");
    double sim_start = 0.08, sim_end = 0.31, sim_edge = 100.0, sim_dur = 500.0;
    double sim_rf_rate = 40.0, sim_rf_window = 100.0;
    bool sim_predist = false, sim_shape = true;
    std::string sim_out_flux, sim_out_rf;
    add_common(sim, common);
    sim->add_option("--start", sim_start);
    sim->add_option("--end", sim_end);
    sim->add_option("--edge-ns", sim_edge);
    sim->add_option("--duration-ns", sim_dur);
    sim->add_flag("--predistort", sim_predist, "apply the inverse filter first");
    sim->add_flag("!--no-shape", sim_shape, "skip the Gaussian low-pass");
    sim->add_option("--out-flux", sim_out_flux);
    sim->add_option("--out-rf", sim_out_rf);
    sim->add_option("--rf-rate-gsps", sim_rf_rate);
    sim->add_option("--rf-window-ns", sim_rf_window);

    // demod
    auto* dem = app.add_subcommand("demod", "demodulate an RF trace");
    std::string dem_in, dem_out = "phase.csv", dem_mode = "digital";
    double dem_cutoff = 0.0;
    add_common(dem, common);
    dem->add_option("--in", dem_in)->required();
    dem->add_option("--mode", dem_mode, "digital|hardware");
    dem->add_option("--cutoff-ghz", dem_cutoff, "0 = probe/8");
    dem->add_option("--out", dem_out);

    // fit-step
    auto* fstep = app.add_subcommand("fit-step", "fit a settling model to a step");
    std::string fstep_in, fstep_terms = "auto", fstep_report;
    double fstep_edge = 100.0;
    add_common(fstep, common);
    fstep->add_option("--in", fstep_in)->required();
    fstep->add_option("--edge-ns", fstep_edge);
    fstep->add_option("--terms", fstep_terms, "1|2|3|auto");
    fstep->add_option("--report", fstep_report, "report path (default stdout)");

    // fit-cal
    auto* fcal = app.add_subcommand("fit-cal", "fit the calibration curve");
    std::string fcal_in, fcal_report;
    bool fcal_z0 = false;
    add_common(fcal, common);
    fcal->add_option("--in", fcal_in)->required();
    fcal->add_flag("--fit-z0", fcal_z0, "float the transformer impedance too");
    fcal->add_option("--report", fcal_report);

    // reflect-scan
    auto* rscan = app.add_subcommand("reflect-scan", "reflection spread measurement");
    int rscan_n = 16;
    double rscan_span = 180.0, rscan_final = 0.08, rscan_window = 50.0;
    std::string rscan_csv, rscan_svg, rscan_report;
    add_common(rscan, common);
    rscan->add_option("--family-n", rscan_n);
    rscan->add_option("--span-deg", rscan_span);
    rscan->add_option("--final-flux", rscan_final);
    rscan->add_option("--window-ns", rscan_window);
    rscan->add_option("--out", rscan_csv);
    rscan->add_option("--svg", rscan_svg);
    rscan->add_option("--report", rscan_report);

    // scenario
    auto* scen = app.add_subcommand("scenario", "run a packaged measurement scenario");
    std::string scen_name, scen_out = "scenario-out";
    uint64_t scen_seed = 1;
    bool scen_list = false;
    add_common(scen, common);
    scen->add_option("name", scen_name, "built-in scenario name");
    scen->add_option("--out", scen_out);
    scen->add_option("--seed", scen_seed);
    scen->add_flag("--list", scen_list, "list built-in scenarios");

    // plot
    auto* plt = app.add_subcommand("plot", "render a trace CSV to SVG");
    std::string plt_in, plt_kind = "step", plt_out = "plot.svg";
    plt->add_option("--in", plt_in)->required();
    plt->add_option("--kind", plt_kind, "calibration|gain|sensitivity|step|theta_scan");
    plt->add_option("--out", plt_out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (model->parsed())
            return cmd_model(common, model_what, model_fmin, model_fmax, model_points,
                             model_csv, model_svg, model_noise);
        if (sim->parsed())
            return cmd_simulate(common, sim_start, sim_end, sim_edge, sim_dur,
                                sim_predist, sim_shape, sim_out_flux, sim_out_rf,
                                sim_rf_rate, sim_rf_window);
        if (dem->parsed()) return cmd_demod(common, dem_in, dem_mode, dem_cutoff, dem_out);
        if (fstep->parsed())
            return cmd_fit_step(common, fstep_in, fstep_edge, fstep_terms, fstep_report);
        if (fcal->parsed()) return cmd_fit_cal(common, fcal_in, fcal_z0, fcal_report);
        if (rscan->parsed())
            return cmd_reflect_scan(common, rscan_n, rscan_span, rscan_final,
                                    rscan_window, rscan_csv, rscan_svg, rscan_report);
        if (scen->parsed()) {
            if (!scen_list && scen_name.empty())
                throw ft::ConfigError("scenario: give a name or --list");
            return cmd_scenario(common, scen_name, scen_out, scen_seed, scen_list);
        }
        if (plt->parsed()) return cmd_plot(plt_in, plt_kind, plt_out);
    } catch (const ft::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ft::ConvergenceError& e) {
        std::cerr << "fit error: " << e.what() << "\n";
        return 4;
    } catch (const ft::ModelError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return 2;
    } catch (const ft::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
