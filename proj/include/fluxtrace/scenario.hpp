#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fluxtrace/circuit.hpp"
#include "fluxtrace/estimators.hpp"
#include "fluxtrace/signalchain.hpp"
#include "fluxtrace/waveforms.hpp"

namespace fluxtrace::scenario {

/// A complete measurement configuration: device, apparatus settling,
/// optional package settling (cascaded on top, so the 3-term apparatus
/// model stays within its term budget), optional reflector, and noise.
struct Scenario {
    std::string name;
    std::string notes;
    circuit::CircuitParams circuit = circuit::CircuitParams::fitted();
    waveforms::ExpSettlingModel settling =
        waveforms::ExpSettlingModel::baseline_apparatus();
    std::optional<waveforms::SettlingTerm> package_settling;
    std::optional<signalchain::ReflectionScenario> reflection;
    signalchain::NoiseConfig noise;

    /// Step endpoints used by the standard measurement.
    double step_start = 0.08;
    double step_end = 0.31;

    void validate() const;
};

/// The built-in package/bias-line configurations, in reporting order.
const std::vector<Scenario>& library();

/// Look up a built-in by name. Throws ConfigError for unknown names.
const Scenario& find(const std::string& name);

struct RunOptions {
    uint64_t seed = 1;
    std::size_t n_averages = 16;     ///< traces averaged on the short path
    double horizon_us = 500.0;       ///< post-edge span of the long record
    double scope_rate = 50e6;        ///< hardware-path output rate (S/s)
    bool emit_plots = true;
    bool write_traces = true;
};

struct RunResult {
    std::string name;
    estimators::PackageReport package;
    estimators::SettlingFit settling_fit; ///< model-order-selected fit
    double calibration_residual_deg = 0.0;
    std::vector<std::string> artifacts; ///< files written under out_dir
    std::string report_text;            ///< key: value report
};

/// End-to-end pipeline for one scenario, deterministic for a given seed:
///
///   short path (settling fit):  ideal step -> settling cascade ->
///     transducer angle schedule -> per-trace noise offsets -> average ->
///     calibration inversion back to flux -> normalized settling fit;
///
///   long path (classification): the same step over the full horizon,
///     decimated to the hardware demodulator's output rate with the
///     digitizer DC-settling artifact applied, then classified.
///
/// Writes traces, a key: value report and plots under `out_dir` (created
/// if needed) and returns the summary.
RunResult run_scenario(const Scenario& sc, const std::string& out_dir,
                       const RunOptions& opts = {});

/// Settling cascade helper: apply the apparatus model, then the package
/// term when present.
waveforms::FluxWaveform apply_scenario_settling(const Scenario& sc,
                                                const waveforms::FluxWaveform& wf);

} // namespace fluxtrace::scenario
