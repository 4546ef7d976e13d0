#pragma once

#include <cstddef>
#include <vector>

#include "fluxtrace/circuit.hpp"
#include "fluxtrace/signalchain.hpp"
#include "fluxtrace/waveforms.hpp"

namespace fluxtrace::estimators {

/// Result of fitting the flux-to-phase calibration curve.
///
/// A single-frequency angle sweep constrains two parameter combinations
/// (a bandwidth-like product z0*C and a tuning-like product z0/L), so one
/// of the three circuit values is a gauge choice. By default z0 is held
/// at its initial value and ic/C absorb the data; set fit_z0 to float it.
struct CalibrationFit {
    circuit::CircuitParams params;
    double offset_deg = 0.0;       ///< free global homodyne offset
    double residual_rms_deg = 0.0;
    double exclude_above = 0.38;   ///< |flux| exclusion threshold used
    std::size_t n_used = 0;        ///< points inside the exclusion window
    std::size_t n_excluded = 0;
};

struct CalibrationFitOptions {
    bool fit_z0 = false;
    double exclude_above = 0.38; ///< drop |flux| beyond this before fitting
    int max_iterations = 200;
};

/// Least-squares fit of the reflection angle vs applied flux, with a free
/// global phase offset, starting from `init` (typically the designed
/// values). Points with |flux| above the exclusion threshold are dropped
/// first. Throws DataError for degenerate input and ConvergenceError if
/// the iteration budget is exhausted.
CalibrationFit fit_calibration(const std::vector<double>& flux_pts,
                               const std::vector<double>& phase_pts_deg,
                               double probe_freq,
                               const circuit::CircuitParams& init,
                               const CalibrationFitOptions& opts = {});

/// Invert a measured phase through the fitted curve on the monotone
/// branch [0, flux_clamp]. Throws ModelError outside the branch range.
double invert_calibration(double phase_deg, const CalibrationFit& fit);

/// Step-settling fit: amplitudes and time constants of the normalized
/// response A(t) = 1 - sum_i alpha_i exp(-t/tau_i) after an edge.
struct SettlingFit {
    waveforms::ExpSettlingModel model;
    double step_amplitude = 0.0;   ///< final - baseline, input units
    double residual_rms = 0.0;     ///< rms misfit of normalized A(t)
    int n_terms = 0;
    bool degenerate = false;       ///< two fitted tau within ratio 1.5
};

/// Fit `n_terms` exponentials to the normalized post-edge response.
/// Baseline is the pre-edge mean, the final level is the mean of the
/// last tenth of the record, and the fit is invariant to offset and
/// scaling of the input by construction. Time constants are fitted in
/// log space; initial tau values are log-spaced over [0.3 ns, record/3]
/// with amplitudes seeded by linear least squares on that grid.
SettlingFit fit_settling(const std::vector<double>& samples, double sample_rate,
                         double t0_ns, double edge_time_ns, int n_terms);

SettlingFit fit_settling(const waveforms::FluxWaveform& wf, double edge_time_ns,
                         int n_terms);
SettlingFit fit_settling(const signalchain::PhaseTrace& trace, double edge_time_ns,
                         int n_terms);

/// Fit with 1, 2 and 3 terms and return the smallest order whose residual
/// is within 10% of the 3-term residual, skipping orders whose time
/// constants collapse onto each other.
SettlingFit select_model_order(const std::vector<double>& samples,
                               double sample_rate, double t0_ns,
                               double edge_time_ns);
SettlingFit select_model_order(const signalchain::PhaseTrace& trace,
                               double edge_time_ns);

enum class PackageClass { Good, Bad, VeryBad };

struct PackageReport {
    PackageClass cls = PackageClass::Good;
    double late_settling = 0.0; ///< |1 - A(1 us)| of the normalized step
};

struct ClassifyOptions {
    double horizon_us = 500.0;  ///< required post-edge record span
    double good_below = 2e-3;   ///< class thresholds; heuristics chosen to
    double bad_below = 5e-2;    ///< separate the observed package groups
};

/// Classify a long step record by how much of the step is still settling
/// after 1 us: the normalized distance between the value at 1 us past the
/// edge and the final level.
PackageReport classify_package(const signalchain::PhaseTrace& trace,
                               const ClassifyOptions& opts = {});

const char* to_string(PackageClass cls);

} // namespace fluxtrace::estimators
