#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fluxtrace/circuit.hpp"
#include "fluxtrace/waveforms.hpp"

namespace fluxtrace::signalchain {

/// Raw two-channel record: the reflected probe tone and a copy of the
/// local oscillator, digitized at the same rate.
struct RFTrace {
    double sample_rate = 40e9; ///< samples per second
    double probe_freq = 6.4e9; ///< carrier frequency of both channels (Hz)
    double t0_ns = 0.0;
    std::vector<double> signal;    ///< reflected tone (arbitrary volts)
    std::vector<double> reference; ///< local oscillator copy

    void validate() const;
};

/// Demodulated baseband phase record, optionally with the flux series
/// recovered through the calibration curve.
struct PhaseTrace {
    double sample_rate = 1e9;
    double t0_ns = 0.0;
    std::vector<double> phase_deg;
    std::optional<std::vector<double>> flux;

    [[nodiscard]] double dt_ns() const { return 1e9 / sample_rate; }
    [[nodiscard]] double time_ns(std::size_t i) const { return t0_ns + i * dt_ns(); }

    void validate() const;
};

/// Instrument noise model. The synchronization jitter between the probe
/// source and the waveform generator is one uniform timing offset per
/// trace (the sync drifts slowly compared with a single record); it lands
/// on the signal path only, since the trigger-locked reference would
/// otherwise cancel it in demodulation. `extra_phase_noise_deg` is the
/// calibration knob for per-trace phase noise beyond what the timing
/// jitter alone explains.
struct NoiseConfig {
    double jitter_pkpk = 20e-12;       ///< peak-to-peak source/AWG timing skew (s)
    double additive_noise_rms = 0.0;   ///< per-sample voltage noise, relative to unit carrier
    std::size_t n_averages = 1;        ///< traces averaged per measurement
    double extra_phase_noise_deg = 0.0;///< additional per-trace phase noise (deg, rms)
    uint64_t master_seed = 1;

    void validate() const;

    /// Noise calibrated so that 50k-trace averaging leaves a 0.25 deg
    /// residual at a 6.4 GHz probe, as observed in operation.
    static NoiseConfig observed_operating_point();
};

/// A single aggregate reflector in the microwave chain: everything
/// between the resonator and the digitizer collapsed to one complex
/// reflection coefficient a one-way delay from the resonator.
struct ReflectionScenario {
    double amplitude_db = -30.0;      ///< 20*log10|r|, must be < 0
    double one_way_delay_ns = 1.5;    ///< resonator-to-reflector propagation
    double reflection_phase_deg = 47; ///< orientation of the spurious phasor
    double chain_delay_ns = 10.0;     ///< resonator-to-digitizer propagation

    void validate() const;

    /// Reflection coefficient of an impedance step for callers who prefer
    /// to state the mismatch as a pair of line impedances.
    static double amplitude_db_from_impedances(double z_from, double z_to);
};

struct SynthConfig {
    double rf_rate = 40e9;       ///< digitizer rate (S/s)
    uint64_t trace_index = 0;    ///< selects the per-trace noise stream
};

/// Synthesize the homodyne record for a flux waveform:
///   signal(t)    = cos(w_p (t + jitter) + angle(flux(t - chain_delay)) + bounce)
///   reference(t) = cos(w_p t)
/// plus additive noise on the signal channel. The flux waveform is
/// resampled to the RF rate by zero-order hold (any band shaping is
/// applied upstream by the generator model).
RFTrace synthesize_trace(const waveforms::FluxWaveform& flux_wf,
                         const circuit::CircuitParams& params,
                         const NoiseConfig& noise,
                         const ReflectionScenario* scenario = nullptr,
                         const SynthConfig& synth = {});

/// Homodyne demodulation against the recorded reference: I/Q from the
/// reference and its quarter-period-shifted copy, low-pass filtered with
/// a linear-phase kernel (group delay compensated), atan2, unwrap.
/// `lpf_cutoff` of 0 selects the default probe_freq/8.
PhaseTrace digital_demodulate(const RFTrace& trace, double lpf_cutoff = 0.0);

/// Analog mixer + slow digitizer model: ideal IQ mixing at the probe
/// frequency, low-pass + decimation to `output_rate`, then the scope's
/// DC-settling artifact applied to the output as a one-term settling
/// model with zero-primed state (the record start is a step onto the
/// digitizer's DC response).
struct ScopeModel {
    double dc_settle_amp = 2e-3;
    double dc_settle_tau_ns = 30e3; ///< 30 us
    double output_rate = 1e9;
};

PhaseTrace hardware_demodulate(const RFTrace& trace, const ScopeModel& scope = {});

/// Pointwise mean of identically shaped traces.
PhaseTrace average_traces(const std::vector<PhaseTrace>& traces);

/// Apply the multi-bounce reflection transform to a reflection-angle
/// schedule. The output phase is the argument of
///   V(t) = r e^{i phi} + (1 - r^2) sum_n (-r e^{i phi})^{n-1}
///            exp(i sum_{k=0}^{n-1} theta(t - 2 k tau)),
/// the series of one direct spurious reflection plus n-fold bounces
/// between the reflector and the resonator, each round trip delayed by
/// 2*tau and re-oriented by the reflector. Truncated once r^n drops
/// below 1e-9 in amplitude; the steady state then matches the closed
/// two-port network solution to well below 1e-6 degrees.
PhaseTrace bounce_series(const PhaseTrace& angle_schedule,
                         const ReflectionScenario& scenario);

/// Closed-form steady-state phase of the bounce network for a constant
/// resonator angle; the independent oracle for the series.
double bounce_steady_state_deg(double angle_deg, const ReflectionScenario& scenario);

/// Spread of a step-response family about its mean, resolved in time
/// after the common edge.
struct SpreadScan {
    std::vector<double> time_ns;   ///< relative to the detected edge
    std::vector<double> spread_deg;///< max - min across the family
    double max_spread_deg = 0.0;
    /// Time of the spread feature, measured as the trailing half-maximum
    /// crossing: the spread stays up while the first delayed bounce still
    /// carries the old angle and collapses one round trip after the edge,
    /// so this lands at twice the reflector delay.
    double t_peak_ns = 0.0;
    double edge_ns = 0.0;          ///< detected edge position (absolute)
};

/// Per-trace deviation from the family mean, scanned for `window_ns`
/// after the common edge. The first `guard_ns` after the edge are
/// excluded: while the programmed transition is still in flight the
/// family legitimately disagrees, so reflections closer than half the
/// guard are not resolvable.
SpreadScan phase_spread_scan(const std::vector<PhaseTrace>& family,
                             double window_ns, double guard_ns = 2.5);

/// Reflector amplitude and position bounds implied by a measured spread.
/// The family samples at least one orientation extremum and at most both:
///   high bound: spread = one maximum  -> 20 log10(tan(spread))
///   low bound:  spread = two maxima   -> 20 log10(tan(spread/2))
/// and the distance is half the feature time.
struct ReflectionBound {
    double amp_low_db = 0.0;
    double amp_high_db = 0.0;
    double distance_ns = 0.0;
};

ReflectionBound infer_reflection_bound(double max_spread_deg, double t_peak_ns);

/// Reflection-angle schedule for a flux waveform through the calibrated
/// transducer (helper shared by the synthesizer and the scan pipelines).
PhaseTrace angle_schedule(const waveforms::FluxWaveform& wf,
                          const circuit::CircuitParams& params);

} // namespace fluxtrace::signalchain
