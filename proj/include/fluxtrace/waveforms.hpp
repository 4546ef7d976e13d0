#pragma once

#include <cstddef>
#include <vector>

#include "fluxtrace/circuit.hpp"

namespace fluxtrace::waveforms {

/// Uniformly sampled flux-vs-time series in flux-quantum units.
struct FluxWaveform {
    double sample_rate = 1e9;    ///< samples per second
    std::vector<double> samples; ///< flux values (Phi0)
    double t0_ns = 0.0;          ///< time of the first sample

    [[nodiscard]] double dt_ns() const { return 1e9 / sample_rate; }
    [[nodiscard]] double duration_ns() const { return samples.size() * dt_ns(); }
    [[nodiscard]] double time_ns(std::size_t i) const { return t0_ns + i * dt_ns(); }

    void validate() const;
};

/// Sum-of-exponentials settling model: the unit-step response of the
/// distortion is 1 - sum_i alpha_i * exp(-t/tau_i).
struct SettlingTerm {
    double alpha = 0.0;  ///< dimensionless settling amplitude
    double tau_ns = 1.0; ///< time constant (ns)
};

struct ExpSettlingModel {
    std::vector<SettlingTerm> terms; ///< up to 3 terms, ascending tau

    ExpSettlingModel() = default;
    explicit ExpSettlingModel(std::vector<SettlingTerm> t);

    [[nodiscard]] bool empty() const { return terms.empty(); }

    /// Closed-form unit-step response at time t (ns) past the edge.
    [[nodiscard]] double step_response(double t_ns) const;

    /// Total settling amplitude sum|alpha|.
    [[nodiscard]] double total_amplitude() const;

    void validate() const;

    /// Step-distortion model recovered from the baseline apparatus:
    /// 0.48/0.73 ns, 0.04/7.9 ns, 0.01/53.5 ns.
    static ExpSettlingModel baseline_apparatus();
};

/// Generator-side configuration: sample rate of the waveform source, the
/// anti-ringing low-pass on its output, and the current-to-flux scale.
struct WaveformConfig {
    double awg_rate = 1e9;          ///< generator sample rate (S/s)
    double lpf_cutoff = 220e6;      ///< Gaussian low-pass -3 dB point (Hz)
    double mutual_inductance = 0.0; ///< optional bias-line coupling (H); 0 = unused
    double full_scale_flux = 1.75;  ///< generator full scale on chip (Phi0)

    void validate() const;
};

/// Ideal two-level step sampled at the generator rate. Levels must be
/// within +-0.5 Phi0. The sample at t_edge already sits at the end level.
FluxWaveform make_step(double flux_start, double flux_end, double t_edge_ns,
                       double duration_ns, const WaveformConfig& cfg = {});

/// Bias-line current to flux through the configured mutual inductance.
/// Requires cfg.mutual_inductance > 0.
double current_to_flux(double current_a, const WaveformConfig& cfg);

/// Convolve with a truncated Gaussian kernel whose -3 dB frequency equals
/// `cutoff_hz` for this waveform's sample rate (the kernel width is
/// calibrated against the discrete response, so the attenuation at the
/// cutoff is exactly 1/sqrt(2)). Unit DC gain; a positive kernel, so a
/// monotone step never overshoots. Edges are primed by extending the
/// first/last sample values.
FluxWaveform gaussian_lowpass(const FluxWaveform& wf, double cutoff_hz);

/// Pass the waveform through the settling distortion. Each exponential
/// term is discretized by its matched one-pole recursion, which is exact
/// for piecewise-constant inputs: a unit step through the filter equals
/// the closed-form step response at every sample. The filter is primed
/// with the first sample value (DC-settled history).
FluxWaveform apply_settling(const FluxWaveform& wf, const ExpSettlingModel& model);

/// Exact rational inverse of the discretized settling filter, so that
/// apply_settling(predistort(wf, m), m) == wf up to rounding. Throws
/// ModelError if the inverse is unstable at this sample rate.
FluxWaveform predistort(const FluxWaveform& wf, const ExpSettlingModel& model);

/// Family of step waveforms for the reflection-spread measurement: n
/// distinct initial fluxes whose initial reflection angles span at least
/// `span_deg`, all ending at `final_flux` (a low-gain point, so residual
/// flux settling barely moves the angle). Throws ModelError when the span
/// is not reachable within the flux clamp.
std::vector<FluxWaveform> angle_sweep_family(const circuit::CircuitParams& calib,
                                             std::size_t n, double final_flux,
                                             double span_deg,
                                             const WaveformConfig& cfg = {},
                                             double t_edge_ns = 30.0,
                                             double duration_ns = 150.0);

/// Forward/inverse settling filters shared with the signal-chain module.
namespace detail {

/// One-pole matched discretization state for a sum-of-exponentials filter.
void apply_settling_series(const ExpSettlingModel& model, double sample_rate,
                           const double* in, double* out, std::size_t n,
                           bool primed_with_first);

/// Numerator/denominator (in z^-1) of the discretized forward filter.
void settling_transfer(const ExpSettlingModel& model, double sample_rate,
                       std::vector<double>& num, std::vector<double>& den);

/// True if every zero of the discretized forward filter lies strictly
/// inside the unit circle (stable inverse).
bool settling_invertible(const ExpSettlingModel& model, double sample_rate);

} // namespace detail

} // namespace fluxtrace::waveforms
