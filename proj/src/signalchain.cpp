#include "fluxtrace/signalchain.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "fluxtrace/errors.hpp"
#include "fluxtrace/rng.hpp"

namespace fluxtrace::signalchain {

namespace {

// Linear-phase low-pass: Blackman-windowed sinc, unit DC gain. The
// kernel spans four sinc main lobes per side, which keeps the stopband
// far below the phase-noise floor at twice the carrier.
std::vector<double> lowpass_kernel(double sample_rate, double cutoff_hz) {
    double ratio = sample_rate / cutoff_hz;
    int half = static_cast<int>(std::ceil(2.0 * ratio));
    if (half < 8) half = 8;
    if (half > 40000)
        throw ConfigError("lpf cutoff is too low for this sample rate (kernel too long)");
    int len = 2 * half + 1;
    std::vector<double> taps(len);
    double fc = cutoff_hz / sample_rate;
    double sum = 0.0;
    for (int i = 0; i < len; ++i) {
        int k = i - half;
        double x = 2.0 * kPi * fc * k;
        double s = (k == 0) ? 2.0 * fc : std::sin(x) / (kPi * k);
        double w = 0.42 + 0.5 * std::cos(kPi * k / half) +
                   0.08 * std::cos(2.0 * kPi * k / half);
        taps[i] = s * w;
        sum += taps[i];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

// Valid-region convolution: output sample i corresponds to input sample
// i + (len-1)/2, so timestamps shift by half a kernel.
std::vector<double> convolve_valid(const std::vector<double>& x,
                                   const std::vector<double>& taps) {
    if (x.size() < taps.size())
        throw DataError("trace is shorter than the demodulation filter");
    std::size_t m = x.size() - taps.size() + 1;
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < taps.size(); ++k) acc += taps[k] * x[i + k];
        out[i] = acc;
    }
    return out;
}

// Band-limited fractional shift by `delay` samples (positive = advance),
// used to derive the quadrature copy of the reference tone.
std::vector<double> fractional_shift(const std::vector<double>& x, double delay) {
    constexpr int kHalf = 16;
    int whole = static_cast<int>(std::floor(delay));
    double frac = delay - whole;
    // Unnormalized windowed sinc; gain error on an in-band tone is ~1e-7.
    std::vector<double> taps(2 * kHalf);
    for (int k = -kHalf + 1; k <= kHalf; ++k) {
        double u = k - frac;
        double s = (std::abs(u) < 1e-12) ? 1.0 : std::sin(kPi * u) / (kPi * u);
        double w = 0.42 + 0.5 * std::cos(kPi * u / kHalf) +
                   0.08 * std::cos(2.0 * kPi * u / kHalf);
        taps[k + kHalf - 1] = s * w;
    }
    auto n = static_cast<std::ptrdiff_t>(x.size());
    std::vector<double> out(x.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = -kHalf + 1; k <= kHalf; ++k) {
            std::ptrdiff_t j = std::clamp<std::ptrdiff_t>(i + whole + k, 0, n - 1);
            acc += taps[k + kHalf - 1] * x[j];
        }
        out[i] = acc;
    }
    return out;
}

constexpr int kInterpEdge = 18; // samples contaminated by the shift interpolator

PhaseTrace demodulate_iq(const std::vector<double>& i_raw,
                         const std::vector<double>& q_raw, double sample_rate,
                         double t0_ns, double cutoff_hz, int extra_trim) {
    auto taps = lowpass_kernel(sample_rate, cutoff_hz);
    auto i_f = convolve_valid(i_raw, taps);
    auto q_f = convolve_valid(q_raw, taps);
    int half = (static_cast<int>(taps.size()) - 1) / 2;

    std::size_t n = i_f.size();
    if (n <= static_cast<std::size_t>(2 * extra_trim))
        throw DataError("trace too short after demodulation trimming");

    PhaseTrace out;
    out.sample_rate = sample_rate;
    out.t0_ns = t0_ns + (half + extra_trim) * 1e9 / sample_rate;
    out.phase_deg.resize(n - 2 * extra_trim);
    for (std::size_t i = 0; i < out.phase_deg.size(); ++i) {
        out.phase_deg[i] =
            rad_to_deg(std::atan2(q_f[i + extra_trim], i_f[i + extra_trim]));
    }
    circuit::unwrap_degrees_inplace(out.phase_deg.data(), out.phase_deg.size());
    return out;
}

} // namespace

void RFTrace::validate() const {
    if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be > 0");
    if (!(probe_freq > 0.0)) throw ConfigError("probe_freq must be > 0");
    if (signal.size() != reference.size())
        throw DataError("signal and reference must have equal length");
    if (signal.size() < 8) throw DataError("RF trace too short");
}

void PhaseTrace::validate() const {
    if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be > 0");
    for (double v : phase_deg)
        if (!std::isfinite(v)) throw DataError("phase trace contains a non-finite value");
    if (flux && flux->size() != phase_deg.size())
        throw DataError("flux column length mismatch");
}

void NoiseConfig::validate() const {
    if (jitter_pkpk < 0.0) throw ConfigError("jitter_pkpk must be >= 0");
    if (additive_noise_rms < 0.0) throw ConfigError("additive_noise_rms must be >= 0");
    if (extra_phase_noise_deg < 0.0) throw ConfigError("extra_phase_noise_deg must be >= 0");
    if (n_averages < 1) throw ConfigError("n_averages must be >= 1");
}

NoiseConfig NoiseConfig::observed_operating_point() {
    NoiseConfig n;
    n.jitter_pkpk = 20e-12;
    // 20 ps pk-pk at 6.4 GHz alone leaves ~0.06 deg after 50k averages;
    // the observed residual is 0.25 deg, so the balance is carried by
    // this effective per-trace phase noise term.
    n.extra_phase_noise_deg = 54.296;
    n.n_averages = 50000;
    return n;
}

void ReflectionScenario::validate() const {
    if (!(amplitude_db < 0.0))
        throw ConfigError("reflection amplitude_db must be negative");
    if (one_way_delay_ns < 0.0) throw ConfigError("one_way_delay_ns must be >= 0");
    if (chain_delay_ns < 0.0) throw ConfigError("chain_delay_ns must be >= 0");
}

double ReflectionScenario::amplitude_db_from_impedances(double z_from, double z_to) {
    if (!(z_from > 0.0) || !(z_to > 0.0))
        throw ConfigError("impedances must be > 0");
    double r = std::abs((z_to - z_from) / (z_to + z_from));
    if (r == 0.0) throw ConfigError("matched impedances give no reflection");
    return 20.0 * std::log10(r);
}

PhaseTrace angle_schedule(const waveforms::FluxWaveform& wf,
                          const circuit::CircuitParams& params) {
    wf.validate();
    PhaseTrace out;
    out.sample_rate = wf.sample_rate;
    out.t0_ns = wf.t0_ns;
    out.phase_deg.resize(wf.samples.size());
    // The clamped operating range maps to well under a full turn of
    // reflection angle, so the wrapped per-sample values already lie on
    // one continuous branch; no time-axis unwrapping is needed (and it
    // would mis-branch a sharp step larger than half a turn).
    for (std::size_t i = 0; i < wf.samples.size(); ++i)
        out.phase_deg[i] = circuit::reflection_angle(wf.samples[i], params);
    return out;
}

RFTrace synthesize_trace(const waveforms::FluxWaveform& flux_wf,
                         const circuit::CircuitParams& params,
                         const NoiseConfig& noise,
                         const ReflectionScenario* scenario,
                         const SynthConfig& synth) {
    flux_wf.validate();
    params.validate();
    noise.validate();
    if (scenario) scenario->validate();
    if (!(params.probe_freq < 0.5 * synth.rf_rate))
        throw ConfigError("probe frequency violates the digitizer Nyquist limit");

    // Reflection angle per generator sample; the RF timeline indexes into
    // this by zero-order hold.
    std::vector<double> angles(flux_wf.samples.size());
    for (std::size_t i = 0; i < angles.size(); ++i)
        angles[i] = circuit::reflection_angle(flux_wf.samples[i], params);

    double chain_ns = scenario ? scenario->chain_delay_ns : 0.0;
    double rf_dt_ns = 1e9 / synth.rf_rate;
    auto n = static_cast<std::size_t>(
        std::llround(flux_wf.duration_ns() * 1e-9 * synth.rf_rate));
    n = std::max<std::size_t>(n, 16);

    PhaseTrace theta;
    theta.sample_rate = synth.rf_rate;
    theta.t0_ns = flux_wf.t0_ns;
    theta.phase_deg.resize(n);
    double wf_dt_ns = flux_wf.dt_ns();
    auto last = static_cast<std::ptrdiff_t>(flux_wf.samples.size()) - 1;
    for (std::size_t i = 0; i < n; ++i) {
        double t_ns = flux_wf.t0_ns + i * rf_dt_ns;
        auto idx = static_cast<std::ptrdiff_t>(
            std::floor((t_ns - chain_ns - flux_wf.t0_ns) / wf_dt_ns));
        idx = std::clamp<std::ptrdiff_t>(idx, 0, last);
        theta.phase_deg[i] = angles[static_cast<std::size_t>(idx)];
    }

    if (scenario) theta = bounce_series(theta, *scenario);

    Rng rng = Rng::for_trace(noise.master_seed, synth.trace_index);
    double jitter_s = noise.jitter_pkpk > 0.0
                          ? rng.uniform(-0.5 * noise.jitter_pkpk, 0.5 * noise.jitter_pkpk)
                          : 0.0;
    double extra_rad = noise.extra_phase_noise_deg > 0.0
                           ? deg_to_rad(rng.gauss(0.0, noise.extra_phase_noise_deg))
                           : 0.0;

    RFTrace out;
    out.sample_rate = synth.rf_rate;
    out.probe_freq = params.probe_freq;
    out.t0_ns = flux_wf.t0_ns;
    out.signal.resize(n);
    out.reference.resize(n);
    double omega = kTwoPi * params.probe_freq;
    for (std::size_t i = 0; i < n; ++i) {
        double t_s = (flux_wf.t0_ns + i * rf_dt_ns) * 1e-9;
        double mod = deg_to_rad(theta.phase_deg[i]);
        double s = std::cos(omega * (t_s + jitter_s) + mod + extra_rad);
        if (noise.additive_noise_rms > 0.0)
            s += noise.additive_noise_rms * rng.gauss();
        out.signal[i] = s;
        out.reference[i] = std::cos(omega * t_s);
    }
    return out;
}

PhaseTrace digital_demodulate(const RFTrace& trace, double lpf_cutoff) {
    trace.validate();
    if (!(trace.sample_rate > 2.0 * trace.probe_freq))
        throw ConfigError("digital demodulation needs sample_rate > 2*probe_freq");
    double cutoff = lpf_cutoff > 0.0 ? lpf_cutoff : trace.probe_freq / 8.0;
    if (!(cutoff < 0.5 * trace.probe_freq))
        throw ConfigError("demodulation lpf cutoff must be below probe_freq/2");

    double rms = 0.0;
    for (double v : trace.reference) rms += v * v;
    rms = std::sqrt(rms / trace.reference.size());
    if (rms < 0.05)
        throw DataError("reference channel amplitude is too small to demodulate");

    // Quadrature copy: the reference advanced by a quarter carrier period.
    double shift = trace.sample_rate / (4.0 * trace.probe_freq);
    auto ref_q = fractional_shift(trace.reference, shift);

    std::size_t n = trace.signal.size();
    std::vector<double> i_raw(n), q_raw(n);
    for (std::size_t i = 0; i < n; ++i) {
        i_raw[i] = 2.0 * trace.signal[i] * trace.reference[i];
        q_raw[i] = 2.0 * trace.signal[i] * ref_q[i];
    }
    return demodulate_iq(i_raw, q_raw, trace.sample_rate, trace.t0_ns, cutoff,
                         kInterpEdge);
}

PhaseTrace hardware_demodulate(const RFTrace& trace, const ScopeModel& scope) {
    trace.validate();
    if (!(scope.output_rate > 0.0)) throw ConfigError("scope output_rate must be > 0");
    if (!(scope.output_rate < trace.probe_freq))
        throw ConfigError("scope output_rate must be below the probe frequency");
    double ratio = trace.sample_rate / scope.output_rate;
    auto factor = static_cast<std::size_t>(std::llround(ratio));
    if (factor < 1 || std::abs(ratio - static_cast<double>(factor)) > 1e-6)
        throw ConfigError("decimation ratio must be an integer");

    // Ideal mixer: multiply by the nominal LO quadratures.
    std::size_t n = trace.signal.size();
    std::vector<double> i_raw(n), q_raw(n);
    double omega = kTwoPi * trace.probe_freq;
    double dt_s = 1.0 / trace.sample_rate;
    for (std::size_t i = 0; i < n; ++i) {
        double t_s = trace.t0_ns * 1e-9 + i * dt_s;
        i_raw[i] = 2.0 * trace.signal[i] * std::cos(omega * t_s);
        q_raw[i] = -2.0 * trace.signal[i] * std::sin(omega * t_s);
    }

    PhaseTrace base = demodulate_iq(i_raw, q_raw, trace.sample_rate, trace.t0_ns,
                                    0.4 * scope.output_rate, 0);

    PhaseTrace out;
    out.sample_rate = scope.output_rate;
    out.t0_ns = base.t0_ns;
    out.phase_deg.reserve(base.phase_deg.size() / factor + 1);
    for (std::size_t i = 0; i < base.phase_deg.size(); i += factor)
        out.phase_deg.push_back(base.phase_deg[i]);

    if (scope.dc_settle_amp != 0.0) {
        // The record start is a step onto the digitizer's DC response, so
        // the artifact filter starts from a zero-settled state.
        waveforms::ExpSettlingModel artifact(
            {{scope.dc_settle_amp, scope.dc_settle_tau_ns}});
        std::vector<double> settled(out.phase_deg.size());
        waveforms::detail::apply_settling_series(artifact, out.sample_rate,
                                                 out.phase_deg.data(), settled.data(),
                                                 out.phase_deg.size(), false);
        out.phase_deg = std::move(settled);
    }
    return out;
}

PhaseTrace average_traces(const std::vector<PhaseTrace>& traces) {
    if (traces.empty()) throw DataError("cannot average zero traces");
    const PhaseTrace& first = traces.front();
    for (const auto& t : traces) {
        if (t.phase_deg.size() != first.phase_deg.size() ||
            std::abs(t.sample_rate - first.sample_rate) >
                1e-9 * first.sample_rate)
            throw DataError("averaged traces must share rate and length");
    }
    PhaseTrace out = first;
    std::fill(out.phase_deg.begin(), out.phase_deg.end(), 0.0);
    bool all_flux = std::all_of(traces.begin(), traces.end(),
                                [](const PhaseTrace& t) { return t.flux.has_value(); });
    if (all_flux)
        out.flux = std::vector<double>(first.phase_deg.size(), 0.0);
    else
        out.flux.reset();
    double inv = 1.0 / static_cast<double>(traces.size());
    for (const auto& t : traces) {
        for (std::size_t i = 0; i < out.phase_deg.size(); ++i)
            out.phase_deg[i] += t.phase_deg[i] * inv;
        if (all_flux)
            for (std::size_t i = 0; i < out.flux->size(); ++i)
                (*out.flux)[i] += (*t.flux)[i] * inv;
    }
    return out;
}

PhaseTrace bounce_series(const PhaseTrace& angle_schedule,
                         const ReflectionScenario& scenario) {
    angle_schedule.validate();
    scenario.validate();

    double r = std::pow(10.0, scenario.amplitude_db / 20.0);
    double phi = deg_to_rad(scenario.reflection_phase_deg);
    // Truncate once the n-fold bounce amplitude is negligible; kept well
    // below the steady-state oracle tolerance of 1e-6 degrees.
    constexpr double kTruncation = 1e-9;
    int n_max = static_cast<int>(std::ceil(std::log(kTruncation) / std::log(r)));
    n_max = std::clamp(n_max, 1, 400);

    const auto& theta = angle_schedule.phase_deg;
    auto n = static_cast<std::ptrdiff_t>(theta.size());
    double dt_ns = angle_schedule.dt_ns();
    double delay_samples = 2.0 * scenario.one_way_delay_ns / dt_ns;

    auto theta_at = [&](double idx) -> double {
        if (idx <= 0.0) return theta[0];
        if (idx >= static_cast<double>(n - 1)) return theta[n - 1];
        auto k = static_cast<std::ptrdiff_t>(idx);
        double f = idx - static_cast<double>(k);
        return theta[k] * (1.0 - f) + theta[k + 1] * f;
    };

    std::complex<double> direct = r * std::complex<double>(std::cos(phi), std::sin(phi));
    std::complex<double> per_round =
        -r * std::complex<double>(std::cos(phi), std::sin(phi));
    double transmitted = 1.0 - r * r;

    PhaseTrace out;
    out.sample_rate = angle_schedule.sample_rate;
    out.t0_ns = angle_schedule.t0_ns;
    out.phase_deg.resize(theta.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        std::complex<double> acc = direct;
        std::complex<double> coeff(transmitted, 0.0);
        double phase_sum = 0.0;
        for (int b = 0; b < n_max; ++b) {
            phase_sum += deg_to_rad(theta_at(static_cast<double>(i) - b * delay_samples));
            acc += coeff * std::complex<double>(std::cos(phase_sum), std::sin(phase_sum));
            coeff *= per_round;
        }
        // The output differs from the schedule by much less than half a
        // turn, so anchoring each sample to its own schedule value picks
        // the physical branch without any time-axis continuation.
        double dev = wrap_deg(rad_to_deg(std::arg(acc)) - theta[i]);
        out.phase_deg[i] = theta[i] + dev;
    }
    return out;
}

double bounce_steady_state_deg(double angle_deg, const ReflectionScenario& scenario) {
    scenario.validate();
    double r = std::pow(10.0, scenario.amplitude_db / 20.0);
    double phi = deg_to_rad(scenario.reflection_phase_deg);
    double th = deg_to_rad(angle_deg);
    std::complex<double> i_unit(0.0, 1.0);
    std::complex<double> v = r * std::exp(i_unit * phi) +
                             (1.0 - r * r) * std::exp(i_unit * th) /
                                 (1.0 + r * std::exp(i_unit * (th + phi)));
    return rad_to_deg(std::arg(v));
}

SpreadScan phase_spread_scan(const std::vector<PhaseTrace>& family,
                             double window_ns, double guard_ns) {
    if (family.size() < 3)
        throw DataError("spread scan needs a family of at least 3 traces");
    const PhaseTrace& first = family.front();
    for (const auto& t : family)
        if (t.phase_deg.size() != first.phase_deg.size() ||
            std::abs(t.sample_rate - first.sample_rate) > 1e-9 * first.sample_rate)
            throw DataError("spread scan traces must share rate and length");
    if (!(window_ns > 0.0)) throw ConfigError("scan window must be > 0");

    PhaseTrace mean = average_traces(family);
    std::size_t n = mean.phase_deg.size();
    double dt = mean.dt_ns();

    // Edge = steepest point of the family mean, refined to sub-sample
    // precision by a parabola through the neighboring derivatives.
    std::size_t imax = 1;
    double dmax = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double d = std::abs(mean.phase_deg[i + 1] - mean.phase_deg[i]);
        if (d > dmax) {
            dmax = d;
            imax = i;
        }
    }
    double edge_ns = mean.time_ns(imax) + 0.5 * dt;
    if (imax > 0 && imax + 2 < n) {
        double dm = std::abs(mean.phase_deg[imax] - mean.phase_deg[imax - 1]);
        double d0 = dmax;
        double dp = std::abs(mean.phase_deg[imax + 2] - mean.phase_deg[imax + 1]);
        double denom = dm - 2.0 * d0 + dp;
        if (std::abs(denom) > 1e-12) {
            double offs = 0.5 * (dm - dp) / denom;
            edge_ns += std::clamp(offs, -1.0, 1.0) * dt;
        }
    }

    SpreadScan scan;
    scan.edge_ns = edge_ns;
    double t_lo = edge_ns + guard_ns;
    double t_hi = edge_ns + window_ns;
    for (std::size_t i = 0; i < n; ++i) {
        double t = mean.time_ns(i);
        if (t < t_lo || t > t_hi) continue;
        double vmin = family[0].phase_deg[i], vmax = vmin;
        for (const auto& tr : family) {
            vmin = std::min(vmin, tr.phase_deg[i]);
            vmax = std::max(vmax, tr.phase_deg[i]);
        }
        scan.time_ns.push_back(t - edge_ns);
        scan.spread_deg.push_back(vmax - vmin);
    }
    if (scan.spread_deg.size() < 4)
        throw DataError("scan window contains too few samples");

    scan.max_spread_deg =
        *std::max_element(scan.spread_deg.begin(), scan.spread_deg.end());

    // Feature time: trailing half-maximum crossing of the spread. The
    // spread holds up while the first delayed bounce still carries the
    // old angle and collapses one round trip later, so the crossing sits
    // at twice the reflector delay; an argmax would be degenerate on the
    // flat top.
    double half = 0.5 * scan.max_spread_deg;
    std::size_t last_hi = 0;
    for (std::size_t i = 0; i < scan.spread_deg.size(); ++i)
        if (scan.spread_deg[i] >= half) last_hi = i;
    if (last_hi + 1 < scan.spread_deg.size()) {
        double s0 = scan.spread_deg[last_hi];
        double s1 = scan.spread_deg[last_hi + 1];
        double f = (s0 - half) / std::max(s0 - s1, 1e-30);
        scan.t_peak_ns = scan.time_ns[last_hi] +
                         f * (scan.time_ns[last_hi + 1] - scan.time_ns[last_hi]);
    } else {
        scan.t_peak_ns = scan.time_ns.back();
    }
    return scan;
}

ReflectionBound infer_reflection_bound(double max_spread_deg, double t_peak_ns) {
    if (!(max_spread_deg > 0.0))
        throw ConfigError("spread must be > 0 to bound a reflection");
    if (max_spread_deg >= 90.0)
        throw ModelError("spread >= 90 deg is outside the small-reflection model");
    ReflectionBound b;
    b.amp_high_db = 20.0 * std::log10(std::tan(deg_to_rad(max_spread_deg)));
    b.amp_low_db = 20.0 * std::log10(std::tan(deg_to_rad(0.5 * max_spread_deg)));
    b.distance_ns = 0.5 * t_peak_ns;
    return b;
}

} // namespace fluxtrace::signalchain
