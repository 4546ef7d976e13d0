#include "fluxtrace/circuit.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "fluxtrace/errors.hpp"

namespace fluxtrace::circuit {

namespace {

constexpr double kHalfIntegerTol = 1e-12;

void check_clamp(double flux, const CircuitParams& params) {
    double w = wrap_flux(flux);
    if (std::abs(w) > params.flux_clamp + 1e-15) {
        throw ModelError("flux " + std::to_string(flux) +
                         " Phi0 is outside the operating range |flux| <= " +
                         std::to_string(params.flux_clamp));
    }
}

// Susceptance of the parallel LC at angular frequency w. The reflection
// coefficient is better conditioned in terms of B than of Z near the
// resonance pole.
double susceptance(double omega, double flux, const CircuitParams& params) {
    double lj = josephson_inductance(flux, params);
    return omega * params.c_shunt - 1.0 / (omega * lj);
}

} // namespace

void CircuitParams::validate() const {
    if (!(ic_total > 0.0)) throw ConfigError("ic_total must be > 0");
    if (!(c_shunt > 0.0)) throw ConfigError("c_shunt must be > 0");
    if (!(z0 > 0.0)) throw ConfigError("z0 must be > 0");
    if (!(probe_freq > 0.0)) throw ConfigError("probe_freq must be > 0");
    if (!(flux_clamp > 0.0 && flux_clamp < 0.5))
        throw ConfigError("flux_clamp must lie in (0, 0.5)");
}

double josephson_inductance(double flux, const CircuitParams& params) {
    double c = std::abs(std::cos(kPi * flux));
    if (c < kHalfIntegerTol) {
        throw ModelError("josephson inductance diverges at half-integer flux (flux = " +
                         std::to_string(flux) + " Phi0)");
    }
    return kFluxQuantum / (kTwoPi * params.ic_total * c);
}

double resonant_frequency(double flux, const CircuitParams& params) {
    check_clamp(flux, params);
    double lj = josephson_inductance(flux, params);
    return 1.0 / (kTwoPi * std::sqrt(lj * params.c_shunt));
}

std::complex<double> resonator_impedance(double omega_rad, double flux,
                                         const CircuitParams& params) {
    if (!(omega_rad > 0.0)) throw ConfigError("omega must be > 0");
    check_clamp(flux, params);
    double lj = josephson_inductance(flux, params);
    double fr = resonant_frequency(flux, params);
    double wr = kTwoPi * fr;
    double denom = 1.0 - (omega_rad * omega_rad) / (wr * wr);
    if (std::abs(denom) < 1e-12) {
        throw ModelError("resonator impedance has a pole at the resonance frequency");
    }
    return {0.0, omega_rad * lj / denom};
}

std::complex<double> reflection_coefficient(double flux, const CircuitParams& params) {
    check_clamp(flux, params);
    double omega = kTwoPi * params.probe_freq;
    double b = susceptance(omega, flux, params);
    // G = (Z - z0)/(Z + z0) with Z = i/(-B); at B = 0 (on resonance) the
    // impedance pole is a removable point with G = 1.
    if (b == 0.0) return {1.0, 0.0};
    std::complex<double> z{0.0, -1.0 / b};
    return (z - params.z0) / (z + params.z0);
}

PhaseDeg reflection_angle(double flux, const CircuitParams& params) {
    auto g = reflection_coefficient(flux, params);
    return PhaseDeg(rad_to_deg(std::arg(g)));
}

double transducer_gain(double flux, const CircuitParams& params) {
    check_clamp(flux, params);
    // angle = -2*atan(z0*B(flux)) away from the wrap, so
    // d(angle)/dflux = -2*z0*B' / (1 + (z0*B)^2) with
    // B' = pi*sin(pi*flux)*sign(cos(pi*flux)) / (w*L0).
    double omega = kTwoPi * params.probe_freq;
    double w = wrap_flux(flux);
    double l0 = kFluxQuantum / (kTwoPi * params.ic_total);
    double b = susceptance(omega, w, params);
    double sign = std::cos(kPi * w) >= 0.0 ? 1.0 : -1.0;
    double db = kPi * std::sin(kPi * w) * sign / (omega * l0);
    double gain_rad = -2.0 * params.z0 * db / (1.0 + params.z0 * params.z0 * b * b);
    return rad_to_deg(gain_rad);
}

double transducer_gain_fd(double flux, const CircuitParams& params, double step) {
    check_clamp(flux, params);
    // Central difference with wrap-safe phase differencing; the step is
    // shrunk near the clamp so both evaluation points stay in range.
    double w = wrap_flux(flux);
    double h = step;
    if (std::abs(w) + h > params.flux_clamp) h = params.flux_clamp - std::abs(w);
    if (h <= 0.0) h = step * 1e-3;
    double hi = reflection_angle(w + h, params);
    double lo = reflection_angle(w - h, params);
    return wrap_deg(hi - lo) / (2.0 * h);
}

double flux_sensitivity(double flux, const CircuitParams& params,
                        double phase_noise_deg) {
    if (phase_noise_deg < 0.0) throw ConfigError("phase noise must be >= 0");
    double g = std::abs(transducer_gain(flux, params));
    if (phase_noise_deg == 0.0) return 0.0;
    if (g == 0.0) return std::numeric_limits<double>::infinity();
    return phase_noise_deg / g;
}

double bandwidth(const CircuitParams& params) {
    params.validate();
    return 1.0 / (kTwoPi * params.z0 * params.c_shunt);
}

double reachable_angle_span(const CircuitParams& params) {
    double top = reflection_angle(0.0, params);
    double bottom = reflection_angle(params.flux_clamp, params);
    return top - bottom;
}

double invert_reflection_angle(double phase_deg, const CircuitParams& params) {
    // The angle is monotone decreasing on [0, flux_clamp] for probe
    // frequencies below the zero-flux resonance.
    double top = reflection_angle(0.0, params);
    double bottom = reflection_angle(params.flux_clamp, params);
    if (phase_deg > top + 1e-9 || phase_deg < bottom - 1e-9) {
        throw ModelError("phase " + std::to_string(phase_deg) +
                         " deg is outside the monotone calibration branch [" +
                         std::to_string(bottom) + ", " + std::to_string(top) + "]");
    }
    double lo = 0.0, hi = params.flux_clamp;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (reflection_angle(mid, params) >= phase_deg)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-14) break;
    }
    return 0.5 * (lo + hi);
}

void unwrap_degrees_inplace(double* phase_deg, std::size_t n) {
    if (n == 0) return;
    phase_deg[0] = wrap_deg(phase_deg[0]);
    for (std::size_t i = 1; i < n; ++i) {
        double d = phase_deg[i] - phase_deg[i - 1];
        phase_deg[i] -= 360.0 * std::round(d / 360.0);
    }
}

} // namespace fluxtrace::circuit
