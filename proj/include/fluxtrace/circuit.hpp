#pragma once

#include <complex>

#include "fluxtrace/units.hpp"

namespace fluxtrace::circuit {

/// How a critical-current value is stated when building CircuitParams.
/// The loop current of a symmetric two-junction interferometer is twice
/// the single-junction value; all internal formulas use the total.
enum class IcConvention { Total, PerJunction };

/// Electrical parameters of the tunable resonator: a flux-tunable
/// inductance shunted by a capacitor behind an impedance transformer,
/// probed in reflection at a fixed frequency.
struct CircuitParams {
    double ic_total = 4e-6;    ///< total loop critical current (A)
    double c_shunt = 4e-12;    ///< shunt capacitance (F)
    double z0 = 15.0;          ///< transformer output impedance (Ohm)
    double probe_freq = 6.4e9; ///< probe tone frequency (Hz)

    /// Operating-range limit in Phi0 units. Beyond this applied flux the
    /// probe current drives the loop nonlinearly and the small-signal
    /// model no longer holds, so evaluation is refused. Applied to the
    /// flux wrapped into [-0.5, 0.5].
    double flux_clamp = 0.38;

    /// Designed device values (4 uA total, 4 pF, 15 Ohm, 6.4 GHz probe).
    static CircuitParams designed() { return CircuitParams{}; }

    /// Values recovered by fitting the measured calibration curve
    /// (1.8 uA per junction, 14.8 Ohm, 3.8 pF).
    static CircuitParams fitted() {
        CircuitParams p;
        p.ic_total = 3.6e-6;
        p.z0 = 14.8;
        p.c_shunt = 3.8e-12;
        return p;
    }

    static CircuitParams with_ic(double ic, IcConvention conv, CircuitParams base = designed()) {
        base.ic_total = (conv == IcConvention::PerJunction) ? 2.0 * ic : ic;
        return base;
    }

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Phase angle in degrees, wrapped to (-180, 180].
struct PhaseDeg {
    double value = 0.0;

    PhaseDeg() = default;
    explicit PhaseDeg(double deg) : value(wrap_deg(deg)) {}

    operator double() const { return value; }
};

/// Flux-dependent loop inductance L = Phi0 / (2*pi*Ic*|cos(pi*flux)|).
/// Periodic in one flux quantum and even in flux. Throws ModelError at
/// half-integer flux where the effective critical current vanishes.
double josephson_inductance(double flux, const CircuitParams& params);

/// Resonance f_r = 1/(2*pi*sqrt(L(flux)*C)); maximal at zero flux.
/// Throws ModelError outside the flux clamp.
double resonant_frequency(double flux, const CircuitParams& params);

/// Impedance of the parallel LC seen through the transformer,
/// Z = i*w*L / (1 - w^2/w_r^2). Purely imaginary (lossless).
/// Throws ModelError on the resonance pole or outside the clamp.
std::complex<double> resonator_impedance(double omega_rad, double flux,
                                         const CircuitParams& params);

/// Complex reflection coefficient (Z_r - z0)/(Z_r + z0) at the probe
/// frequency; |G| = 1 exactly. Finite at the resonance pole (G -> 1).
std::complex<double> reflection_coefficient(double flux, const CircuitParams& params);

/// Reflected phase at the probe frequency. All flux dependence of the
/// reflection lives in this angle.
PhaseDeg reflection_angle(double flux, const CircuitParams& params);

/// Flux-to-phase gain d(angle)/d(flux) in deg/Phi0, closed form.
double transducer_gain(double flux, const CircuitParams& params);

/// Same quantity by adaptive central difference; independent route used
/// to cross-check the closed form.
double transducer_gain_fd(double flux, const CircuitParams& params,
                          double step = 1e-6);

/// Smallest resolvable flux for a given phase measurement noise:
/// noise / |gain|. Returns +inf where the gain vanishes.
double flux_sensitivity(double flux, const CircuitParams& params,
                        double phase_noise_deg);

/// Resonator bandwidth 1/(2*pi*z0*C) in Hz; independent of flux.
double bandwidth(const CircuitParams& params);

/// Largest reachable reflection-angle span on the monotone branch
/// [0, flux_clamp], in degrees.
double reachable_angle_span(const CircuitParams& params);

/// Invert the reflection angle on the monotone branch [0, flux_clamp]
/// by bisection. Throws ModelError if the phase is outside the branch.
double invert_reflection_angle(double phase_deg, const CircuitParams& params);

/// Continue a wrapped phase sweep by nearest-multiple-of-360 unwrapping,
/// seeded from the first element.
void unwrap_degrees_inplace(double* phase_deg, std::size_t n);

} // namespace fluxtrace::circuit
