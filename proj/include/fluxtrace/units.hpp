#pragma once

#include <cmath>

namespace fluxtrace {

/// Magnetic flux quantum h/2e in Wb (CODATA, exact since the 2019 SI).
inline constexpr double kFluxQuantum = 2.0678338484619295e-15;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

inline constexpr double ns_to_s(double ns) { return ns * 1e-9; }
inline constexpr double s_to_ns(double s) { return s * 1e9; }

/// Wrap an angle in degrees to (-180, 180].
inline double wrap_deg(double deg) {
    double w = std::fmod(deg, 360.0);
    if (w <= -180.0) w += 360.0;
    if (w > 180.0) w -= 360.0;
    return w;
}

/// Wrap a flux in Phi0 units to [-0.5, 0.5]; flux is periodic in one quantum.
inline double wrap_flux(double flux) {
    double w = flux - std::round(flux);
    return w;
}

} // namespace fluxtrace
