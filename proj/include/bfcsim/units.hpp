// units.hpp — angular/ordinary frequency conversions and phase arithmetic.
//
// Conventions used throughout:
//   - optical and RF frequencies named *_hz are ordinary frequencies (Hz)
//   - quantities named *_rad_s are angular frequencies (rad/s)
//   - delays and durations named *_s are seconds
//   - phases are radians; storage is wrapped to [0, 2pi), comparisons are
//     circular (distance on the unit circle)

#pragma once

#include <cmath>

namespace bfc {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

inline constexpr double hz_to_rad(double f_hz) { return kTwoPi * f_hz; }
inline constexpr double rad_to_hz(double w_rad_s) { return w_rad_s / kTwoPi; }

// Wrap into [0, 2pi).
inline double wrap_two_pi(double phase_rad) {
    double w = std::fmod(phase_rad, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    // fmod of a negative value can round back up to 2pi exactly
    if (w >= kTwoPi) w -= kTwoPi;
    return w;
}

// Wrap into (-pi, pi].
inline double wrap_pi(double phase_rad) {
    double w = std::fmod(phase_rad, kTwoPi);
    if (w > kPi) w -= kTwoPi;
    if (w <= -kPi) w += kTwoPi;
    return w;
}

// Circular distance between two phases, in [0, pi].
inline double phase_distance(double a_rad, double b_rad) {
    return std::abs(wrap_pi(a_rad - b_rad));
}

// Gaussian FWHM <-> standard deviation.
inline double fwhm_to_sigma(double fwhm) { return fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0))); }
inline double sigma_to_fwhm(double sigma) { return sigma * (2.0 * std::sqrt(2.0 * std::log(2.0))); }

} // namespace bfc
