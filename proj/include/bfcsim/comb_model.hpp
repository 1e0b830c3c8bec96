// comb_model.hpp — frequency-bin grids and microring filter-bank transfer functions.
//
// A broadband photon-pair source centered at pump frequency w_p is carved by a
// bank of add-drop microring channels into d signal bins above w_p/2 and d
// idler bins below it. Bin centers are
//
//     w_k_signal = w_p/2 + (k + B) * dw      k = 1..d
//     w_k_idler  = w_p/2 - (k + B) * dw
//
// so that energy matching w_k_signal + w_k_idler = w_p holds exactly for every
// k. Each channel is the cascade of a download and an upload ring with equal
// resonance frequency; its amplitude response is the square of a complex
// Lorentzian of single-ring FWHM gamma:
//
//     H(w) = sum_k exp(i phi_k) / (gamma/2 + i (w - w_k))^2
//
// The squared line makes the two-ring intensity FWHM slightly narrower than
// gamma: delta_w = gamma * sqrt(sqrt(2) - 1) ~= 0.6436 gamma.
//
// Two channel-to-bin layouts are supported. Shared: signal and idler bins sit
// one FSR above/below the same physical rings, which couples their phases as
// phi_k_idler = phi_{d-k+1}_signal. Distinct: two subcombs on separate grids
// give fully independent signal/idler phase control.

#pragma once

#include <complex>
#include <span>
#include <vector>

#include "bfcsim/units.hpp"

namespace bfc {

// Two-ring intensity FWHM in units of the single-ring FWHM gamma.
inline const double kTwoRingFwhmFactor = std::sqrt(std::sqrt(2.0) - 1.0);

// Paper-style defaults used by the factories below.
inline constexpr double kDefaultPumpHz = 386.8e12;
inline constexpr double kDefaultGammaHz = 1.3e9;
inline constexpr double kDefaultFsrHz = 115e9;
inline constexpr double kDefaultGuardFactor = 2.0;

enum class Side { Signal, Idler };
enum class GridMode { Shared, Distinct };

// Flat-spectrum photon-pair source: spectral amplitude 1 with uniform phase
// over the modeled band.
struct BiphotonSource {
    double pump_frequency_rad_s = hz_to_rad(kDefaultPumpHz);

    static BiphotonSource with_pump_hz(double f_hz);

    double half_pump_rad_s() const { return 0.5 * pump_frequency_rad_s; }
    // Phi(Omega): constant by construction.
    double spectral_amplitude(double /*detuning_rad_s*/) const { return 1.0; }
};

struct ChannelGrid {
    int dimension = 0;                      // d
    double bin_spacing_rad_s = 0.0;         // dw
    double offset_bins = 0.0;               // B, in units of dw
    GridMode mode = GridMode::Shared;
    double subcomb_separation_rad_s = 0.0;  // center-to-center, Distinct only
};

// Immutable shaper configuration: grid + linewidth + per-channel phases.
// Phases are stored wrapped to [0, 2pi); Shared mode keeps the constraint
// phi_k_idler == phi_{d-k+1}_signal at all times.
struct ShaperConfig {
    ChannelGrid grid;
    BiphotonSource source;
    double gamma_rad_s = hz_to_rad(kDefaultGammaHz);  // single-ring FWHM
    double fsr_rad_s = hz_to_rad(kDefaultFsrHz);
    double guard_factor = kDefaultGuardFactor;        // require dw >= guard * gamma
    std::vector<double> signal_phases;                // rad, length d
    std::vector<double> idler_phases;                 // rad, length d
    double throughput_db = 13.0;  // insertion + coupling loss metadata; cancels
                                  // under the normalization used downstream

    int dimension() const { return grid.dimension; }
    GridMode mode() const { return grid.mode; }

    // Two-ring intensity FWHM delta_w = 0.6436 gamma (computed, not stored).
    double channel_fwhm_rad_s() const { return gamma_rad_s * kTwoRingFwhmFactor; }

    // Bin center frequency, k = 1..d.
    double bin_center_rad_s(Side side, int k) const;

    double phase(Side side, int k) const;  // k = 1..d

    // theta_k = phi_k_signal + phi_k_idler, the only phases surviving in the
    // biphoton wavepacket.
    std::vector<double> biphoton_phases() const;

    // Half-width of the band over which the single-resonance line model is
    // taken to be valid (covers all bins plus one FSR of slack).
    double band_half_width_rad_s() const;
};

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

// Shared layout: d bins per side carved one FSR away from the spectrum
// midpoint; B defaults to (fsr - d*dw/2)/dw and is adjustable via
// with_offset() since it only contributes an unobservable global phase.
ShaperConfig make_shared_grid(int dimension, double bin_spacing_rad_s,
                              const BiphotonSource& pump, double fsr_rad_s,
                              double gamma_rad_s = hz_to_rad(kDefaultGammaHz),
                              double guard_factor = kDefaultGuardFactor);

// Distinct layout: signal bins occupy the higher-frequency subcomb and idler
// bins the lower one, mirrored about w_p/2. The center-to-center separation
// must be a positive integer multiple of the bin spacing.
ShaperConfig make_distinct_grid(int dimension, double bin_spacing_rad_s,
                                double subcomb_separation_rad_s,
                                const BiphotonSource& pump, double fsr_rad_s,
                                double gamma_rad_s = hz_to_rad(kDefaultGammaHz),
                                double guard_factor = kDefaultGuardFactor);

// Copy with a different bin offset B (Shared-mode knob).
ShaperConfig with_offset(const ShaperConfig& config, double offset_bins);

// ---------------------------------------------------------------------------
// Phases
// ---------------------------------------------------------------------------

// Store new phase vectors (wrapped to [0, 2pi)). In Shared mode the pair is
// accepted only if phi_k_idler == phi_{d-k+1}_signal within 1e-12 rad
// (circularly); in Distinct mode the vectors are independent.
ShaperConfig apply_phases(const ShaperConfig& config,
                          std::span<const double> signal_phases_rad,
                          std::span<const double> idler_phases_rad);

// Shared-mode convenience: supply the signal vector only, the idler vector is
// derived from the shared-filter constraint. Also valid in Distinct mode,
// where it leaves the idler phases at zero.
ShaperConfig apply_signal_phases(const ShaperConfig& config,
                                 std::span<const double> signal_phases_rad);

// ---------------------------------------------------------------------------
// Transfer function
// ---------------------------------------------------------------------------

// Complex filter-bank response for one side at angular frequency omega.
// Un-normalized form peaks at 4/gamma^2 on resonance; peak_normalized scales
// so that |H| = 1 exactly on resonance in the nonoverlapping limit.
std::complex<double> transfer_function(const ShaperConfig& config, Side side,
                                       double omega_rad_s,
                                       bool peak_normalized = false);

namespace detail {
// Same sum without the band precondition; used by the wavepacket quadrature
// whose integration window deliberately extends past the band edge.
std::complex<double> transfer_sum(const ShaperConfig& config, Side side,
                                  double omega_rad_s);
}  // namespace detail

} // namespace bfc
