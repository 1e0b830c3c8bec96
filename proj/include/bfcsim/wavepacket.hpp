// wavepacket.hpp — biphoton temporal wavepacket psi(tau) and G2(tau).
//
// Two evaluation routes for the same physical quantity:
//
//   Quadrature — numeric integral of the full product of complex transfer
//     functions,
//        psi(tau) = Int dW Phi(W) H_s(w_p/2 + W) H_i(w_p/2 - W) exp(-i W tau),
//     which keeps every Lorentzian amplitude and phase and therefore also the
//     coherent crosstalk between non-energy-matched bins.
//
//   ClosedForm — the nonoverlapping-bin limit, where all Lorentzian phases
//     cancel between the correlated bins and
//        psi(tau) = I(tau) * sum_k exp(i (theta_k - k dw tau)),
//        theta_k  = phi_k_signal + phi_k_idler,
//        I(tau)   = (4 pi / gamma^3) (1 + (gamma/2)|tau|) exp(-(gamma/2)|tau|)
//     (the analytic Fourier transform of 1/((gamma^2/4 + W^2)^2)).
//
// G2(tau) = |psi(tau)|^2 is proportional to the coincidence rate at
// signal-idler delay tau; overall flux is not tracked (arbitrary units).

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "bfcsim/comb_model.hpp"

namespace bfc {

struct TauGrid {
    double start_s = 0.0;
    double stop_s = 0.0;
    double step_s = 0.0;

    static TauGrid symmetric(double half_width_s, double step_s);
    // +/-2.5 ns at 1 ps, wide enough for every correlation window used here.
    static TauGrid standard() { return symmetric(2.5e-9, 1e-12); }

    std::size_t size() const;
    double tau(std::size_t j) const { return start_s + static_cast<double>(j) * step_s; }
    std::vector<double> taus() const;
    void validate() const;
    bool same_as(const TauGrid& other, double rel_tol = 1e-9) const;
};

enum class WavepacketMethod { Quadrature, ClosedForm };

struct Wavepacket {
    TauGrid grid;
    std::vector<std::complex<double>> psi;
    std::vector<double> g2;  // |psi|^2, elementwise
    WavepacketMethod method = WavepacketMethod::ClosedForm;

    static Wavepacket from_psi(const TauGrid& grid, std::vector<std::complex<double>> psi,
                               WavepacketMethod method);
    // For intensity-only curves (e.g. after detector convolution); psi is
    // backfilled as sqrt(g2) so the |psi|^2 invariant still holds.
    static Wavepacket from_intensity(const TauGrid& grid, std::vector<double> g2,
                                     WavepacketMethod method);

    double peak_g2() const;
    std::vector<double> normalized_g2() const;  // peak scaled to 1
};

struct QuadratureOptions {
    double margin_linewidths = 20.0;  // window margin beyond the outer bins, units of gamma
    double step_fraction = 1.0 / 50.0;  // integration step, units of gamma
    double convergence_rel = 1e-6;      // step-halving agreement on psi
    double tail_rel = 1e-5;             // max integrand magnitude allowed at the window edge
};

// Full numeric route. Throws if the window tail check or the step-halving
// convergence check fails.
Wavepacket wavepacket_quadrature(const ShaperConfig& config, const BiphotonSource& source,
                                 const TauGrid& grid, const QuadratureOptions& options = {});

// Nonoverlapping closed form (requires the config's nonoverlap guard).
Wavepacket wavepacket_closed_form(const ShaperConfig& config, const TauGrid& grid);

// Envelope I(tau) of the closed form.
double closed_form_envelope(double gamma_rad_s, double tau_s);

// Interference factor |sum_k exp(i(theta_k - k dw tau))|^2 multiplying
// I(tau)^2; theta_k = phi_k_signal + phi_k_idler.
double fringe_factor(std::span<const double> theta_rad, double delta_omega_rad_s, double tau_s);

// Fringe displacement under linear phases phi_k = (k-1) dphi on each side:
// delta_tau = (dphi_signal + dphi_idler) / dw.
double fringe_shift_prediction(double dphi_signal_rad, double dphi_idler_rad,
                               double delta_omega_rad_s);

} // namespace bfc
