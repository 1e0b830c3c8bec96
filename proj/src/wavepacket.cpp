#include "bfcsim/wavepacket.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bfc {

// ---------------------------------------------------------------------------
// TauGrid
// ---------------------------------------------------------------------------

TauGrid TauGrid::symmetric(double half_width_s, double step_s) {
    TauGrid g{-half_width_s, half_width_s, step_s};
    g.validate();
    return g;
}

std::size_t TauGrid::size() const {
    return static_cast<std::size_t>(std::floor((stop_s - start_s) / step_s + 0.5)) + 1;
}

std::vector<double> TauGrid::taus() const {
    std::vector<double> t(size());
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = tau(j);
    return t;
}

void TauGrid::validate() const {
    if (step_s <= 0.0) throw std::invalid_argument("TauGrid: step must be positive");
    if (!(start_s < stop_s)) throw std::invalid_argument("TauGrid: start must precede stop");
    if (size() < 2) throw std::invalid_argument("TauGrid: at least two points required");
}

bool TauGrid::same_as(const TauGrid& other, double rel_tol) const {
    const double scale = std::max(std::abs(step_s), std::abs(other.step_s));
    return std::abs(start_s - other.start_s) <= rel_tol * scale &&
           std::abs(stop_s - other.stop_s) <= rel_tol * scale &&
           std::abs(step_s - other.step_s) <= rel_tol * scale;
}

// ---------------------------------------------------------------------------
// Wavepacket
// ---------------------------------------------------------------------------

Wavepacket Wavepacket::from_psi(const TauGrid& grid, std::vector<std::complex<double>> psi,
                                WavepacketMethod method) {
    grid.validate();
    if (psi.size() != grid.size()) {
        throw std::invalid_argument("Wavepacket: psi length does not match the tau grid");
    }
    Wavepacket w;
    w.grid = grid;
    w.g2.resize(psi.size());
    for (std::size_t j = 0; j < psi.size(); ++j) w.g2[j] = std::norm(psi[j]);
    w.psi = std::move(psi);
    w.method = method;
    return w;
}

Wavepacket Wavepacket::from_intensity(const TauGrid& grid, std::vector<double> g2,
                                      WavepacketMethod method) {
    grid.validate();
    if (g2.size() != grid.size()) {
        throw std::invalid_argument("Wavepacket: g2 length does not match the tau grid");
    }
    Wavepacket w;
    w.grid = grid;
    w.psi.resize(g2.size());
    for (std::size_t j = 0; j < g2.size(); ++j) {
        if (g2[j] < 0.0) throw std::invalid_argument("Wavepacket: g2 must be nonnegative");
        w.psi[j] = std::sqrt(g2[j]);
    }
    w.g2 = std::move(g2);
    w.method = method;
    return w;
}

double Wavepacket::peak_g2() const {
    return g2.empty() ? 0.0 : *std::max_element(g2.begin(), g2.end());
}

std::vector<double> Wavepacket::normalized_g2() const {
    const double peak = peak_g2();
    if (peak <= 0.0) throw std::runtime_error("Wavepacket: cannot normalize an all-zero curve");
    std::vector<double> out(g2.size());
    for (std::size_t j = 0; j < g2.size(); ++j) out[j] = g2[j] / peak;
    return out;
}

// ---------------------------------------------------------------------------
// Quadrature route
// ---------------------------------------------------------------------------

namespace {

// Composite-Simpson weights, n intervals (n even), including the step factor.
std::vector<double> simpson_weights(std::size_t n, double h) {
    std::vector<double> w(n + 1, 0.0);
    w[0] = w[n] = h / 3.0;
    for (std::size_t j = 1; j < n; ++j) w[j] = (j % 2 == 1 ? 4.0 : 2.0) * h / 3.0;
    return w;
}

}  // namespace

Wavepacket wavepacket_quadrature(const ShaperConfig& config, const BiphotonSource& source,
                                 const TauGrid& grid, const QuadratureOptions& options) {
    grid.validate();
    const double dw = config.grid.bin_spacing_rad_s;
    const double gamma = config.gamma_rad_s;
    const double window =
        (config.grid.dimension + config.grid.offset_bins) * dw + options.margin_linewidths * gamma;

    // Fine grid with n intervals, n a multiple of 4 so that every other sample
    // forms a valid Simpson grid for the step-halving check. The step must
    // resolve both the Lorentzian lineshape and the fastest phase rotation
    // W * tau_max of the Fourier factor.
    const double max_abs_tau = std::max(std::abs(grid.start_s), std::abs(grid.stop_s));
    const double target_step = std::min(gamma * options.step_fraction, 0.05 / max_abs_tau);
    std::size_t n = static_cast<std::size_t>(std::ceil(2.0 * window / target_step));
    n = ((n + 3) / 4) * 4;
    const double h = 2.0 * window / static_cast<double>(n);

    const double center = source.half_pump_rad_s();
    std::vector<std::complex<double>> integrand(n + 1);
    double max_mag = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
        const double detuning = -window + static_cast<double>(j) * h;
        const std::complex<double> value =
            source.spectral_amplitude(detuning) *
            detail::transfer_sum(config, Side::Signal, center + detuning) *
            detail::transfer_sum(config, Side::Idler, center - detuning);
        integrand[j] = value;
        max_mag = std::max(max_mag, std::abs(value));
    }
    if (max_mag <= 0.0) {
        throw std::runtime_error("wavepacket_quadrature: integrand vanishes on the window");
    }
    const double edge_mag = std::max(std::abs(integrand.front()), std::abs(integrand.back()));
    if (edge_mag > options.tail_rel * max_mag) {
        throw std::runtime_error(
            "wavepacket_quadrature: window too small (integrand tail above tolerance)");
    }

    const std::vector<double> w_fine = simpson_weights(n, h);
    const std::vector<double> w_coarse = simpson_weights(n / 2, 2.0 * h);

    // Weighted samples for the fine rule and its half-resolution counterpart.
    std::vector<std::complex<double>> fine(n + 1), coarse(n + 1, {0.0, 0.0});
    for (std::size_t j = 0; j <= n; ++j) fine[j] = integrand[j] * w_fine[j];
    for (std::size_t j = 0; j <= n; j += 2) coarse[j] = integrand[j] * w_coarse[j / 2];

    const std::size_t n_tau = grid.size();
    std::vector<std::complex<double>> psi(n_tau), psi_coarse(n_tau);

    // For each tau accumulate sum_j f_j exp(-i W_j tau) with a phase
    // recurrence along j, re-anchored periodically to bound rounding drift.
    constexpr std::size_t kReanchor = 512;
    for (std::size_t t = 0; t < n_tau; ++t) {
        const double tau = grid.tau(t);
        const std::complex<double> step_rot = std::polar(1.0, -h * tau);
        std::complex<double> rot = std::polar(1.0, window * tau);  // exp(-i(-window)tau)
        std::complex<double> acc_fine{0.0, 0.0}, acc_coarse{0.0, 0.0};
        for (std::size_t j = 0; j <= n; ++j) {
            if (j % kReanchor == 0) {
                rot = std::polar(1.0, -(-window + static_cast<double>(j) * h) * tau);
            }
            acc_fine += fine[j] * rot;
            acc_coarse += coarse[j] * rot;
            rot *= step_rot;
        }
        psi[t] = acc_fine;
        psi_coarse[t] = acc_coarse;
    }

    double peak = 0.0;
    for (const auto& v : psi) peak = std::max(peak, std::abs(v));
    double disagreement = 0.0;
    for (std::size_t t = 0; t < n_tau; ++t) {
        disagreement = std::max(disagreement, std::abs(psi[t] - psi_coarse[t]));
    }
    if (peak <= 0.0 || disagreement > options.convergence_rel * peak) {
        throw std::runtime_error(
            "wavepacket_quadrature: step-halving disagreement above tolerance");
    }

    return Wavepacket::from_psi(grid, std::move(psi), WavepacketMethod::Quadrature);
}

// ---------------------------------------------------------------------------
// Closed form
// ---------------------------------------------------------------------------

double closed_form_envelope(double gamma_rad_s, double tau_s) {
    if (gamma_rad_s <= 0.0) {
        throw std::invalid_argument("closed_form_envelope: gamma must be positive");
    }
    const double a = 0.5 * gamma_rad_s * std::abs(tau_s);
    return 4.0 * kPi / (gamma_rad_s * gamma_rad_s * gamma_rad_s) * (1.0 + a) * std::exp(-a);
}

Wavepacket wavepacket_closed_form(const ShaperConfig& config, const TauGrid& grid) {
    grid.validate();
    if (config.grid.bin_spacing_rad_s < config.guard_factor * config.gamma_rad_s) {
        throw std::invalid_argument(
            "wavepacket_closed_form: nonoverlap guard violated, closed form invalid");
    }
    const std::vector<double> theta = config.biphoton_phases();
    const double dw = config.grid.bin_spacing_rad_s;
    const std::size_t n_tau = grid.size();

    std::vector<std::complex<double>> psi(n_tau);
    for (std::size_t t = 0; t < n_tau; ++t) {
        const double tau = grid.tau(t);
        std::complex<double> sum{0.0, 0.0};
        for (std::size_t k = 0; k < theta.size(); ++k) {
            sum += std::polar(1.0, theta[k] - static_cast<double>(k + 1) * dw * tau);
        }
        psi[t] = closed_form_envelope(config.gamma_rad_s, tau) * sum;
    }
    return Wavepacket::from_psi(grid, std::move(psi), WavepacketMethod::ClosedForm);
}

double fringe_factor(std::span<const double> theta_rad, double delta_omega_rad_s, double tau_s) {
    if (theta_rad.empty()) {
        throw std::invalid_argument("fringe_factor: at least one channel required");
    }
    std::complex<double> sum{0.0, 0.0};
    for (std::size_t k = 0; k < theta_rad.size(); ++k) {
        sum += std::polar(1.0, theta_rad[k] - static_cast<double>(k + 1) * delta_omega_rad_s * tau_s);
    }
    return std::norm(sum);
}

double fringe_shift_prediction(double dphi_signal_rad, double dphi_idler_rad,
                               double delta_omega_rad_s) {
    if (delta_omega_rad_s == 0.0) {
        throw std::invalid_argument("fringe_shift_prediction: delta_omega must be nonzero");
    }
    return (dphi_signal_rad + dphi_idler_rad) / delta_omega_rad_s;
}

} // namespace bfc
