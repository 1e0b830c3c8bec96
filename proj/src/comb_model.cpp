#include "bfcsim/comb_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bfc {

namespace {

constexpr double kPhaseConstraintTol = 1e-12;  // rad, circular
constexpr double kSpacingMultipleTol = 1e-9;   // relative

std::vector<double> wrapped(std::span<const double> phases) {
    std::vector<double> out(phases.size());
    for (std::size_t i = 0; i < phases.size(); ++i) out[i] = wrap_two_pi(phases[i]);
    return out;
}

void check_common(int dimension, double bin_spacing_rad_s, double gamma_rad_s,
                  double fsr_rad_s, double guard_factor, const char* where) {
    if (dimension < 1) {
        throw std::invalid_argument(std::string(where) + ": dimension must be >= 1");
    }
    if (bin_spacing_rad_s <= 0.0) {
        throw std::invalid_argument(std::string(where) + ": bin spacing must be positive");
    }
    if (gamma_rad_s <= 0.0) {
        throw std::invalid_argument(std::string(where) + ": gamma must be positive");
    }
    if (guard_factor <= 0.0) {
        throw std::invalid_argument(std::string(where) + ": guard factor must be positive");
    }
    if (bin_spacing_rad_s < guard_factor * gamma_rad_s) {
        throw std::invalid_argument(std::string(where) +
                                    ": bins overlap (bin spacing < guard * gamma)");
    }
    if (fsr_rad_s <= dimension * bin_spacing_rad_s) {
        throw std::invalid_argument(std::string(where) + ": fsr must exceed d * bin spacing");
    }
}

}  // namespace

BiphotonSource BiphotonSource::with_pump_hz(double f_hz) {
    if (f_hz <= 0.0) throw std::invalid_argument("BiphotonSource: pump frequency must be positive");
    return BiphotonSource{hz_to_rad(f_hz)};
}

double ShaperConfig::bin_center_rad_s(Side side, int k) const {
    if (k < 1 || k > grid.dimension) {
        throw std::out_of_range("bin_center_rad_s: channel index out of range");
    }
    const double offset = (k + grid.offset_bins) * grid.bin_spacing_rad_s;
    return side == Side::Signal ? source.half_pump_rad_s() + offset
                                : source.half_pump_rad_s() - offset;
}

double ShaperConfig::phase(Side side, int k) const {
    if (k < 1 || k > grid.dimension) {
        throw std::out_of_range("phase: channel index out of range");
    }
    return side == Side::Signal ? signal_phases[k - 1] : idler_phases[k - 1];
}

std::vector<double> ShaperConfig::biphoton_phases() const {
    std::vector<double> theta(signal_phases.size());
    for (std::size_t k = 0; k < theta.size(); ++k) {
        theta[k] = signal_phases[k] + idler_phases[k];
    }
    return theta;
}

double ShaperConfig::band_half_width_rad_s() const {
    const double outer_bin =
        (grid.dimension + grid.offset_bins) * grid.bin_spacing_rad_s;
    return fsr_rad_s + std::max(outer_bin, 0.0);
}

ShaperConfig make_shared_grid(int dimension, double bin_spacing_rad_s,
                              const BiphotonSource& pump, double fsr_rad_s,
                              double gamma_rad_s, double guard_factor) {
    check_common(dimension, bin_spacing_rad_s, gamma_rad_s, fsr_rad_s, guard_factor,
                 "make_shared_grid");
    const int capacity = static_cast<int>(std::floor(fsr_rad_s / bin_spacing_rad_s));
    if (dimension > capacity) {
        throw std::invalid_argument(
            "make_shared_grid: dimension exceeds channels-per-FSR capacity (" +
            std::to_string(capacity) + ")");
    }
    if (pump.pump_frequency_rad_s <= 0.0) {
        throw std::invalid_argument("make_shared_grid: pump frequency must be positive");
    }

    ShaperConfig config;
    config.grid.dimension = dimension;
    config.grid.bin_spacing_rad_s = bin_spacing_rad_s;
    config.grid.mode = GridMode::Shared;
    // Default B: bins straddle one FSR from the spectrum midpoint.
    config.grid.offset_bins =
        (fsr_rad_s - 0.5 * dimension * bin_spacing_rad_s) / bin_spacing_rad_s;
    config.source = pump;
    config.gamma_rad_s = gamma_rad_s;
    config.fsr_rad_s = fsr_rad_s;
    config.guard_factor = guard_factor;
    config.signal_phases.assign(static_cast<std::size_t>(dimension), 0.0);
    config.idler_phases.assign(static_cast<std::size_t>(dimension), 0.0);
    return config;
}

ShaperConfig make_distinct_grid(int dimension, double bin_spacing_rad_s,
                                double subcomb_separation_rad_s,
                                const BiphotonSource& pump, double fsr_rad_s,
                                double gamma_rad_s, double guard_factor) {
    check_common(dimension, bin_spacing_rad_s, gamma_rad_s, fsr_rad_s, guard_factor,
                 "make_distinct_grid");
    if (subcomb_separation_rad_s <= 0.0) {
        throw std::invalid_argument("make_distinct_grid: separation must be positive");
    }
    const double ratio = subcomb_separation_rad_s / bin_spacing_rad_s;
    if (std::abs(ratio - std::round(ratio)) > kSpacingMultipleTol * std::max(1.0, ratio)) {
        throw std::invalid_argument(
            "make_distinct_grid: separation is not an integer multiple of the bin spacing");
    }
    // Subcombs of d bins must not overlap across the spectrum center.
    if (std::llround(ratio) < dimension) {
        throw std::invalid_argument("make_distinct_grid: subcombs overlap");
    }
    if (pump.pump_frequency_rad_s <= 0.0) {
        throw std::invalid_argument("make_distinct_grid: pump frequency must be positive");
    }

    ShaperConfig config;
    config.grid.dimension = dimension;
    config.grid.bin_spacing_rad_s = bin_spacing_rad_s;
    config.grid.mode = GridMode::Distinct;
    config.grid.subcomb_separation_rad_s = subcomb_separation_rad_s;
    // Bin k sits at (k + B) dw above (below) the center; mirror symmetry about
    // the subcomb midpoint fixes B from the separation.
    config.grid.offset_bins = 0.5 * ratio - 0.5 * (dimension + 1);
    config.source = pump;
    config.gamma_rad_s = gamma_rad_s;
    config.fsr_rad_s = fsr_rad_s;
    config.guard_factor = guard_factor;
    config.signal_phases.assign(static_cast<std::size_t>(dimension), 0.0);
    config.idler_phases.assign(static_cast<std::size_t>(dimension), 0.0);
    return config;
}

ShaperConfig with_offset(const ShaperConfig& config, double offset_bins) {
    if ((1.0 + offset_bins) * config.grid.bin_spacing_rad_s <= 0.0) {
        throw std::invalid_argument("with_offset: first bin must stay above the spectrum center");
    }
    ShaperConfig out = config;
    out.grid.offset_bins = offset_bins;
    return out;
}

ShaperConfig apply_phases(const ShaperConfig& config,
                          std::span<const double> signal_phases_rad,
                          std::span<const double> idler_phases_rad) {
    const auto d = static_cast<std::size_t>(config.grid.dimension);
    if (signal_phases_rad.size() != d || idler_phases_rad.size() != d) {
        throw std::invalid_argument("apply_phases: phase vector length mismatch");
    }
    std::vector<double> sig = wrapped(signal_phases_rad);
    std::vector<double> idl = wrapped(idler_phases_rad);
    if (config.grid.mode == GridMode::Shared) {
        for (std::size_t k = 0; k < d; ++k) {
            if (phase_distance(idl[k], sig[d - 1 - k]) > kPhaseConstraintTol) {
                throw std::invalid_argument(
                    "apply_phases: shared-filter constraint violated "
                    "(phi_idler[k] must equal phi_signal[d-k+1])");
            }
        }
    }
    ShaperConfig out = config;
    out.signal_phases = std::move(sig);
    out.idler_phases = std::move(idl);
    return out;
}

ShaperConfig apply_signal_phases(const ShaperConfig& config,
                                 std::span<const double> signal_phases_rad) {
    const auto d = static_cast<std::size_t>(config.grid.dimension);
    if (signal_phases_rad.size() != d) {
        throw std::invalid_argument("apply_signal_phases: phase vector length mismatch");
    }
    ShaperConfig out = config;
    out.signal_phases = wrapped(signal_phases_rad);
    if (config.grid.mode == GridMode::Shared) {
        out.idler_phases.resize(d);
        for (std::size_t k = 0; k < d; ++k) {
            out.idler_phases[k] = out.signal_phases[d - 1 - k];
        }
    }
    return out;
}

namespace detail {

std::complex<double> transfer_sum(const ShaperConfig& config, Side side,
                                  double omega_rad_s) {
    const double half_gamma = 0.5 * config.gamma_rad_s;
    std::complex<double> sum{0.0, 0.0};
    for (int k = 1; k <= config.grid.dimension; ++k) {
        const double detuning = omega_rad_s - config.bin_center_rad_s(side, k);
        const std::complex<double> denom{half_gamma, detuning};
        sum += std::polar(1.0, config.phase(side, k)) / (denom * denom);
    }
    return sum;
}

}  // namespace detail

std::complex<double> transfer_function(const ShaperConfig& config, Side side,
                                       double omega_rad_s, bool peak_normalized) {
    const double center = config.source.half_pump_rad_s();
    if (std::abs(omega_rad_s - center) > config.band_half_width_rad_s()) {
        throw std::invalid_argument("transfer_function: omega outside the modeled band");
    }
    std::complex<double> h = detail::transfer_sum(config, side, omega_rad_s);
    if (peak_normalized) {
        const double half_gamma = 0.5 * config.gamma_rad_s;
        h *= half_gamma * half_gamma;
    }
    return h;
}

} // namespace bfc
