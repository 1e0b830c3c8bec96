#include <doctest.h>

#include <cmath>
#include <random>

#include "bfcsim/comb_model.hpp"

using namespace bfc;

namespace {

const BiphotonSource kPump = BiphotonSource::with_pump_hz(386.8e12);

ShaperConfig paper_shared(int d = 6) {
    return make_shared_grid(d, hz_to_rad(3e9), kPump, hz_to_rad(115e9), hz_to_rad(1.3e9));
}

ShaperConfig paper_distinct(int d = 3) {
    return make_distinct_grid(d, hz_to_rad(3e9), hz_to_rad(27e9), kPump, hz_to_rad(115e9),
                              hz_to_rad(1.3e9));
}

// Bisection on |H|^2 of a single channel to locate the half-max detuning;
// independent of the closed-form FWHM constant.
double measured_channel_fwhm(const ShaperConfig& config) {
    const double center = config.bin_center_rad_s(Side::Signal, 1);
    const double peak = std::norm(transfer_function(config, Side::Signal, center));
    auto above_half = [&](double detuning) {
        return std::norm(transfer_function(config, Side::Signal, center + detuning)) >
               0.5 * peak;
    };
    double lo = 0.0, hi = config.gamma_rad_s;
    while (above_half(hi)) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (above_half(mid) ? lo : hi) = mid;
    }
    return 2.0 * 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("shared grid reproduces the six-channel layout") {
    const ShaperConfig config = paper_shared(6);
    REQUIRE(config.dimension() == 6);
    for (int k = 1; k <= 6; ++k) {
        const double sum =
            config.bin_center_rad_s(Side::Signal, k) + config.bin_center_rad_s(Side::Idler, k);
        CHECK(sum == config.source.pump_frequency_rad_s);  // exact in construction arithmetic
        CHECK(config.bin_center_rad_s(Side::Signal, k) > config.source.half_pump_rad_s());
        CHECK(config.bin_center_rad_s(Side::Idler, k) < config.source.half_pump_rad_s());
    }
    // Bins straddle one FSR from the midpoint: the mean signal offset is
    // fsr + dw/2 with the default B.
    double mean_offset = 0.0;
    for (int k = 1; k <= 6; ++k) {
        mean_offset += config.bin_center_rad_s(Side::Signal, k) - config.source.half_pump_rad_s();
    }
    mean_offset /= 6.0;
    CHECK(mean_offset ==
          doctest::Approx(config.fsr_rad_s + 0.5 * config.grid.bin_spacing_rad_s).epsilon(1e-12));
}

TEST_CASE("shared grid capacity limits") {
    // 38 = floor(115/3) channels fit in one FSR.
    CHECK_NOTHROW(make_shared_grid(38, hz_to_rad(3e9), kPump, hz_to_rad(115e9)));
    CHECK_THROWS_AS(make_shared_grid(39, hz_to_rad(3e9), kPump, hz_to_rad(115e9)),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_shared_grid(1, -1.0, kPump, hz_to_rad(115e9)), std::invalid_argument);
    CHECK_THROWS_AS(make_shared_grid(0, hz_to_rad(3e9), kPump, hz_to_rad(115e9)),
                    std::invalid_argument);
    // Overlapping bins rejected by the guard.
    CHECK_THROWS_AS(make_shared_grid(6, hz_to_rad(2e9), kPump, hz_to_rad(115e9), hz_to_rad(1.3e9)),
                    std::invalid_argument);
}

TEST_CASE("d=1 shared grid is a mirrored single pair") {
    const ShaperConfig config = paper_shared(1);
    const double offset =
        config.bin_center_rad_s(Side::Signal, 1) - config.source.half_pump_rad_s();
    CHECK(offset == doctest::Approx((1.0 + config.grid.offset_bins) *
                                    config.grid.bin_spacing_rad_s));
    CHECK(config.bin_center_rad_s(Side::Idler, 1) ==
          doctest::Approx(config.source.half_pump_rad_s() - offset));
}

TEST_CASE("distinct grid geometry and preconditions") {
    const ShaperConfig config = paper_distinct(3);
    // 3 signal + 3 idler bins, energy matched, 27 GHz subcomb separation.
    for (int k = 1; k <= 3; ++k) {
        CHECK(config.bin_center_rad_s(Side::Signal, k) +
                  config.bin_center_rad_s(Side::Idler, k) ==
              config.source.pump_frequency_rad_s);
    }
    const double signal_center = 0.5 * (config.bin_center_rad_s(Side::Signal, 1) +
                                        config.bin_center_rad_s(Side::Signal, 3));
    const double idler_center = 0.5 * (config.bin_center_rad_s(Side::Idler, 1) +
                                       config.bin_center_rad_s(Side::Idler, 3));
    CHECK(signal_center - idler_center == doctest::Approx(hz_to_rad(27e9)).epsilon(1e-12));

    // Separation must be an integer multiple of the spacing.
    CHECK_THROWS_AS(make_distinct_grid(3, hz_to_rad(3e9), hz_to_rad(27.5e9), kPump,
                                       hz_to_rad(115e9)),
                    std::invalid_argument);
    // Subcombs may not overlap.
    CHECK_THROWS_AS(make_distinct_grid(3, hz_to_rad(3e9), hz_to_rad(6e9), kPump,
                                       hz_to_rad(115e9)),
                    std::invalid_argument);
    // d = 1 pair mirrored about the center at any separation >= spacing.
    const ShaperConfig single =
        make_distinct_grid(1, hz_to_rad(3e9), hz_to_rad(3e9), kPump, hz_to_rad(115e9));
    CHECK(single.bin_center_rad_s(Side::Signal, 1) - single.source.half_pump_rad_s() ==
          doctest::Approx(hz_to_rad(1.5e9)));
}

TEST_CASE("transfer function on-resonance value and phase") {
    // d = 1 is the exact nonoverlap limit: peak magnitude 4/gamma^2, phase 0.
    ShaperConfig single = paper_shared(1);
    const double gamma = single.gamma_rad_s;
    const double w1 = single.bin_center_rad_s(Side::Signal, 1);
    const auto h = transfer_function(single, Side::Signal, w1);
    CHECK(std::abs(h) == doctest::Approx(4.0 / (gamma * gamma)).epsilon(1e-12));
    CHECK(std::arg(h) == doctest::Approx(0.0).epsilon(1e-12));
    const auto hn = transfer_function(single, Side::Signal, w1, /*peak_normalized=*/true);
    CHECK(std::abs(hn) == doctest::Approx(1.0).epsilon(1e-12));

    // A channel phase passes straight through to the on-resonance response.
    single = apply_signal_phases(single, std::vector<double>{kPi / 2.0});
    const auto hp = transfer_function(single, Side::Signal, w1);
    CHECK(std::arg(hp) == doctest::Approx(kPi / 2.0).epsilon(1e-12));

    // At the 3 GHz / 1.3 GHz operating point neighboring channels contribute
    // a few-percent coherent crosstalk on resonance.
    const ShaperConfig bank = paper_shared(6);
    const auto hb = transfer_function(bank, Side::Signal,
                                      bank.bin_center_rad_s(Side::Signal, 1),
                                      /*peak_normalized=*/true);
    CHECK(std::abs(hb) == doctest::Approx(1.0).epsilon(0.1));
    CHECK(std::abs(std::arg(hb)) < 0.05);
}

TEST_CASE("two-ring FWHM equals 0.644 gamma") {
    const ShaperConfig config = paper_shared(1);
    const double fwhm = measured_channel_fwhm(config);
    CHECK(fwhm / config.gamma_rad_s == doctest::Approx(kTwoRingFwhmFactor).epsilon(1e-9));
    CHECK(kTwoRingFwhmFactor == doctest::Approx(0.6436).epsilon(2e-4));
    // Half maximum of |H|^2 at half the FWHM detuning.
    const double w1 = config.bin_center_rad_s(Side::Signal, 1);
    const double peak = std::norm(transfer_function(config, Side::Signal, w1));
    const double shifted =
        std::norm(transfer_function(config, Side::Signal, w1 + 0.5 * config.channel_fwhm_rad_s()));
    CHECK(shifted / peak == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("transfer mirror symmetry at zero phase") {
    const ShaperConfig config = paper_shared(3);
    const double center = config.source.half_pump_rad_s();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> detuning(-2.0 * config.fsr_rad_s / 3.0,
                                                    2.0 * config.fsr_rad_s / 3.0);
    for (int i = 0; i < 200; ++i) {
        const double d = detuning(rng);
        const auto hs = transfer_function(config, Side::Signal, center + d);
        const auto hi = transfer_function(config, Side::Idler, center - d);
        CHECK(std::abs(hs - std::conj(hi)) <= 1e-12 * std::abs(hs));
    }
}

TEST_CASE("transfer function rejects out-of-band queries") {
    const ShaperConfig config = paper_shared(6);
    const double far = config.source.half_pump_rad_s() + 3.0 * config.fsr_rad_s;
    CHECK_THROWS_AS(transfer_function(config, Side::Signal, far), std::invalid_argument);
}

TEST_CASE("apply_phases enforces the shared-filter constraint") {
    ShaperConfig config = paper_shared(3);

    // Palindromic vector: idler derived equals signal.
    config = apply_signal_phases(config, std::vector<double>{0.0, kPi / 2.0, 0.0});
    CHECK(config.idler_phases == std::vector<double>{0.0, kPi / 2.0, 0.0});

    // Valid reversed pair accepted.
    CHECK_NOTHROW(apply_phases(config, std::vector<double>{0.1, 0.2, 0.3},
                               std::vector<double>{0.3, 0.2, 0.1}));
    // Violating pair rejected (d = 2 case from the constraint definition).
    ShaperConfig pair = paper_shared(2);
    CHECK_THROWS_AS(apply_phases(pair, std::vector<double>{0.0, kPi / 2.0},
                                 std::vector<double>{0.0, kPi / 2.0}),
                    std::invalid_argument);
    // Length mismatch.
    CHECK_THROWS_AS(apply_phases(config, std::vector<double>{0.0}, std::vector<double>{0.0}),
                    std::invalid_argument);
}

TEST_CASE("distinct phases are independent and stored wrapped") {
    ShaperConfig config = paper_distinct(3);
    config = apply_phases(config, std::vector<double>{0.0, 0.0, 0.0},
                          std::vector<double>{0.0, kPi / 2.0, kPi});
    CHECK(config.idler_phases[1] == doctest::Approx(kPi / 2.0));
    CHECK(config.idler_phases[2] == doctest::Approx(kPi));
    // Any real value accepted, stored mod 2pi.
    config = apply_phases(config, std::vector<double>{-kPi / 2.0, 7.0 * kPi, 0.0},
                          std::vector<double>{0.0, 0.0, 0.0});
    CHECK(config.signal_phases[0] == doctest::Approx(3.0 * kPi / 2.0));
    CHECK(config.signal_phases[1] == doctest::Approx(kPi));
}

TEST_CASE("shared-constraint closure after apply_phases") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> phase(-10.0, 10.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 1 + static_cast<int>(rng() % 6);
        ShaperConfig config = paper_shared(d);
        std::vector<double> phases(static_cast<std::size_t>(d));
        for (auto& p : phases) p = phase(rng);
        config = apply_signal_phases(config, phases);
        for (int k = 1; k <= d; ++k) {
            CHECK(phase_distance(config.phase(Side::Idler, k),
                                 config.phase(Side::Signal, d - k + 1)) == 0.0);
        }
    }
}

TEST_CASE("offset knob preserves energy matching") {
    ShaperConfig config = with_offset(paper_shared(3), 2.25);
    CHECK(config.grid.offset_bins == 2.25);
    for (int k = 1; k <= 3; ++k) {
        CHECK(config.bin_center_rad_s(Side::Signal, k) +
                  config.bin_center_rad_s(Side::Idler, k) ==
              config.source.pump_frequency_rad_s);
    }
    CHECK_THROWS_AS(with_offset(config, -1.5), std::invalid_argument);
}
