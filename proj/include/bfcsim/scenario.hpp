// scenario.hpp — declarative scenario configs and the pipeline runner.
//
// Scenarios are flat key = value text files with explicit units in the key
// names (*_hz, *_s, *_rad). Three kinds are supported:
//   correlation       — comb-model -> wavepacket -> detection (-> analysis)
//   impulse_reference — rectangular-filter system-response measurement
//   calibration       — dual-comb phase measurement and programming loop
// Outputs are CSV files (canonical), SVG line plots and a text summary, all
// byte-identical across runs for a fixed seed.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bfcsim/analysis.hpp"
#include "bfcsim/calibration.hpp"

namespace bfc {

inline constexpr std::string_view kVersion = "1.0.0";

// Config or scenario validation failure (CLI exit code 2).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Numerical non-convergence (CLI exit code 3).
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Flat key = value config with per-key line tracking for diagnostics.
// ---------------------------------------------------------------------------

class ParsedConfig {
public:
    static ParsedConfig parse_file(const std::filesystem::path& path);
    static ParsedConfig parse_text(std::string_view text, std::string_view origin);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, std::string fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& key) const;

    // Keys that were never read; used to reject typos.
    std::vector<std::string> unused_keys() const;
    [[noreturn]] void fail(const std::string& key, const std::string& message) const;
    const std::string& origin() const { return origin_; }

private:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool used = false;
    };
    std::map<std::string, Entry> entries_;
    std::string origin_;

    const Entry& require(const std::string& key) const;
};

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

struct CurveSpec {
    std::string label;
    std::vector<double> signal_phases_rad;
    std::vector<double> idler_phases_rad;  // empty = derive (shared) or zeros (distinct)
};

struct Scenario {
    enum class Kind { Correlation, ImpulseReference, Calibration };

    Kind kind = Kind::Correlation;
    std::string name;
    std::vector<std::string> outputs;
    std::uint64_t seed = 1;

    // correlation
    GridMode mode = GridMode::Shared;
    int dimension = 1;
    double bin_spacing_hz = 3e9;
    double gamma_hz = kDefaultGammaHz;
    double fsr_hz = kDefaultFsrHz;
    double pump_frequency_hz = kDefaultPumpHz;
    double subcomb_separation_hz = 27e9;
    double guard_factor = kDefaultGuardFactor;
    std::optional<double> offset_bins;
    WavepacketMethod method = WavepacketMethod::ClosedForm;
    double tau_half_range_s = 2.5e-9;
    double tau_step_s = 1e-12;
    double response_fwhm_s = kDefaultResponseFwhmS;
    double bin_width_s = kDefaultBinWidthS;
    long long total_counts = 100000;
    bool noisy = true;
    bool normalize = true;  // family normalization of the emitted curves
    bool plot_envelope = false;  // overlay the d = 1 envelope curve
    std::vector<CurveSpec> curves;

    // impulse_reference
    double filter_width_hz = 50e9;

    // calibration
    CalibrationLayout layout = CalibrationLayout::Shared;
    std::vector<double> target_signal_phases_rad;
    std::vector<double> target_idler_phases_rad;
    double sample_rate_hz = kDefaultSampleRateHz;
    double duration_s = kDefaultRecordDurationS;
    double probe_rep_rate_hz = kDefaultProbeRepRateHz;
    double reference_rep_rate_hz = kDefaultReferenceRepRateHz;
    double noise_rms_rad = 0.0;
    double pd_noise_rms_rel = 0.0;
    double tolerance_rad = 1e-3;
    int max_iterations = 20;
    double damping = 0.7;
    double actuator_gain_rad = kTwoPi;
    bool random_actuator_offsets = true;
    std::optional<std::pair<int, int>> reference_channels;

    static Scenario load(const ParsedConfig& config);
    // Shaper configuration for one curve of a correlation scenario.
    ShaperConfig make_config(const CurveSpec& curve) const;
    bool wants(std::string_view output_kind) const;
};

struct RunResult {
    std::vector<std::filesystem::path> written_files;
    bool converged = true;
    std::string summary;
};

// Execute a correlation or impulse_reference scenario; writes the requested
// artifacts into out_dir and returns the file list plus a text summary.
RunResult run_scenario(const Scenario& scenario, const std::filesystem::path& out_dir);

// Execute a calibration scenario. Artifacts are written even when the loop
// fails to converge; convergence is reported in the result.
RunResult run_calibration(const Scenario& scenario, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

struct Preset {
    std::string name;
    std::string description;
    std::string config_text;
};

const std::vector<Preset>& presets();
const Preset* find_preset(std::string_view name);

} // namespace bfc
