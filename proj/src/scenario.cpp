#include "bfcsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "bfcsim/csv.hpp"
#include "bfcsim/svg.hpp"

namespace bfc {

// ---------------------------------------------------------------------------
// ParsedConfig
// ---------------------------------------------------------------------------

ParsedConfig ParsedConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_text(buffer.str(), path.string());
}

ParsedConfig ParsedConfig::parse_text(std::string_view text, std::string_view origin) {
    ParsedConfig config;
    config.origin_ = std::string(origin);
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        line = csv::trim(line);
        if (line.empty() || line.front() == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ValidationError(config.origin_ + ":" + std::to_string(line_no) +
                                  ": expected 'key = value'");
        }
        const std::string key{csv::trim(line.substr(0, eq))};
        const std::string value{csv::trim(line.substr(eq + 1))};
        if (key.empty()) {
            throw ValidationError(config.origin_ + ":" + std::to_string(line_no) + ": empty key");
        }
        if (!config.entries_.emplace(key, Entry{value, line_no}).second) {
            throw ValidationError(config.origin_ + ":" + std::to_string(line_no) +
                                  ": duplicate key '" + key + "'");
        }
    }
    return config;
}

bool ParsedConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

const ParsedConfig::Entry& ParsedConfig::require(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw ValidationError(origin_ + ": missing required key '" + key + "'");
    }
    it->second.used = true;
    return it->second;
}

void ParsedConfig::fail(const std::string& key, const std::string& message) const {
    const auto it = entries_.find(key);
    const std::string where =
        it == entries_.end() ? origin_ : origin_ + ":" + std::to_string(it->second.line);
    throw ValidationError(where + ": " + key + ": " + message);
}

std::string ParsedConfig::get_string(const std::string& key) const { return require(key).value; }

std::string ParsedConfig::get_string(const std::string& key, std::string fallback) const {
    if (!has(key)) return fallback;
    return require(key).value;
}

double ParsedConfig::get_double(const std::string& key) const {
    const Entry& e = require(key);
    try {
        return csv::parse_double(e.value);
    } catch (const std::exception&) {
        fail(key, "expected a number, got '" + e.value + "'");
    }
}

double ParsedConfig::get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    return get_double(key);
}

long long ParsedConfig::get_int(const std::string& key) const {
    const double v = get_double(key);
    if (std::abs(v - std::round(v)) > 1e-9) fail(key, "expected an integer");
    return static_cast<long long>(std::llround(v));
}

long long ParsedConfig::get_int(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    return get_int(key);
}

bool ParsedConfig::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = require(key).value;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(key, "expected true/false");
}

std::vector<double> ParsedConfig::get_double_list(const std::string& key) const {
    const Entry& e = require(key);
    std::vector<double> out;
    for (const auto& field : csv::split(e.value, ',')) {
        const auto t = csv::trim(field);
        if (t.empty()) fail(key, "empty element in list");
        try {
            out.push_back(csv::parse_double(t));
        } catch (const std::exception&) {
            fail(key, "expected a number, got '" + std::string(t) + "'");
        }
    }
    return out;
}

std::vector<std::string> ParsedConfig::unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [key, entry] : entries_) {
        if (!entry.used) out.push_back(key + " (line " + std::to_string(entry.line) + ")");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scenario loading
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> parse_output_list(const ParsedConfig& config, const std::string& key,
                                           std::string fallback) {
    std::vector<std::string> out;
    for (const auto& field : csv::split(config.get_string(key, std::move(fallback)), ',')) {
        const auto t = csv::trim(field);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

std::string sanitize(std::string_view label) {
    std::string out;
    for (char c : label) {
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    }
    return out;
}

void load_correlation(Scenario& s, const ParsedConfig& c) {
    const std::string mode = c.get_string("mode", "shared");
    if (mode == "shared") s.mode = GridMode::Shared;
    else if (mode == "distinct") s.mode = GridMode::Distinct;
    else c.fail("mode", "expected shared or distinct");

    s.dimension = static_cast<int>(c.get_int("dimension"));
    s.bin_spacing_hz = c.get_double("bin_spacing_hz", s.bin_spacing_hz);
    s.gamma_hz = c.get_double("gamma_hz", s.gamma_hz);
    s.fsr_hz = c.get_double("fsr_hz", s.fsr_hz);
    s.pump_frequency_hz = c.get_double("pump_frequency_hz", s.pump_frequency_hz);
    s.guard_factor = c.get_double("guard_factor", s.guard_factor);
    if (s.mode == GridMode::Distinct) {
        s.subcomb_separation_hz = c.get_double("subcomb_separation_hz", s.subcomb_separation_hz);
    }
    if (c.has("offset_bins")) s.offset_bins = c.get_double("offset_bins");

    const std::string method = c.get_string("method", "closed");
    if (method == "closed") s.method = WavepacketMethod::ClosedForm;
    else if (method == "quad") s.method = WavepacketMethod::Quadrature;
    else c.fail("method", "expected closed or quad");

    s.tau_half_range_s = c.get_double("tau_half_range_s", s.tau_half_range_s);
    s.tau_step_s = c.get_double("tau_step_s", s.tau_step_s);
    s.response_fwhm_s = c.get_double("response_fwhm_s", s.response_fwhm_s);
    s.bin_width_s = c.get_double("bin_width_s", s.bin_width_s);
    s.total_counts = c.get_int("total_counts", s.total_counts);
    s.noisy = c.get_bool("noisy", s.noisy);
    s.normalize = c.get_string("normalize", "family") == "family";
    s.plot_envelope = c.get_bool("plot_envelope", false);

    for (int i = 1;; ++i) {
        const std::string prefix = "curve." + std::to_string(i) + ".";
        if (!c.has(prefix + "signal_phases_rad") && !c.has(prefix + "label")) break;
        CurveSpec curve;
        curve.label = c.get_string(prefix + "label", "curve" + std::to_string(i));
        curve.signal_phases_rad = c.get_double_list(prefix + "signal_phases_rad");
        if (c.has(prefix + "idler_phases_rad")) {
            curve.idler_phases_rad = c.get_double_list(prefix + "idler_phases_rad");
        }
        s.curves.push_back(std::move(curve));
    }
    if (s.curves.empty()) {
        CurveSpec zero;
        zero.label = "zero_phase";
        zero.signal_phases_rad.assign(static_cast<std::size_t>(s.dimension), 0.0);
        s.curves.push_back(std::move(zero));
    }

    // Early validation with precise key paths.
    if (s.dimension < 1) c.fail("dimension", "must be >= 1");
    if (s.bin_spacing_hz <= 0.0) c.fail("bin_spacing_hz", "must be positive");
    if (s.gamma_hz <= 0.0) c.fail("gamma_hz", "must be positive");
    if (s.bin_spacing_hz < s.guard_factor * s.gamma_hz) {
        c.fail("bin_spacing_hz", "bins overlap: must be >= guard_factor * gamma_hz");
    }
    if (s.fsr_hz <= s.dimension * s.bin_spacing_hz) {
        c.fail("fsr_hz", "must exceed dimension * bin_spacing_hz");
    }
    if (s.tau_step_s > s.response_fwhm_s / 8.0) {
        c.fail("tau_step_s", "undersamples the response (must be <= response_fwhm_s / 8)");
    }
    if (s.bin_width_s < s.tau_step_s) c.fail("bin_width_s", "must be >= tau_step_s");
    if (s.total_counts <= 0) c.fail("total_counts", "must be positive");
    // Envelope tail plus response support must fit inside the grid so the
    // zero-outside convolution edges stay negligible.
    const double needed = 8.0 / hz_to_rad(s.gamma_hz) + 5.0 * fwhm_to_sigma(s.response_fwhm_s);
    if (s.tau_half_range_s < needed) {
        c.fail("tau_half_range_s", "too small: need >= 8/gamma + 5 sigma of the response (" +
                                       csv::format_double(needed) + " s)");
    }
    for (std::size_t i = 0; i < s.curves.size(); ++i) {
        const auto& curve = s.curves[i];
        const std::string prefix = "curve." + std::to_string(i + 1) + ".";
        if (curve.signal_phases_rad.size() != static_cast<std::size_t>(s.dimension)) {
            c.fail(prefix + "signal_phases_rad", "expected " + std::to_string(s.dimension) +
                                                     " entries");
        }
        if (!curve.idler_phases_rad.empty() &&
            curve.idler_phases_rad.size() != static_cast<std::size_t>(s.dimension)) {
            c.fail(prefix + "idler_phases_rad", "expected " + std::to_string(s.dimension) +
                                                    " entries");
        }
    }
}

void load_impulse_reference(Scenario& s, const ParsedConfig& c) {
    s.filter_width_hz = c.get_double("filter_width_hz", s.filter_width_hz);
    s.response_fwhm_s = c.get_double("response_fwhm_s", s.response_fwhm_s);
    s.tau_half_range_s = c.get_double("tau_half_range_s", 1e-9);
    s.tau_step_s = c.get_double("tau_step_s", 0.5e-12);
    if (s.filter_width_hz <= 0.0) c.fail("filter_width_hz", "must be positive");
    if (s.tau_step_s > s.response_fwhm_s / 8.0) {
        c.fail("tau_step_s", "undersamples the response (must be <= response_fwhm_s / 8)");
    }
}

void load_calibration(Scenario& s, const ParsedConfig& c) {
    const std::string layout = c.get_string("layout");
    if (layout == "shared") s.layout = CalibrationLayout::Shared;
    else if (layout == "distinct") s.layout = CalibrationLayout::Distinct;
    else c.fail("layout", "expected shared or distinct");

    s.dimension = static_cast<int>(c.get_int("dimension"));
    s.bin_spacing_hz = c.get_double("bin_spacing_hz", s.bin_spacing_hz);
    s.gamma_hz = c.get_double("gamma_hz", s.gamma_hz);
    s.fsr_hz = c.get_double("fsr_hz", s.fsr_hz);
    s.pump_frequency_hz = c.get_double("pump_frequency_hz", s.pump_frequency_hz);
    if (s.layout == CalibrationLayout::Distinct) {
        s.subcomb_separation_hz = c.get_double("subcomb_separation_hz", s.subcomb_separation_hz);
    }
    s.target_signal_phases_rad = c.get_double_list("target_signal_phases_rad");
    if (c.has("target_idler_phases_rad")) {
        s.target_idler_phases_rad = c.get_double_list("target_idler_phases_rad");
    }
    s.sample_rate_hz = c.get_double("sample_rate_hz", s.sample_rate_hz);
    s.duration_s = c.get_double("duration_s", s.duration_s);
    s.probe_rep_rate_hz = c.get_double("probe_rep_rate_hz", s.probe_rep_rate_hz);
    s.reference_rep_rate_hz = c.get_double("reference_rep_rate_hz", s.reference_rep_rate_hz);
    s.noise_rms_rad = c.get_double("noise_rms_rad", 0.0);
    s.pd_noise_rms_rel = c.get_double("pd_noise_rms_rel", 0.0);
    s.tolerance_rad = c.get_double("tolerance_rad", 1e-3);
    s.max_iterations = static_cast<int>(c.get_int("max_iterations", 20));
    s.damping = c.get_double("damping", 0.7);
    s.actuator_gain_rad = c.get_double("actuator_gain_rad", kTwoPi);
    s.random_actuator_offsets =
        c.get_string("actuator_offsets", "random") == "random";
    if (c.has("reference_channels")) {
        const auto ids = c.get_double_list("reference_channels");
        if (ids.size() != 2) c.fail("reference_channels", "expected two channel ids");
        s.reference_channels = {static_cast<int>(ids[0]), static_cast<int>(ids[1])};
    }

    if (s.dimension < 1) c.fail("dimension", "must be >= 1");
    if (s.target_signal_phases_rad.size() != static_cast<std::size_t>(s.dimension)) {
        c.fail("target_signal_phases_rad", "expected " + std::to_string(s.dimension) + " entries");
    }
    if (s.layout == CalibrationLayout::Distinct) {
        if (s.target_idler_phases_rad.size() != static_cast<std::size_t>(s.dimension)) {
            c.fail("target_idler_phases_rad",
                   "expected " + std::to_string(s.dimension) + " entries");
        }
    } else if (!s.target_idler_phases_rad.empty()) {
        // Shared layout derives the idler phases from the signal vector.
        c.fail("target_idler_phases_rad", "not allowed for the shared layout");
    }
    if (s.tolerance_rad <= 0.0) c.fail("tolerance_rad", "must be positive");
    if (s.max_iterations < 1) c.fail("max_iterations", "must be >= 1");
    if (s.damping <= 0.0 || s.damping > 1.0) c.fail("damping", "must be in (0, 1]");
    const double delta = s.reference_rep_rate_hz - s.probe_rep_rate_hz;
    if (delta <= 0.0) c.fail("reference_rep_rate_hz", "must exceed probe_rep_rate_hz");
    const double periods = s.duration_s * delta;
    if (std::abs(periods - std::round(periods)) > 1e-6 * std::max(1.0, periods)) {
        c.fail("duration_s", "must span a whole number of offset periods");
    }
}

}  // namespace

Scenario Scenario::load(const ParsedConfig& config) {
    Scenario s;
    const std::string kind = config.get_string("kind", "correlation");
    s.name = config.get_string("name");
    s.seed = static_cast<std::uint64_t>(config.get_int("seed", 1));

    if (kind == "correlation") {
        s.kind = Kind::Correlation;
        s.outputs = parse_output_list(config, "outputs",
                                      "histogram_csv,model_csv,plot_svg,metrics_csv,summary_txt");
        load_correlation(s, config);
    } else if (kind == "impulse_reference") {
        s.kind = Kind::ImpulseReference;
        s.outputs = parse_output_list(config, "outputs", "curve_csv,plot_svg,summary_txt");
        load_impulse_reference(s, config);
    } else if (kind == "calibration") {
        s.kind = Kind::Calibration;
        s.outputs = parse_output_list(config, "outputs", "report_csv,loop_csv,summary_txt");
        load_calibration(s, config);
    } else {
        config.fail("kind", "expected correlation, impulse_reference or calibration");
    }

    const auto leftovers = config.unused_keys();
    if (!leftovers.empty()) {
        std::string joined;
        for (const auto& k : leftovers) joined += (joined.empty() ? "" : ", ") + k;
        throw ValidationError(config.origin() + ": unknown keys: " + joined);
    }
    return s;
}

ShaperConfig Scenario::make_config(const CurveSpec& curve) const {
    const BiphotonSource pump = BiphotonSource::with_pump_hz(pump_frequency_hz);
    ShaperConfig config =
        mode == GridMode::Shared
            ? make_shared_grid(dimension, hz_to_rad(bin_spacing_hz), pump, hz_to_rad(fsr_hz),
                               hz_to_rad(gamma_hz), guard_factor)
            : make_distinct_grid(dimension, hz_to_rad(bin_spacing_hz),
                                 hz_to_rad(subcomb_separation_hz), pump, hz_to_rad(fsr_hz),
                                 hz_to_rad(gamma_hz), guard_factor);
    if (offset_bins) config = with_offset(config, *offset_bins);
    if (curve.idler_phases_rad.empty()) {
        config = apply_signal_phases(config, curve.signal_phases_rad);
    } else {
        config = apply_phases(config, curve.signal_phases_rad, curve.idler_phases_rad);
    }
    return config;
}

bool Scenario::wants(std::string_view output_kind) const {
    return std::find(outputs.begin(), outputs.end(), output_kind) != outputs.end();
}

// ---------------------------------------------------------------------------
// Runner helpers
// ---------------------------------------------------------------------------

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);  // '\n' line endings everywhere
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    return out;
}

Wavepacket compute_wavepacket(const Scenario& scenario, const ShaperConfig& config,
                              const TauGrid& grid) {
    if (scenario.method == WavepacketMethod::Quadrature) {
        return wavepacket_quadrature(config, config.source, grid);
    }
    return wavepacket_closed_form(config, grid);
}

struct NamedHistogram {
    std::string label;
    Histogram data;      // sampled (or expectation when noisy = false)
    Histogram expected;  // noiseless expectation through the same pipeline
};

}  // namespace

// ---------------------------------------------------------------------------
// run_scenario
// ---------------------------------------------------------------------------

RunResult run_scenario(const Scenario& scenario, const std::filesystem::path& out_dir) {
    if (scenario.kind == Scenario::Kind::Calibration) {
        throw ValidationError("run_scenario: calibration scenarios run via run_calibration");
    }
    std::filesystem::create_directories(out_dir);
    RunResult result;
    std::ostringstream summary;
    summary << "scenario " << scenario.name << " (bfcsim " << kVersion << ")\n";

    auto emit = [&](const std::filesystem::path& path) { result.written_files.push_back(path); };

    if (scenario.kind == Scenario::Kind::ImpulseReference) {
        const TauGrid grid = TauGrid::symmetric(scenario.tau_half_range_s, scenario.tau_step_s);
        const double width = hz_to_rad(scenario.filter_width_hz);
        const ImpulseResponse response = ImpulseResponse::gaussian(scenario.response_fwhm_s);
        const Wavepacket raw = rect_filter_reference(width, std::nullopt, grid);
        const Wavepacket convolved = rect_filter_reference(width, response, grid);

        const auto taus = grid.taus();
        const double fwhm_raw = fwhm_of(taus, raw.g2);
        const double fwhm_conv = fwhm_of(taus, convolved.g2);
        summary << "filter_width_hz = " << csv::format_double(scenario.filter_width_hz) << "\n"
                << "raw_fwhm_s = " << csv::format_double(fwhm_raw) << "\n"
                << "convolved_fwhm_s = " << csv::format_double(fwhm_conv) << "\n"
                << "response_fwhm_s = " << csv::format_double(scenario.response_fwhm_s) << "\n";

        if (scenario.wants("curve_csv")) {
            const auto path = out_dir / (scenario.name + "_curve.csv");
            auto out = open_output(path);
            out << "tau_s,g2_raw,g2_convolved\n";
            const double raw_peak = raw.peak_g2();
            const double conv_peak = convolved.peak_g2();
            for (std::size_t j = 0; j < taus.size(); ++j) {
                out << csv::format_double(taus[j]) << "," << csv::format_double(raw.g2[j] / raw_peak)
                    << "," << csv::format_double(convolved.g2[j] / conv_peak) << "\n";
            }
            emit(path);
        }
        if (scenario.wants("plot_svg")) {
            const auto path = out_dir / (scenario.name + ".svg");
            auto out = open_output(path);
            std::vector<PlotSeries> series(2);
            series[0].label = "filters only";
            series[1].label = "with response";
            for (std::size_t j = 0; j < taus.size(); ++j) {
                series[0].x.push_back(taus[j] * 1e12);
                series[0].y.push_back(raw.g2[j] / raw.peak_g2());
                series[1].x.push_back(taus[j] * 1e12);
                series[1].y.push_back(convolved.g2[j] / convolved.peak_g2());
            }
            write_line_plot_svg(out, scenario.name, "delay (ps)", "normalized coincidences",
                                series);
            emit(path);
        }
        if (scenario.wants("summary_txt")) {
            const auto path = out_dir / (scenario.name + "_summary.txt");
            auto out = open_output(path);
            out << summary.str();
            emit(path);
        }
        result.summary = summary.str();
        return result;
    }

    // Correlation pipeline.
    const TauGrid grid = TauGrid::symmetric(scenario.tau_half_range_s, scenario.tau_step_s);
    const ImpulseResponse response = ImpulseResponse::gaussian(scenario.response_fwhm_s);

    std::vector<NamedHistogram> curves;
    for (std::size_t i = 0; i < scenario.curves.size(); ++i) {
        const CurveSpec& spec = scenario.curves[i];
        const ShaperConfig config = scenario.make_config(spec);
        const Wavepacket g2 = compute_wavepacket(scenario, config, grid);
        const Wavepacket convolved = convolve_response(g2, response);
        NamedHistogram named;
        named.label = spec.label;
        named.expected = bin_and_sample(convolved, scenario.bin_width_s, scenario.total_counts,
                                        0, /*noisy=*/false);
        named.data = scenario.noisy
                         ? bin_and_sample(convolved, scenario.bin_width_s, scenario.total_counts,
                                          scenario.seed + i, /*noisy=*/true)
                         : named.expected;
        curves.push_back(std::move(named));
    }

    // Family normalization across curves (data and model separately).
    std::vector<Histogram> data_family, model_family;
    for (const auto& c : curves) {
        data_family.push_back(c.data);
        model_family.push_back(c.expected);
    }
    if (scenario.normalize) {
        data_family = normalize_family(std::move(data_family));
        model_family = normalize_family(std::move(model_family));
    }

    // Optional d = 1 envelope overlay through the same pipeline.
    std::optional<Histogram> envelope;
    if (scenario.plot_envelope) {
        Scenario env = scenario;
        env.dimension = 1;
        env.curves.clear();
        CurveSpec zero;
        zero.label = "envelope";
        zero.signal_phases_rad = {0.0};
        const ShaperConfig config = env.make_config(zero);
        const Wavepacket g2 = compute_wavepacket(env, config, grid);
        const Wavepacket convolved = convolve_response(g2, response);
        Histogram h = bin_and_sample(convolved, scenario.bin_width_s, scenario.total_counts, 0,
                                     /*noisy=*/false);
        envelope = normalize_family({std::move(h)}).front();
    }

    for (std::size_t i = 0; i < curves.size(); ++i) {
        const std::string stem = scenario.name + "_" + sanitize(curves[i].label);
        if (scenario.wants("histogram_csv")) {
            const auto path = out_dir / (stem + ".csv");
            auto out = open_output(path);
            write_histogram_csv(out, data_family[i], scenario.name + "/" + curves[i].label);
            emit(path);
        }
        if (scenario.wants("model_csv")) {
            const auto path = out_dir / (stem + "_model.csv");
            auto out = open_output(path);
            write_histogram_csv(out, model_family[i], scenario.name + "/" + curves[i].label);
            emit(path);
        }
    }

    // Metrics on the model curves (free of sampling noise); gamma fit on the
    // data when the scenario is a single-bin configuration.
    if (scenario.wants("metrics_csv")) {
        const auto path = out_dir / (scenario.name + "_metrics.csv");
        auto out = open_output(path);
        out << "curve,period_s,shift_s,contrast\n";
        const double window = 1.0 / hz_to_rad(scenario.gamma_hz);
        for (std::size_t i = 0; i < curves.size(); ++i) {
            if (scenario.dimension < 2) continue;
            const std::optional<Histogram> reference =
                i == 0 ? std::nullopt : std::optional<Histogram>(model_family[0]);
            const FringeMetrics metrics = fringe_metrics(model_family[i], reference, window);
            out << curves[i].label << "," << csv::format_double(metrics.period_s) << ","
                << csv::format_double(metrics.shift_s) << ","
                << csv::format_double(metrics.contrast) << "\n";
            summary << curves[i].label << ": period " << csv::format_double(metrics.period_s)
                    << " s, shift " << csv::format_double(metrics.shift_s) << " s, contrast "
                    << csv::format_double(metrics.contrast) << "\n";
        }
        emit(path);
    }
    if (scenario.dimension == 1 && scenario.wants("metrics_csv")) {
        const FitResult fit = fit_gamma(data_family.empty() ? curves[0].data : curves[0].data,
                                        response);
        const auto path = out_dir / (scenario.name + "_fit.csv");
        auto out = open_output(path);
        write_fit_report_csv(out, fit);
        emit(path);
        summary << "fit gamma_hz = " << csv::format_double(rad_to_hz(fit.gamma_rad_s))
                << (fit.converged ? "" : " (not converged)") << "\n";
    }

    if (scenario.wants("plot_svg")) {
        const auto path = out_dir / (scenario.name + ".svg");
        auto out = open_output(path);
        std::vector<PlotSeries> series;
        for (std::size_t i = 0; i < curves.size(); ++i) {
            PlotSeries data_series;
            data_series.label = curves[i].label;
            data_series.markers = scenario.noisy;
            for (std::size_t b = 0; b < data_family[i].counts.size(); ++b) {
                data_series.x.push_back(data_family[i].bin_centers_s[b] * 1e12);
                data_series.y.push_back(data_family[i].counts[b]);
            }
            series.push_back(std::move(data_series));
            if (scenario.noisy) {
                PlotSeries model_series;
                model_series.label = curves[i].label + " model";
                for (std::size_t b = 0; b < model_family[i].counts.size(); ++b) {
                    model_series.x.push_back(model_family[i].bin_centers_s[b] * 1e12);
                    model_series.y.push_back(model_family[i].counts[b]);
                }
                series.push_back(std::move(model_series));
            }
        }
        if (envelope) {
            PlotSeries env_series;
            env_series.label = "d=1 envelope";
            for (std::size_t b = 0; b < envelope->counts.size(); ++b) {
                env_series.x.push_back(envelope->bin_centers_s[b] * 1e12);
                env_series.y.push_back(envelope->counts[b]);
            }
            series.push_back(std::move(env_series));
        }
        write_line_plot_svg(out, scenario.name, "delay (ps)", "normalized coincidences", series);
        emit(path);
    }

    if (scenario.wants("summary_txt")) {
        const auto path = out_dir / (scenario.name + "_summary.txt");
        auto out = open_output(path);
        out << summary.str();
        emit(path);
    }
    result.summary = summary.str();
    return result;
}

// ---------------------------------------------------------------------------
// run_calibration
// ---------------------------------------------------------------------------

RunResult run_calibration(const Scenario& scenario, const std::filesystem::path& out_dir) {
    if (scenario.kind != Scenario::Kind::Calibration) {
        throw ValidationError("run_calibration: scenario kind must be calibration");
    }
    std::filesystem::create_directories(out_dir);
    RunResult result;

    const BiphotonSource pump = BiphotonSource::with_pump_hz(scenario.pump_frequency_hz);
    CalibrationBench bench;
    if (scenario.layout == CalibrationLayout::Shared) {
        bench.map = ChannelMap::shared(scenario.dimension);
        bench.shaper = make_shared_grid(scenario.dimension, hz_to_rad(scenario.bin_spacing_hz),
                                        pump, hz_to_rad(scenario.fsr_hz),
                                        hz_to_rad(scenario.gamma_hz));
    } else {
        bench.map = ChannelMap::distinct(scenario.dimension);
        bench.shaper = make_distinct_grid(scenario.dimension, hz_to_rad(scenario.bin_spacing_hz),
                                          hz_to_rad(scenario.subcomb_separation_hz), pump,
                                          hz_to_rad(scenario.fsr_hz),
                                          hz_to_rad(scenario.gamma_hz));
    }
    bench.probe_rep_rate_hz = scenario.probe_rep_rate_hz;
    bench.reference_rep_rate_hz = scenario.reference_rep_rate_hz;
    bench.sample_rate_hz = scenario.sample_rate_hz;
    bench.duration_s = scenario.duration_s;
    bench.pd_noise_rms_rel = scenario.pd_noise_rms_rel;
    if (scenario.reference_channels) bench.reference_ids = *scenario.reference_channels;

    // Targets in channel order.
    ShaperConfig target_config = bench.shaper;
    if (scenario.layout == CalibrationLayout::Shared) {
        target_config = apply_signal_phases(target_config, scenario.target_signal_phases_rad);
    } else {
        target_config = apply_phases(target_config, scenario.target_signal_phases_rad,
                                     scenario.target_idler_phases_rad);
    }
    const std::vector<double> target = bench.map.channel_phases(target_config);

    std::vector<PhaseActuator> actuators(static_cast<std::size_t>(bench.map.channel_count()));
    std::mt19937_64 rng(scenario.seed);
    std::uniform_real_distribution<double> uniform(0.0, kTwoPi);
    for (auto& a : actuators) {
        a.gain = scenario.actuator_gain_rad;
        a.offset = scenario.random_actuator_offsets ? uniform(rng) : 0.0;
    }

    ProgramOptions options;
    options.tolerance_rad = scenario.tolerance_rad;
    options.max_iterations = scenario.max_iterations;
    options.damping = scenario.damping;
    options.noise_rms_rad = scenario.noise_rms_rad;
    options.noise_seed = scenario.seed;
    const CalibrationRecord record = program_phases(bench, target, actuators, options);
    result.converged = record.converged;

    std::ostringstream summary;
    summary << "calibration " << scenario.name << " (bfcsim " << kVersion << ")\n"
            << "layout = " << (scenario.layout == CalibrationLayout::Shared ? "shared" : "distinct")
            << ", channels = " << bench.map.channel_count() << "\n"
            << "iterations = " << record.iterations << "\n"
            << "residual_rad = " << csv::format_double(record.residual_rad) << "\n"
            << "converged = " << (record.converged ? "yes" : "no") << "\n";

    if (scenario.wants("report_csv")) {
        const auto path = out_dir / (scenario.name + "_report.csv");
        auto out = open_output(path);
        write_calibration_report_csv(out, record, bench.map);
        result.written_files.push_back(path);
    }
    if (scenario.wants("loop_csv")) {
        const auto path = out_dir / (scenario.name + "_loop.csv");
        auto out = open_output(path);
        write_calibration_loop_csv(out, record);
        result.written_files.push_back(path);
    }
    if (scenario.wants("summary_txt")) {
        const auto path = out_dir / (scenario.name + "_summary.txt");
        auto out = open_output(path);
        out << summary.str();
        result.written_files.push_back(path);
    }
    result.summary = summary.str();
    return result;
}

} // namespace bfc
