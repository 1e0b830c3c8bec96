// bfcsim command line: scenario runner for the microring biphoton shaper
// simulator. Exit codes: 0 success, 2 validation error, 3 non-convergence.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bfcsim/scenario.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string preset_name;
    std::string out_dir = "out";
    std::optional<long long> seed;
    std::string method;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_method) {
    cmd->add_option("--config", args.config_path, "scenario config file");
    cmd->add_option("--preset", args.preset_name, "built-in preset name (see 'presets')");
    cmd->add_option("--out", args.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--seed", args.seed, "override the scenario seed");
    if (with_method) {
        cmd->add_option("--method", args.method, "override the wavepacket method (quad|closed)")
            ->check(CLI::IsMember({"quad", "closed"}));
    }
}

bfc::Scenario load_scenario(const CommonArgs& args) {
    if (args.config_path.empty() == args.preset_name.empty()) {
        throw bfc::ValidationError("exactly one of --config or --preset is required");
    }
    bfc::ParsedConfig config =
        args.config_path.empty()
            ? [&] {
                  const bfc::Preset* preset = bfc::find_preset(args.preset_name);
                  if (!preset) {
                      throw bfc::ValidationError("unknown preset: " + args.preset_name);
                  }
                  return bfc::ParsedConfig::parse_text(preset->config_text,
                                                       "preset:" + preset->name);
              }()
            : bfc::ParsedConfig::parse_file(args.config_path);
    bfc::Scenario scenario = bfc::Scenario::load(config);
    if (args.seed) scenario.seed = static_cast<std::uint64_t>(*args.seed);
    if (args.method == "quad") scenario.method = bfc::WavepacketMethod::Quadrature;
    if (args.method == "closed") scenario.method = bfc::WavepacketMethod::ClosedForm;
    return scenario;
}

void report(const bfc::RunResult& result) {
    std::cout << result.summary;
    for (const auto& path : result.written_files) {
        std::cout << "wrote " << path.string() << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"microring biphoton pulse-shaper simulator"};
    app.require_subcommand(1);

    CommonArgs run_args;
    CLI::App* run_cmd = app.add_subcommand("run", "run a correlation or impulse-response scenario");
    add_common(run_cmd, run_args, /*with_method=*/true);

    CommonArgs cal_args;
    CLI::App* cal_cmd = app.add_subcommand("calibrate", "run a dual-comb calibration scenario");
    add_common(cal_cmd, cal_args, /*with_method=*/false);

    CLI::App* presets_cmd = app.add_subcommand("presets", "list built-in presets");
    CLI::App* version_cmd = app.add_subcommand("version", "print the version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (run_cmd->parsed()) {
            const bfc::Scenario scenario = load_scenario(run_args);
            if (scenario.kind == bfc::Scenario::Kind::Calibration) {
                throw bfc::ValidationError("calibration scenarios run via the 'calibrate' verb");
            }
            report(bfc::run_scenario(scenario, run_args.out_dir));
        } else if (cal_cmd->parsed()) {
            const bfc::Scenario scenario = load_scenario(cal_args);
            if (scenario.kind != bfc::Scenario::Kind::Calibration) {
                throw bfc::ValidationError("'calibrate' expects a calibration scenario");
            }
            const bfc::RunResult result = bfc::run_calibration(scenario, cal_args.out_dir);
            report(result);
            if (!result.converged) {
                std::cerr << "calibration did not converge within the iteration budget\n";
                return 3;
            }
        } else if (presets_cmd->parsed()) {
            for (const bfc::Preset& p : bfc::presets()) {
                std::printf("%-18s %s\n", p.name.c_str(), p.description.c_str());
            }
        } else if (version_cmd->parsed()) {
            std::cout << "bfcsim " << bfc::kVersion << "\n";
        }
    } catch (const bfc::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const bfc::ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
