#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "kdvlab/config.hpp"
#include "kdvlab/experiments.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t jobs = 1;
    bool force = false;
};

void report_invalid(const kdvlab::ConfigInvalid& e) {
    for (const auto& d : e.diagnostics()) std::cerr << "error: " << d << '\n';
}

int run_validate(const Flags& flags) {
    try {
        const auto config = kdvlab::load_config(flags.config);
        std::cout << "config ok: " << flags.config << '\n'
                  << "digest: " << kdvlab::config_digest(config) << '\n'
                  << kdvlab::to_json(config).dump(2) << '\n';
        return kdvlab::kExitOk;
    } catch (const kdvlab::ConfigInvalid& e) {
        report_invalid(e);
        return kdvlab::kExitConfigInvalid;
    } catch (const kdvlab::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kdvlab::kExitIoError;
    }
}

int run_experiment(kdvlab::ExperimentKind kind, const Flags& flags) {
    try {
        auto config = kdvlab::load_config(flags.config);
        if (config.experiment != kind) {
            throw kdvlab::ConfigInvalid({flags.config + ": experiment: config names '" +
                                         std::string(kdvlab::to_string(config.experiment)) +
                                         "' but the subcommand is '" + std::string(kdvlab::to_string(kind)) + "'"});
        }
        if (flags.seed) config.seed = *flags.seed;
        kdvlab::RunOptions options;
        options.out = flags.out;
        options.jobs = flags.jobs;
        options.force = flags.force;
        const auto result = kdvlab::run_experiment(config, options);
        std::cout << kdvlab::to_string(kind) << ": wrote " << result.files.size() << " files to " << result.out.string()
                  << " (digest " << result.digest << ")\n";
        return kdvlab::kExitOk;
    } catch (const kdvlab::ConfigInvalid& e) {
        report_invalid(e);
        return kdvlab::kExitConfigInvalid;
    } catch (const kdvlab::NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kdvlab::kExitNumericalFailure;
    } catch (const kdvlab::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kdvlab::kExitIoError;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kdvlab::kExitIoError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    kdvlab::configure_logging();

    CLI::App app{"KdV perturbation laboratory: averaging and equidistribution experiments"};
    app.require_subcommand(1);
    Flags flags;

    auto* validate = app.add_subcommand("validate", "Check a config file and print the resolved defaults");
    validate->add_option("--config", flags.config, "YAML config")->required()->check(CLI::ExistingFile);

    const std::pair<kdvlab::ExperimentKind, const char*> kinds[] = {
        {kdvlab::ExperimentKind::simulate, "Integrate one trajectory"},
        {kdvlab::ExperimentKind::spectrum, "Periodic spectrum and gap actions of the initial field"},
        {kdvlab::ExperimentKind::average, "Estimate the averaged field at the initial field"},
        {kdvlab::ExperimentKind::theorem_i, "Compare actions with the averaged solution across eps"},
        {kdvlab::ExperimentKind::theorem_ii, "Weyl statistics of the angles over an ensemble"},
        {kdvlab::ExperimentKind::quasi_invariance, "Rate of change of the measure density along Galerkin flows"},
        {kdvlab::ExperimentKind::galerkin_convergence, "Distance between Galerkin solutions of dimension m and 2m"},
    };
    std::vector<std::pair<CLI::App*, kdvlab::ExperimentKind>> commands;
    for (const auto& [kind, help] : kinds) {
        auto* cmd = app.add_subcommand(std::string(kdvlab::to_string(kind)), help);
        cmd->add_option("--config", flags.config, "YAML config")->required();
        cmd->add_option("--seed", flags.seed, "Override the config seed");
        cmd->add_option("--out", flags.out, "Output directory (default: config output)");
        cmd->add_option("--jobs", flags.jobs, "Worker threads")->check(CLI::PositiveNumber);
        cmd->add_flag("--force", flags.force, "Overwrite results stamped with another config digest");
        commands.emplace_back(cmd, kind);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kdvlab::kExitOk : kdvlab::kExitConfigInvalid;
    }

    if (validate->parsed()) return run_validate(flags);
    for (const auto& [cmd, kind] : commands) {
        if (cmd->parsed()) return run_experiment(kind, flags);
    }
    return kdvlab::kExitConfigInvalid;
}
