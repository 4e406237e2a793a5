#include "corecox/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"corecox: two-stage transfer learning for multi-outcome Cox models"};
    app.require_subcommand(1);

    std::string config_path, out_dir, method, study = "both", source, target;
    int jobs = 1;

    auto* bench = app.add_subcommand("benchmark", "Repeated nested cross-validation of the configured methods");
    bench->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    bench->add_option("--out", out_dir, "Output directory");
    bench->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

    auto* fit = app.add_subcommand("fit", "Fit one method on the full target cohort and write a model file");
    fit->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    fit->add_option("--method", method, "Method name, e.g. CORE-Cox");
    fit->add_option("--out", out_dir, "Output directory");

    auto* sim = app.add_subcommand("simulate", "Coefficient-recovery and bootstrap-coverage studies");
    sim->add_option("--config", config_path, "Experiment config with a 'simulation' block")
        ->required()
        ->check(CLI::ExistingFile);
    sim->add_option("--study", study, "Which study to run")->check(CLI::IsMember({"recovery", "coverage", "both"}));
    sim->add_option("--out", out_dir, "Output directory");
    sim->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

    auto* val = app.add_subcommand("validate-data", "Check cohort CSV schema and report missingness");
    val->add_option("--source", source, "Source cohort CSV")->check(CLI::ExistingFile);
    val->add_option("--target", target, "Target cohort CSV")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);
    corecox::warnings_enabled() = true;

    try {
        if (*val) return corecox::cmd_validate_data(source, target, std::cout);
        const corecox::ExperimentConfig config = corecox::load_config(config_path);
        if (out_dir.empty()) out_dir = config.output_dir;
        if (out_dir.empty()) {
            std::cerr << "error: no output directory (use --out or output_dir in the config)\n";
            return 2;
        }
        if (*bench) return corecox::cmd_benchmark(config, out_dir, jobs, std::cout);
        if (*fit) return corecox::cmd_fit(config, method, out_dir, std::cout);
        if (*sim) return corecox::cmd_simulate(config, corecox::study_from_string(study), out_dir, jobs, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
