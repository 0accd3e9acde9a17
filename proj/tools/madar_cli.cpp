// Command-line front end: run experiment grids, validate configs, synthesize
// datasets, and aggregate results.
//
// Exit codes: 0 success, 1 bad configuration or arguments, 2 runtime failure.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "madar/madar.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_override, int workers) {
    madar::ExperimentConfig cfg = madar::load_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (workers > 0) cfg.workers = workers;

    const madar::ExperimentResult result = madar::run_experiment(cfg);
    for (const madar::RunOutcome& run : result.runs) {
        if (run.ok) {
            std::printf("run %zu  %-11s %-7s budget %-10s seed %-4llu  ap %.3f\n",
                        run.cell.index, madar::to_string(run.cell.strategy).c_str(),
                        madar::to_string(run.cell.budgeting).c_str(),
                        madar::detail::budget_field(run.cell.budget).c_str(),
                        static_cast<unsigned long long>(run.cell.seed), run.ap_bar);
        } else {
            std::printf("run %zu  FAILED: %s\n", run.cell.index, run.error.c_str());
        }
    }
    std::printf("results written to %s\n", result.output_dir.c_str());
    if (result.failures > 0) {
        std::fprintf(stderr, "%zu of %zu runs failed; see %s/failures.log\n", result.failures,
                     result.runs.size(), result.output_dir.c_str());
        return 2;
    }
    return 0;
}

int cmd_validate(const std::string& config_path) {
    const madar::ExperimentConfig cfg = madar::load_config(config_path);
    // Also make sure the stream section can actually materialize.
    if (!cfg.from_csv) {
        madar::validate_stream_spec(madar::make_stream_spec(cfg.stream));
    }
    std::printf("ok: %s (%zu runs, output %s)\n", cfg.name.c_str(), cfg.grid.num_runs(),
                cfg.output_dir.c_str());
    return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_path) {
    const madar::ExperimentConfig cfg = madar::load_config(config_path);
    if (cfg.from_csv) {
        throw madar::ConfigError("synth needs a synthetic stream section, not a csv source");
    }
    const madar::TaskStream stream =
        madar::generate_stream(madar::make_stream_spec(cfg.stream));
    madar::save_csv(stream, out_path);
    std::size_t rows = 0;
    for (const auto& t : stream.tasks) rows += t.train.size() + t.holdout.size();
    std::printf("wrote %zu rows over %d tasks to %s\n", rows, stream.num_tasks(),
                out_path.c_str());
    return 0;
}

int cmd_report(const std::string& results_dir) {
    const auto rows = madar::summarize_results(results_dir);
    madar::write_report(results_dir, rows);
    std::printf("%-10s %-11s %-8s %-10s %4s %10s %9s\n", "scenario", "strategy", "budgeting",
                "budget", "n", "mean_ap", "std_ap");
    for (const auto& r : rows) {
        std::printf("%-10s %-11s %-8s %-10s %4zu %10.3f %9.3f\n", r.scenario.c_str(),
                    r.strategy.c_str(), r.budgeting.c_str(), r.budget.c_str(), r.n, r.mean_ap,
                    r.std_ap);
    }
    std::printf("report written to %s/report.csv\n", results_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continual-learning experiments with distribution-aware replay"};
    app.require_subcommand(1);

    std::string run_config, run_out;
    int run_workers = 0;
    auto* run = app.add_subcommand("run", "Execute an experiment grid from a JSON config");
    run->add_option("config", run_config, "Experiment config (JSON)")->required();
    run->add_option("--out", run_out, "Override the output directory");
    run->add_option("--workers", run_workers, "Worker threads (default: config / hardware)");

    std::string validate_config;
    auto* validate = app.add_subcommand("validate", "Check a config without running it");
    validate->add_option("config", validate_config, "Experiment config (JSON)")->required();

    std::string synth_config, synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset CSV");
    synth->add_option("spec", synth_config, "Config whose stream section to synthesize")
        ->required();
    synth->add_option("-o,--out", synth_out, "Output CSV path")->required();

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Aggregate a results directory");
    report->add_option("results_dir", report_dir, "Directory holding summary.csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) return cmd_run(run_config, run_out, run_workers);
        if (validate->parsed()) return cmd_validate(validate_config);
        if (synth->parsed()) return cmd_synth(synth_config, synth_out);
        if (report->parsed()) return cmd_report(report_dir);
    } catch (const madar::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
