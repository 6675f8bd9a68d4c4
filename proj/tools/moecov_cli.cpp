// Experiment runner: baseline kernel benchmarking, kernel evolution, and
// transfer of archived kernels onto other datasets.
//
// Exit codes: 0 success, 1 usage/config error, 2 data or I/O error,
// 3 every evaluation cell failed (report still written).

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "moecov/experiment.hpp"

namespace {

std::vector<moecov::BaselineKind> parse_kernel_list(const std::vector<std::string>& names) {
    std::vector<moecov::BaselineKind> out;
    for (const auto& n : names) {
        auto k = moecov::baseline_from_name(n);
        if (!k) throw std::invalid_argument("unknown kernel: " + n);
        out.push_back(*k);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-process kernel search over sentence embeddings"};
    app.set_config("--config", "", "Read options from an INI/TOML file");

    std::string mode = "baseline";
    moecov::ExperimentConfig cfg;
    std::vector<std::string> kernel_names;
    std::string missing_words = "zero";
    bool fixed_clock = false;
    int jobs = 1;

    app.add_option("--mode", mode, "baseline, evolve, or transfer")
        ->check(CLI::IsMember({"baseline", "evolve", "transfer"}))
        ->capture_default_str();
    app.add_option("--data", cfg.data_paths, "Dataset file(s): TSV with id, text, emotion columns")
        ->required();
    app.add_option("--emotion", cfg.emotion,
                   "Emotion column (anger, disgust, fear, joy, sadness, surprise)")
        ->capture_default_str();
    app.add_option("--embeddings", cfg.embeddings_path,
                   "Word-embedding text file (word followed by d values per line)")
        ->required();
    app.add_option("--folds", cfg.k_outer_folds, "Outer cross-validation folds")
        ->capture_default_str();
    app.add_option("--reps", cfg.repetitions, "Evolution repetitions per fold")
        ->capture_default_str();
    app.add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
    app.add_option("--out", cfg.out_dir, "Output directory for the report")->required();
    app.add_option("--kernels", kernel_names,
                   "Baseline kernels (SE M32 M52 RQ E EG PER LIN CON WN)")
        ->delimiter(',');
    app.add_option("--archive", cfg.archive_path, "Archive JSONL to transfer from");
    app.add_option("--fold-file", cfg.fold_file,
                   "Fixed fold assignment file (index<TAB>fold; single dataset only)");
    app.add_option("--missing-words", missing_words,
                   "Words absent from the embedding table: zero (count a zero vector) or drop")
        ->check(CLI::IsMember({"zero", "drop"}))
        ->capture_default_str();
    app.add_flag("--force", cfg.force, "Overwrite an existing report in --out");
    app.add_flag("--fixed-clock", fixed_clock,
                 "Deterministic counter clock instead of wall time (reproducible timings)");
    app.add_option("--jobs", jobs, "Worker limit for independent cells (currently sequential)")
        ->check(CLI::PositiveNumber);

    app.add_option("--pop-size", cfg.moecov.population_size, "Offspring per generation")
        ->capture_default_str();
    app.add_option("--generations", cfg.moecov.generations, "Generations per run")
        ->capture_default_str();
    app.add_option("--parents", cfg.moecov.num_parents, "Survivors kept each generation")
        ->capture_default_str();
    app.add_option("--p-mutation", cfg.moecov.p_mutation, "Mutation probability")
        ->capture_default_str();
    app.add_option("--p-crossover", cfg.moecov.p_crossover, "Crossover probability")
        ->capture_default_str();
    app.add_option("--restart-threshold", cfg.moecov.restart_threshold,
                   "Relative-improvement floor before a restart")
        ->capture_default_str();
    app.add_option("--max-depth", cfg.moecov.grammar.max_depth, "Expression depth cap")
        ->capture_default_str();
    app.add_option("--inner-folds", cfg.moecov.fitness.k_folds, "Fitness cross-validation folds")
        ->capture_default_str();
    app.add_option("--budget", cfg.moecov.fitness.budget.max_lml_evals,
                   "Likelihood evaluations allowed per hyperparameter fit")
        ->capture_default_str();
    app.add_flag("--select-by-bic", cfg.moecov.select_by_bic,
                 "Pick the final kernel by BIC instead of mean training likelihood");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        cfg.mode = moecov::run_mode_from_name(mode);
        cfg.missing_words = missing_words == "drop" ? moecov::MissingWordPolicy::Drop
                                                    : moecov::MissingWordPolicy::ZeroVector;
        if (!kernel_names.empty()) cfg.kernels = parse_kernel_list(kernel_names);
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    moecov::Clock clock = fixed_clock ? moecov::counter_clock(1e-3) : moecov::wall_clock();
    (void)jobs;  // accepted for forward compatibility; cells run in a fixed order

    try {
        moecov::RunReport report = moecov::run_experiment(cfg, clock);
        moecov::emit_report(report, cfg.out_dir, cfg.force);

        int ok = 0;
        for (const auto& r : report.results)
            if (r.status == "ok") ++ok;
        std::cerr << "wrote " << cfg.out_dir << ": " << report.results.size() << " rows, " << ok
                  << " ok\n";
        for (const auto& a : report.aggregates)
            std::cout << a.dataset << '\t' << a.group << "\tpcc=" << a.mean_pcc
                      << "\tnlpd=" << a.mean_nlpd << "\t(" << a.n_ok << " ok, " << a.n_failed
                      << " failed)\n";
        if (!report.results.empty() && ok == 0) {
            std::cerr << "error: every evaluation cell failed\n";
            return 3;
        }
        return 0;
    } catch (const moecov::FormatError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
