#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "moecov/archive.hpp"
#include "moecov/data.hpp"
#include "moecov/evolution.hpp"

namespace moecov {

enum class RunMode { Baseline, Evolve, Transfer };

inline const char* run_mode_name(RunMode m) {
    switch (m) {
        case RunMode::Baseline: return "baseline";
        case RunMode::Evolve: return "evolve";
        case RunMode::Transfer: return "transfer";
    }
    return "?";
}

inline RunMode run_mode_from_name(const std::string& s) {
    if (s == "baseline") return RunMode::Baseline;
    if (s == "evolve") return RunMode::Evolve;
    if (s == "transfer") return RunMode::Transfer;
    throw std::invalid_argument("unknown mode: " + s);
}

struct ExperimentConfig {
    RunMode mode = RunMode::Baseline;
    std::vector<std::string> data_paths;
    std::string emotion = "fear";
    std::string embeddings_path;
    int k_outer_folds = 10;
    int repetitions = 30;
    std::vector<BaselineKind> kernels{kAllBaselines.begin(), kAllBaselines.end()};
    std::string archive_path;       ///< transfer source
    std::string fold_file;          ///< optional fixed fold assignment (single dataset)
    MissingWordPolicy missing_words = MissingWordPolicy::ZeroVector;
    MOECovConfig moecov;
    std::string out_dir;
    bool force = false;
    std::uint64_t seed = 0;

    void validate() const {
        if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
        if (k_outer_folds < 2) throw std::invalid_argument("k_outer_folds must be >= 2");
        if (data_paths.empty()) throw std::invalid_argument("at least one dataset is required");
        if (mode == RunMode::Baseline && kernels.empty())
            throw std::invalid_argument("baseline mode needs a kernel list");
        if (mode == RunMode::Transfer && archive_path.empty())
            throw std::invalid_argument("transfer mode needs an archive");
        if (mode == RunMode::Evolve) moecov.validate();
    }
};

struct NamedDataset {
    std::string name;
    Dataset data;
};

// ---------------------------------------------------------------------------
// report structure

struct ResultRow {
    std::string dataset;
    std::string group;    ///< aggregation key: kernel name, "evolved", or archive entry
    std::string kernel;   ///< human-readable kernel (name or expression)
    int repetition = 0;   ///< archive entry index in transfer mode
    int fold = 0;         ///< -1 for errors not tied to a fold
    std::string status;   ///< "ok" or "failed"
    double pcc = std::numeric_limits<double>::quiet_NaN();
    double nlpd = std::numeric_limits<double>::quiet_NaN();
    std::string note;
};

struct AggregateRow {
    std::string dataset;
    std::string group;
    double mean_pcc = std::numeric_limits<double>::quiet_NaN();
    double mean_nlpd = std::numeric_limits<double>::quiet_NaN();
    int n_ok = 0;
    int n_failed = 0;
};

/// One archived kernel plus the provenance needed to reuse it elsewhere.
struct ArchiveEntry {
    std::string dataset;
    int repetition = 0;
    int fold = 0;
    int dim = 0;  ///< embedding dimension the hyperparameters were fit in
    EvaluatedIndividual ind;
};

struct RunReport {
    RunMode mode = RunMode::Baseline;
    std::vector<std::pair<std::string, std::string>> config_echo;
    std::vector<ResultRow> results;
    std::vector<AggregateRow> aggregates;
    std::vector<ArchiveEntry> archive;
    std::vector<std::pair<std::string, FoldAssignment>> folds;
    long optimizer_evals = 0;  ///< LML evaluations spent on the runner's own fits
    double wall_seconds = 0;
};

/// Means over the ok rows of each (dataset, group), in first-appearance order.
inline std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow>& rows) {
    std::vector<AggregateRow> out;
    std::map<std::pair<std::string, std::string>, std::size_t> index;
    for (const auto& r : rows) {
        auto key = std::make_pair(r.dataset, r.group);
        auto it = index.find(key);
        if (it == index.end()) {
            index.emplace(key, out.size());
            out.push_back(AggregateRow{r.dataset, r.group, 0.0, 0.0, 0, 0});
            it = index.find(key);
        }
        AggregateRow& agg = out[it->second];
        if (r.status == "ok") {
            agg.mean_pcc += r.pcc;
            agg.mean_nlpd += r.nlpd;
            ++agg.n_ok;
        } else {
            ++agg.n_failed;
        }
    }
    for (auto& agg : out) {
        if (agg.n_ok > 0) {
            agg.mean_pcc /= agg.n_ok;
            agg.mean_nlpd /= agg.n_ok;
        } else {
            agg.mean_pcc = std::numeric_limits<double>::quiet_NaN();
            agg.mean_nlpd = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// loading

namespace detail {

inline std::string dataset_name(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

inline Dataset subset(const Dataset& d, const std::vector<int>& idx) {
    Dataset out;
    out.emotion = d.emotion;
    out.X.resize(static_cast<Eigen::Index>(idx.size()), d.X.cols());
    out.y.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.ids.push_back(d.ids[static_cast<std::size_t>(idx[i])]);
        out.X.row(static_cast<Eigen::Index>(i)) = d.X.row(idx[i]);
        out.y[static_cast<Eigen::Index>(i)] = d.y[idx[i]];
    }
    return out;
}

inline std::vector<int> train_indices(const FoldAssignment& fa, int test_fold) {
    std::vector<int> out;
    for (std::size_t i = 0; i < fa.fold_of.size(); ++i)
        if (fa.fold_of[i] != test_fold) out.push_back(static_cast<int>(i));
    return out;
}

inline std::string sanitize_note(std::string s) {
    for (char& c : s)
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    return s;
}

}  // namespace detail

inline std::vector<NamedDataset> load_inputs(const ExperimentConfig& cfg) {
    std::ifstream emb(cfg.embeddings_path);
    if (!emb) throw FormatError("cannot open embeddings: " + cfg.embeddings_path, 0);
    EmbeddingTable table = load_embeddings(emb);
    std::vector<NamedDataset> out;
    for (const auto& path : cfg.data_paths) {
        std::ifstream in(path);
        if (!in) throw FormatError("cannot open dataset: " + path, 0);
        out.push_back(NamedDataset{detail::dataset_name(path),
                                   load_dataset(in, table, cfg.emotion, cfg.missing_words)});
    }
    return out;
}

namespace detail {

inline FoldAssignment folds_for(const ExperimentConfig& cfg, const NamedDataset& nd,
                                std::size_t dataset_index) {
    if (!cfg.fold_file.empty()) {
        std::ifstream in(cfg.fold_file);
        if (!in) throw FormatError("cannot open fold file: " + cfg.fold_file, 0);
        FoldAssignment fa = load_folds(in);
        if (fa.fold_of.size() != static_cast<std::size_t>(nd.data.n()))
            throw FormatError("fold file does not match dataset " + nd.name, 0);
        return fa;
    }
    return make_folds(static_cast<int>(nd.data.n()), cfg.k_outer_folds,
                      derive_seed(cfg.seed, 4000, dataset_index));
}

inline void echo_config(RunReport& rep, const ExperimentConfig& cfg,
                        const std::vector<NamedDataset>& inputs) {
    rep.config_echo.emplace_back("mode", run_mode_name(cfg.mode));
    rep.config_echo.emplace_back("emotion", cfg.emotion);
    rep.config_echo.emplace_back("k_outer_folds", std::to_string(cfg.k_outer_folds));
    rep.config_echo.emplace_back("repetitions", std::to_string(cfg.repetitions));
    rep.config_echo.emplace_back("seed", std::to_string(cfg.seed));
    std::string names;
    for (const auto& nd : inputs) {
        if (!names.empty()) names += ';';
        names += nd.name;
    }
    rep.config_echo.emplace_back("datasets", names);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// the three run modes

/// Tuned fixed-form kernels: per (dataset, kernel, fold), hyperparameters are
/// optimized on the training part under the shared evaluation budget and the
/// posterior is scored on the held-out part.
inline RunReport run_baseline(const ExperimentConfig& cfg, const std::vector<NamedDataset>& inputs,
                              const Clock& clock) {
    cfg.validate();
    RunReport rep;
    rep.mode = RunMode::Baseline;
    detail::echo_config(rep, cfg, inputs);
    double t0 = clock();

    for (std::size_t di = 0; di < inputs.size(); ++di) {
        const NamedDataset& nd = inputs[di];
        FoldAssignment fa = detail::folds_for(cfg, nd, di);
        rep.folds.emplace_back(nd.name, fa);
        for (std::size_t ki = 0; ki < cfg.kernels.size(); ++ki) {
            BaselineKind kind = cfg.kernels[ki];
            std::string label{baseline_name(kind)};
            for (int f = 0; f < fa.k; ++f) {
                ResultRow row{nd.name, label, label, 0, f, "failed", {}, {}, ""};
                try {
                    TrainTestSplit sp = split_fold(nd.data.X, nd.data.y, fa, f);
                    RandomSource rng(derive_seed(cfg.seed, 1000 + di, ki, static_cast<std::uint64_t>(f)));
                    auto ev = evaluate_split(AnyKernel{kind}, sp.X_train, sp.y_train, sp.X_test,
                                             sp.y_test, cfg.moecov.fitness.budget, rng, clock);
                    if (ev) {
                        row.status = "ok";
                        row.pcc = ev->pcc_value;
                        row.nlpd = ev->nlpd_value;
                        rep.optimizer_evals += ev->optimizer_evals;
                    } else {
                        row.note = "evaluation fault";
                    }
                } catch (const std::exception& e) {
                    row.note = detail::sanitize_note(e.what());
                }
                rep.results.push_back(std::move(row));
            }
        }
    }
    rep.aggregates = aggregate_rows(rep.results);
    rep.wall_seconds = clock() - t0;
    return rep;
}

/// The full search: per (dataset, repetition, fold), evolution runs on the
/// training part; the winning kernel is scored on the held-out part with its
/// hyperparameters frozen, and lands in the archive.
inline RunReport run_evolve(const ExperimentConfig& cfg, const std::vector<NamedDataset>& inputs,
                            const Clock& clock) {
    cfg.validate();
    RunReport rep;
    rep.mode = RunMode::Evolve;
    detail::echo_config(rep, cfg, inputs);
    double t0 = clock();

    for (std::size_t di = 0; di < inputs.size(); ++di) {
        const NamedDataset& nd = inputs[di];
        FoldAssignment fa = detail::folds_for(cfg, nd, di);
        rep.folds.emplace_back(nd.name, fa);
        for (int rep_i = 0; rep_i < cfg.repetitions; ++rep_i) {
            for (int f = 0; f < fa.k; ++f) {
                ResultRow row{nd.name, "evolved", "", rep_i, f, "failed", {}, {}, ""};
                try {
                    std::uint64_t cell_seed =
                        derive_seed(cfg.seed, 2000 + di, static_cast<std::uint64_t>(rep_i),
                                    static_cast<std::uint64_t>(f));
                    Dataset train = detail::subset(nd.data, detail::train_indices(fa, f));
                    MOECovConfig mcfg = cfg.moecov;
                    mcfg.seed = cell_seed;
                    mcfg.fitness.fold_seed = derive_seed(cell_seed, 7);
                    MOECovResult res = moecov_run(mcfg, train, clock);
                    if (!res.best) {
                        row.note = "no viable kernel";
                    } else {
                        row.kernel = serialize(res.best->expr);
                        TrainTestSplit sp = split_fold(nd.data.X, nd.data.y, fa, f);
                        RandomSource rng(derive_seed(cell_seed, 8));
                        auto ev = evaluate_split(AnyKernel{res.best->expr}, sp.X_train, sp.y_train,
                                                 sp.X_test, sp.y_test, cfg.moecov.fitness.budget,
                                                 rng, clock, res.best->theta);
                        if (ev) {
                            row.status = "ok";
                            row.pcc = ev->pcc_value;
                            row.nlpd = ev->nlpd_value;
                            rep.optimizer_evals += ev->optimizer_evals;
                        } else {
                            row.note = "test evaluation fault";
                        }
                        rep.archive.push_back(ArchiveEntry{nd.name, rep_i, f,
                                                           static_cast<int>(nd.data.dim()),
                                                           *res.best});
                    }
                } catch (const std::exception& e) {
                    row.note = detail::sanitize_note(e.what());
                }
                rep.results.push_back(std::move(row));
            }
        }
    }
    rep.aggregates = aggregate_rows(rep.results);
    rep.wall_seconds = clock() - t0;
    return rep;
}

/// Reuses archived kernels verbatim: per (archive entry, target dataset,
/// fold), the posterior is fit on the target training part with the frozen
/// expression and hyperparameters — the optimizer never runs.
inline RunReport run_transfer(const ExperimentConfig& cfg,
                              const std::vector<ArchiveEntry>& source,
                              const std::vector<NamedDataset>& targets, const Clock& clock) {
    cfg.validate();
    RunReport rep;
    rep.mode = RunMode::Transfer;
    detail::echo_config(rep, cfg, targets);
    double t0 = clock();

    for (std::size_t di = 0; di < targets.size(); ++di) {
        const NamedDataset& nd = targets[di];
        FoldAssignment fa = detail::folds_for(cfg, nd, di);
        rep.folds.emplace_back(nd.name, fa);
        for (std::size_t ei = 0; ei < source.size(); ++ei) {
            const ArchiveEntry& entry = source[ei];
            std::string group = "entry" + std::to_string(ei);
            std::string label = serialize(entry.ind.expr);
            if (entry.dim > 0 && entry.dim != static_cast<int>(nd.data.dim())) {
                ResultRow row{nd.name, group, label, static_cast<int>(ei), -1, "failed", {}, {},
                              "dimension mismatch: kernel fit in " + std::to_string(entry.dim) +
                                  "-d space, target is " + std::to_string(nd.data.dim()) + "-d"};
                rep.results.push_back(std::move(row));
                continue;
            }
            for (int f = 0; f < fa.k; ++f) {
                ResultRow row{nd.name, group, label, static_cast<int>(ei), f, "failed", {}, {}, ""};
                try {
                    TrainTestSplit sp = split_fold(nd.data.X, nd.data.y, fa, f);
                    RandomSource rng(derive_seed(cfg.seed, 3000 + di, ei, static_cast<std::uint64_t>(f)));
                    auto ev = evaluate_split(AnyKernel{entry.ind.expr}, sp.X_train, sp.y_train,
                                             sp.X_test, sp.y_test, cfg.moecov.fitness.budget, rng,
                                             clock, entry.ind.theta);
                    if (ev) {
                        row.status = "ok";
                        row.pcc = ev->pcc_value;
                        row.nlpd = ev->nlpd_value;
                        rep.optimizer_evals += ev->optimizer_evals;
                    } else {
                        row.note = "evaluation fault";
                    }
                } catch (const std::exception& e) {
                    row.note = detail::sanitize_note(e.what());
                }
                rep.results.push_back(std::move(row));
            }
        }
    }
    if (rep.optimizer_evals != 0)
        throw std::logic_error("transfer run spent optimizer evaluations");
    rep.aggregates = aggregate_rows(rep.results);
    rep.wall_seconds = clock() - t0;
    return rep;
}

// ---------------------------------------------------------------------------
// report files

namespace detail {

inline std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline nlohmann::json to_json(const ArchiveEntry& e) {
    nlohmann::json j = to_json(e.ind);
    j["dataset"] = e.dataset;
    j["rep"] = e.repetition;
    j["fold"] = e.fold;
    j["dim"] = e.dim;
    return j;
}

inline ArchiveEntry entry_from_json(const nlohmann::json& j) {
    ArchiveEntry e;
    e.ind = individual_from_json(j);
    e.dataset = j.value("dataset", std::string());
    e.repetition = j.value("rep", 0);
    e.fold = j.value("fold", 0);
    e.dim = j.value("dim", 0);
    return e;
}

inline void write_entries(std::ostream& out, const std::vector<ArchiveEntry>& entries) {
    for (const auto& e : entries) out << to_json(e).dump() << '\n';
}

inline std::vector<ArchiveEntry> read_entries(std::istream& in) {
    std::vector<ArchiveEntry> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            out.push_back(entry_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("archive: ") + e.what(), line_no);
        } catch (const ParseError& e) {
            throw FormatError(std::string("archive: bad expression: ") + e.what(), line_no);
        }
    }
    return out;
}

inline constexpr const char* kResultsHeader =
    "dataset\tgroup\tkernel\trepetition\tfold\tstatus\tpcc\tnlpd\tnote";

/// Writes results.tsv, summary.txt, archive.jsonl, and one folds_<name>.tsv
/// per dataset. Refuses to clobber an existing results.tsv unless force is
/// set.
inline void emit_report(const RunReport& rep, const std::string& dir, bool force = false) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    fs::path results_path = fs::path(dir) / "results.tsv";
    if (!force && fs::exists(results_path))
        throw std::runtime_error("refusing to overwrite " + results_path.string() +
                                 " (use force)");

    {
        std::ofstream out(results_path);
        if (!out) throw std::runtime_error("cannot write " + results_path.string());
        out << kResultsHeader << '\n';
        for (const auto& r : rep.results)
            out << r.dataset << '\t' << r.group << '\t' << r.kernel << '\t' << r.repetition
                << '\t' << r.fold << '\t' << r.status << '\t' << detail::g17(r.pcc) << '\t'
                << detail::g17(r.nlpd) << '\t' << r.note << '\n';
    }
    {
        fs::path p = fs::path(dir) / "summary.txt";
        std::ofstream out(p);
        if (!out) throw std::runtime_error("cannot write " + p.string());
        for (const auto& [k, v] : rep.config_echo) out << k << '\t' << v << '\n';
        out << "rows\t" << rep.results.size() << '\n';
        out << "optimizer_evals\t" << rep.optimizer_evals << '\n';
        out << "wall_seconds\t" << detail::g17(rep.wall_seconds) << '\n';
        for (const auto& a : rep.aggregates) {
            std::string key = a.dataset + "." + a.group;
            out << "agg." << key << ".pcc\t" << detail::g17(a.mean_pcc) << '\n';
            out << "agg." << key << ".nlpd\t" << detail::g17(a.mean_nlpd) << '\n';
            out << "agg." << key << ".ok\t" << a.n_ok << '\n';
            out << "agg." << key << ".failed\t" << a.n_failed << '\n';
        }
    }
    {
        fs::path p = fs::path(dir) / "archive.jsonl";
        std::ofstream out(p);
        if (!out) throw std::runtime_error("cannot write " + p.string());
        write_entries(out, rep.archive);
    }
    for (const auto& [name, fa] : rep.folds) {
        fs::path p = fs::path(dir) / ("folds_" + name + ".tsv");
        std::ofstream out(p);
        if (!out) throw std::runtime_error("cannot write " + p.string());
        save_folds(out, fa);
    }
}

/// Round-trip loader: parses results.tsv and summary.txt back. Aggregates
/// are recomputed from the row table; the summary is exposed as the config
/// echo (including its agg.* lines).
inline RunReport read_report(const std::string& dir) {
    namespace fs = std::filesystem;
    RunReport rep;
    {
        fs::path p = fs::path(dir) / "results.tsv";
        std::ifstream in(p);
        if (!in) throw std::runtime_error("cannot read " + p.string());
        std::string line;
        if (!std::getline(in, line)) throw FormatError("results.tsv is empty", 1);
        if (detail::strip_cr(std::move(line)) != kResultsHeader)
            throw FormatError("unexpected results.tsv header", 1);
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            std::string s = detail::strip_cr(std::move(line));
            if (s.empty()) continue;
            std::vector<std::string_view> f = detail::split_char(s, '\t');
            if (f.size() != 9) throw FormatError("results.tsv row needs 9 fields", line_no);
            ResultRow r;
            r.dataset = std::string(f[0]);
            r.group = std::string(f[1]);
            r.kernel = std::string(f[2]);
            r.repetition = std::stoi(std::string(f[3]));
            r.fold = std::stoi(std::string(f[4]));
            r.status = std::string(f[5]);
            if (!detail::parse_double(f[6], r.pcc) || !detail::parse_double(f[7], r.nlpd))
                throw FormatError("results.tsv has an unparseable number", line_no);
            r.note = std::string(f[8]);
            rep.results.push_back(std::move(r));
        }
    }
    {
        fs::path p = fs::path(dir) / "summary.txt";
        std::ifstream in(p);
        if (!in) throw std::runtime_error("cannot read " + p.string());
        std::string line;
        while (std::getline(in, line)) {
            std::string s = detail::strip_cr(std::move(line));
            if (s.empty()) continue;
            std::size_t tab = s.find('\t');
            if (tab == std::string::npos) continue;
            rep.config_echo.emplace_back(s.substr(0, tab), s.substr(tab + 1));
            if (rep.config_echo.back().first == "mode")
                rep.mode = run_mode_from_name(rep.config_echo.back().second);
            if (rep.config_echo.back().first == "optimizer_evals")
                rep.optimizer_evals = std::stol(rep.config_echo.back().second);
        }
    }
    {
        fs::path p = fs::path(dir) / "archive.jsonl";
        std::ifstream in(p);
        if (in) rep.archive = read_entries(in);
    }
    rep.aggregates = aggregate_rows(rep.results);
    return rep;
}

/// Convenience dispatcher used by the command-line tool.
inline RunReport run_experiment(const ExperimentConfig& cfg, const Clock& clock) {
    cfg.validate();
    std::vector<NamedDataset> inputs = load_inputs(cfg);
    switch (cfg.mode) {
        case RunMode::Baseline: return run_baseline(cfg, inputs, clock);
        case RunMode::Evolve: return run_evolve(cfg, inputs, clock);
        case RunMode::Transfer: {
            std::ifstream in(cfg.archive_path);
            if (!in) throw FormatError("cannot open archive: " + cfg.archive_path, 0);
            std::vector<ArchiveEntry> source = read_entries(in);
            return run_transfer(cfg, source, inputs, clock);
        }
    }
    throw std::logic_error("unreachable");
}

}  // namespace moecov
