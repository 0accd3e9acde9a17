#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "madar/core.hpp"
#include "madar/dataset_io.hpp"
#include "madar/metrics.hpp"
#include "madar/scenario.hpp"
#include "madar/stream_synth.hpp"

namespace madar {

/// The sweep an experiment runs: the cross product of these lists, expanded
/// strategy-major (strategy, then budgeting, then budget, then seed).
struct GridSpec {
    std::vector<Strategy> strategies = {Strategy::None};
    std::vector<Budgeting> budgetings = {Budgeting::Ratio};
    std::vector<long long> budgets = {0};
    std::vector<std::uint64_t> seeds = {1};

    std::size_t num_runs() const {
        return strategies.size() * budgetings.size() * budgets.size() * seeds.size();
    }
};

/// Everything `madar run` needs, parsed from one JSON file.
struct ExperimentConfig {
    std::string name;
    std::string output_dir;  // empty = results/<name>
    int workers = 0;         // 0 = hardware concurrency

    Scenario scenario = Scenario::DomainIl;
    int initial_classes = 50;
    int classes_per_increment = 5;
    int classes_per_task = 5;

    bool from_csv = false;
    std::string csv_path;
    double csv_holdout_fraction = 0.2;
    double variance_threshold = -1.0;  // < 0 disables the variance filter
    SynthParams stream;

    TrainerConfig trainer;
    ReplayConfig replay_defaults;
    GridSpec grid;
};

namespace detail {

using nlohmann::json;

/// Object wrapper that records which keys were consumed so typos fail loudly.
class JsonSection {
public:
    JsonSection(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    template <class T>
    T get(const std::string& key, const char* kind) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(path_ + "." + key + ": missing (" + kind + ")");
        return fetch<T>(key, kind);
    }

    template <class T>
    T get_or(const std::string& key, T fallback, const char* kind) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        return fetch<T>(key, kind);
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(path_ + "." + key + ": missing section");
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) {
                throw ConfigError(path_ + "." + key + ": unknown key");
            }
        }
    }

private:
    template <class T>
    T fetch(const std::string& key, const char* kind) {
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path_ + "." + key + ": expected " + kind);
        }
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline long long budget_from_json(const json& j, const std::string& path) {
    if (j.is_string()) {
        if (j.get<std::string>() == "unlimited") return kUnlimitedBudget;
        throw ConfigError(path + ": budgets are integers or the string \"unlimited\"");
    }
    if (!j.is_number_integer()) {
        throw ConfigError(path + ": budgets are integers or the string \"unlimited\"");
    }
    const auto v = j.get<long long>();
    if (v < 0) throw ConfigError(path + ": budgets must be >= 0");
    return v;
}

inline json budget_to_json(long long budget) {
    if (budget == kUnlimitedBudget) return json("unlimited");
    return json(budget);
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& root, const std::string& base_dir = "") {
    detail::JsonSection top(root, "config");
    ExperimentConfig cfg;
    cfg.name = top.get<std::string>("name", "string");
    if (cfg.name.empty()) throw ConfigError("config.name: must not be empty");
    cfg.output_dir = top.get_or<std::string>("output_dir", "", "string");
    cfg.workers = top.get_or<int>("workers", 0, "integer");
    if (cfg.workers < 0) throw ConfigError("config.workers: must be >= 0");

    {
        detail::JsonSection sc(top.raw("scenario"), "scenario");
        cfg.scenario = scenario_from_string(sc.get<std::string>("kind", "string"));
        cfg.initial_classes = sc.get_or<int>("initial_classes", 50, "integer");
        cfg.classes_per_increment = sc.get_or<int>("classes_per_increment", 5, "integer");
        cfg.classes_per_task = sc.get_or<int>("classes_per_task", 5, "integer");
        if (cfg.initial_classes < 1) throw ConfigError("scenario.initial_classes: must be >= 1");
        if (cfg.classes_per_increment < 0) {
            throw ConfigError("scenario.classes_per_increment: must be >= 0");
        }
        if (cfg.classes_per_task < 1) throw ConfigError("scenario.classes_per_task: must be >= 1");
        sc.finish();
    }

    {
        detail::JsonSection st(top.raw("stream"), "stream");
        if (st.has("csv")) {
            cfg.from_csv = true;
            cfg.csv_path = st.get<std::string>("csv", "string");
            if (!base_dir.empty() && !cfg.csv_path.empty() &&
                !std::filesystem::path(cfg.csv_path).is_absolute()) {
                cfg.csv_path = (std::filesystem::path(base_dir) / cfg.csv_path).string();
            }
            cfg.csv_holdout_fraction = st.get_or<double>("holdout_fraction", 0.2, "number");
            cfg.variance_threshold = st.get_or<double>("variance_threshold", -1.0, "number");
            cfg.stream.seed = st.get_or<std::uint64_t>("seed", 1, "integer");
            if (cfg.csv_holdout_fraction <= 0.0 || cfg.csv_holdout_fraction >= 1.0) {
                throw ConfigError("stream.holdout_fraction: must lie in (0, 1)");
            }
        } else {
            SynthParams& p = cfg.stream;
            p.scenario = cfg.scenario;
            p.num_tasks = st.get_or<int>("num_tasks", 6, "integer");
            p.feature_dim = st.get_or<int>("feature_dim", 64, "integer");
            p.num_families = st.get_or<int>("num_families", 20, "integer");
            p.samples_per_task = st.get_or<int>("samples_per_task", 600, "integer");
            p.goodware_ratio = st.get_or<double>("goodware_ratio",
                                                 cfg.scenario == Scenario::DomainIl ? 0.5 : 0.0,
                                                 "number");
            p.churn_rate = st.get_or<double>("churn_rate", 0.0, "number");
            p.other_fraction = st.get_or<double>("other_fraction", 0.0, "number");
            p.drift = st.get_or<double>("drift", 0.0, "number");
            p.holdout_fraction = st.get_or<double>("holdout_fraction", 0.2, "number");
            p.power_law = st.get_or<double>("power_law", 1.1, "number");
            p.min_sub_clusters = st.get_or<int>("min_sub_clusters", 2, "integer");
            p.max_sub_clusters = st.get_or<int>("max_sub_clusters", 4, "integer");
            p.center_spread = st.get_or<double>("center_spread", 0.9, "number");
            p.cluster_scale = st.get_or<double>("cluster_scale", 1.0, "number");
            p.goodware_clusters = st.get_or<int>("goodware_clusters", 6, "integer");
            p.seed = st.get_or<std::uint64_t>("seed", 1, "integer");
            p.initial_families = cfg.initial_classes;
            p.families_per_increment = cfg.classes_per_increment;
            p.families_per_task = cfg.classes_per_task;
            if (cfg.scenario == Scenario::DomainIl) {
                p.initial_families = 0;
                p.families_per_increment = 0;
                p.families_per_task = 0;
            }
        }
        st.finish();
    }

    if (top.has("model")) {
        detail::JsonSection md(top.raw("model"), "model");
        TrainerConfig& t = cfg.trainer;
        t.hidden_dims = md.get_or<std::vector<int>>("hidden_dims", t.hidden_dims,
                                                    "array of integers");
        t.dropout = md.get_or<double>("dropout", t.dropout, "number");
        t.lr = md.get_or<double>("lr", t.lr, "number");
        t.epochs = md.get_or<int>("epochs", t.epochs, "integer");
        t.batch_size = md.get_or<int>("batch_size", t.batch_size, "integer");
        md.finish();
        validate_trainer_config(t);
    }

    if (top.has("replay")) {
        detail::JsonSection rp(top.raw("replay"), "replay");
        ReplayConfig& r = cfg.replay_defaults;
        r.gamma = rp.get_or<double>("gamma", r.gamma, "number");
        r.alpha = rp.get_or<double>("alpha", r.alpha, "number");
        r.contamination = rp.get_or<double>("contamination", r.contamination, "number");
        r.goodware_match_malware =
            rp.get_or<bool>("goodware_match_malware", r.goodware_match_malware, "boolean");
        r.iforest.num_trees = rp.get_or<int>("iforest_trees", r.iforest.num_trees, "integer");
        r.iforest.subsample_size =
            rp.get_or<int>("iforest_subsample", r.iforest.subsample_size, "integer");
        rp.finish();
        validate_replay_config(r);
    }

    if (top.has("grid")) {
        detail::JsonSection gr(top.raw("grid"), "grid");
        GridSpec& g = cfg.grid;
        if (gr.has("strategies")) {
            g.strategies.clear();
            for (const auto& s :
                 gr.get<std::vector<std::string>>("strategies", "array of strings")) {
                g.strategies.push_back(strategy_from_string(s));
            }
        }
        if (gr.has("budgetings")) {
            g.budgetings.clear();
            const auto& arr = gr.raw("budgetings");
            if (!arr.is_array()) throw ConfigError("grid.budgetings: expected array of strings");
            for (const auto& b : arr) {
                g.budgetings.push_back(budgeting_from_string(b.get<std::string>()));
            }
        }
        if (gr.has("budgets")) {
            g.budgets.clear();
            const auto& arr = gr.raw("budgets");
            if (!arr.is_array()) throw ConfigError("grid.budgets: expected array");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                g.budgets.push_back(detail::budget_from_json(
                    arr[i], "grid.budgets[" + std::to_string(i) + "]"));
            }
        }
        if (gr.has("seeds")) {
            g.seeds = gr.get<std::vector<std::uint64_t>>("seeds", "array of integers");
        }
        if (g.strategies.empty() || g.budgetings.empty() || g.budgets.empty() ||
            g.seeds.empty()) {
            throw ConfigError("grid: strategies, budgetings, budgets and seeds must be non-empty");
        }
        gr.finish();
    }

    top.finish();
    if (cfg.output_dir.empty()) cfg.output_dir = "results/" + cfg.name;
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(root, std::filesystem::path(path).parent_path().string());
}

/// Fully resolved config as JSON: defaults materialized, enums spelled out.
/// Re-parsing this yields the identical experiment.
inline nlohmann::json resolve_config(const ExperimentConfig& cfg) {
    nlohmann::json root;
    root["name"] = cfg.name;
    root["output_dir"] = cfg.output_dir;
    root["workers"] = cfg.workers;
    root["scenario"] = {{"kind", to_string(cfg.scenario)},
                        {"initial_classes", cfg.initial_classes},
                        {"classes_per_increment", cfg.classes_per_increment},
                        {"classes_per_task", cfg.classes_per_task}};
    if (cfg.from_csv) {
        root["stream"] = {{"csv", cfg.csv_path},
                          {"holdout_fraction", cfg.csv_holdout_fraction},
                          {"variance_threshold", cfg.variance_threshold},
                          {"seed", cfg.stream.seed}};
    } else {
        const SynthParams& p = cfg.stream;
        root["stream"] = {{"num_tasks", p.num_tasks},
                          {"feature_dim", p.feature_dim},
                          {"num_families", p.num_families},
                          {"samples_per_task", p.samples_per_task},
                          {"goodware_ratio", p.goodware_ratio},
                          {"churn_rate", p.churn_rate},
                          {"other_fraction", p.other_fraction},
                          {"drift", p.drift},
                          {"holdout_fraction", p.holdout_fraction},
                          {"power_law", p.power_law},
                          {"min_sub_clusters", p.min_sub_clusters},
                          {"max_sub_clusters", p.max_sub_clusters},
                          {"center_spread", p.center_spread},
                          {"cluster_scale", p.cluster_scale},
                          {"goodware_clusters", p.goodware_clusters},
                          {"seed", p.seed}};
    }
    root["model"] = {{"hidden_dims", cfg.trainer.hidden_dims},
                     {"dropout", cfg.trainer.dropout},
                     {"lr", cfg.trainer.lr},
                     {"epochs", cfg.trainer.epochs},
                     {"batch_size", cfg.trainer.batch_size}};
    root["replay"] = {{"gamma", cfg.replay_defaults.gamma},
                      {"alpha", cfg.replay_defaults.alpha},
                      {"contamination", cfg.replay_defaults.contamination},
                      {"goodware_match_malware", cfg.replay_defaults.goodware_match_malware},
                      {"iforest_trees", cfg.replay_defaults.iforest.num_trees},
                      {"iforest_subsample", cfg.replay_defaults.iforest.subsample_size}};
    nlohmann::json strategies = nlohmann::json::array();
    for (Strategy s : cfg.grid.strategies) strategies.push_back(to_string(s));
    nlohmann::json budgetings = nlohmann::json::array();
    for (Budgeting b : cfg.grid.budgetings) budgetings.push_back(to_string(b));
    nlohmann::json budgets = nlohmann::json::array();
    for (long long b : cfg.grid.budgets) budgets.push_back(detail::budget_to_json(b));
    root["grid"] = {{"strategies", strategies},
                    {"budgetings", budgetings},
                    {"budgets", budgets},
                    {"seeds", cfg.grid.seeds}};
    return root;
}

/// One cell of the expanded grid.
struct RunCell {
    std::size_t index = 0;
    Strategy strategy = Strategy::None;
    Budgeting budgeting = Budgeting::Ratio;
    long long budget = 0;
    std::uint64_t seed = 0;
};

inline std::vector<RunCell> expand_grid(const GridSpec& grid) {
    std::vector<RunCell> cells;
    cells.reserve(grid.num_runs());
    std::size_t index = 0;
    for (Strategy s : grid.strategies) {
        for (Budgeting b : grid.budgetings) {
            for (long long budget : grid.budgets) {
                for (std::uint64_t seed : grid.seeds) {
                    cells.push_back({index++, s, b, budget, seed});
                }
            }
        }
    }
    return cells;
}

/// Scenario config for one grid cell. The grid seed drives model init and
/// replay draws jointly, so repetitions vary everything at once.
inline ScenarioConfig cell_config(const ExperimentConfig& cfg, const RunCell& cell) {
    ScenarioConfig sc;
    sc.kind = cfg.scenario;
    sc.initial_classes = cfg.initial_classes;
    sc.classes_per_increment = cfg.classes_per_increment;
    sc.classes_per_task = cfg.classes_per_task;
    sc.replay = cfg.replay_defaults;
    sc.replay.strategy = cell.strategy;
    sc.replay.budgeting = cell.budgeting;
    sc.replay.budget = cell.budget;
    sc.replay.seed = derive_seed(cell.seed, 2);
    sc.trainer = cfg.trainer;
    sc.trainer.seed = derive_seed(cell.seed, 1);
    return sc;
}

/// Materialize the stream an experiment runs on (shared by every grid cell).
inline TaskStream resolve_stream(const ExperimentConfig& cfg) {
    if (!cfg.from_csv) return generate_stream(make_stream_spec(cfg.stream));
    RawDataset ds = load_csv(cfg.csv_path);
    if (cfg.variance_threshold >= 0.0) {
        ds = apply_column_mask(ds, variance_filter(ds.features, cfg.variance_threshold));
    }
    return partition_by_task(ds, cfg.scenario, cfg.csv_holdout_fraction, cfg.stream.seed);
}

namespace detail {

inline std::string format_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string budget_field(long long budget) {
    return budget == kUnlimitedBudget ? "unlimited" : std::to_string(budget);
}

inline long long budget_from_field(const std::string& field) {
    if (field == "unlimited") return kUnlimitedBudget;
    return std::stoll(field);
}

}  // namespace detail

struct RunOutcome {
    RunCell cell;
    bool ok = false;
    double ap_bar = 0.0;
    std::vector<double> task_seconds;
    std::string error;
};

struct ExperimentResult {
    std::vector<RunOutcome> runs;
    std::size_t failures = 0;
    std::string output_dir;
};

/// Execute every grid cell against the shared stream, writing per-run matrix
/// files as they finish and summary/timing files at the end. A failing run is
/// recorded in failures.log and does not stop the rest of the grid.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);

    write_file_atomic((fs::path(cfg.output_dir) / "config.echo").string(),
                      resolve_config(cfg).dump(2) + "\n");

    const TaskStream stream = resolve_stream(cfg);
    const std::vector<RunCell> cells = expand_grid(cfg.grid);

    ExperimentResult result;
    result.output_dir = cfg.output_dir;
    result.runs.resize(cells.size());

    unsigned workers = cfg.workers > 0 ? static_cast<unsigned>(cfg.workers)
                                       : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, std::max<std::size_t>(cells.size(), 1));

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            RunOutcome& out = result.runs[i];
            out.cell = cells[i];
            try {
                const RunResult run = run_scenario(stream, cell_config(cfg, cells[i]));
                out.ap_bar = global_ap(run.matrix);
                out.task_seconds = run.task_seconds;

                std::string csv = "i,j,accuracy\n";
                for (int r = 0; r < run.matrix.num_tasks(); ++r) {
                    for (int c = 0; c <= r; ++c) {
                        csv += std::to_string(r) + "," + std::to_string(c) + "," +
                               detail::format_g17(run.matrix.at(r, c)) + "\n";
                    }
                }
                write_file_atomic((fs::path(cfg.output_dir) /
                                   ("matrix_" + std::to_string(cells[i].index) + ".csv"))
                                      .string(),
                                  csv);
                out.ok = true;
            } catch (const std::exception& e) {
                out.error = e.what();
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (unsigned w = 0; w < workers; ++w) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    std::string summary = "run,scenario,strategy,budgeting,budget,seed,ap_bar\n";
    std::string timings = "run,task,seconds\n";
    std::string failures;
    for (const RunOutcome& out : result.runs) {
        if (!out.ok) {
            ++result.failures;
            failures += "run " + std::to_string(out.cell.index) + " (" +
                        to_string(out.cell.strategy) + "," + to_string(out.cell.budgeting) + "," +
                        detail::budget_field(out.cell.budget) + ",seed " +
                        std::to_string(out.cell.seed) + "): " + out.error + "\n";
            continue;
        }
        summary += std::to_string(out.cell.index) + "," + to_string(cfg.scenario) + "," +
                   to_string(out.cell.strategy) + "," + to_string(out.cell.budgeting) + "," +
                   detail::budget_field(out.cell.budget) + "," + std::to_string(out.cell.seed) +
                   "," + detail::format_g17(out.ap_bar) + "\n";
        for (std::size_t t = 0; t < out.task_seconds.size(); ++t) {
            timings += std::to_string(out.cell.index) + "," + std::to_string(t) + "," +
                       detail::format_g17(out.task_seconds[t]) + "\n";
        }
    }
    write_file_atomic((fs::path(cfg.output_dir) / "summary.csv").string(), summary);
    write_file_atomic((fs::path(cfg.output_dir) / "timings.csv").string(), timings);
    if (!failures.empty()) {
        write_file_atomic((fs::path(cfg.output_dir) / "failures.log").string(), failures);
    }
    return result;
}

/// Aggregate a results directory: group summary rows over seeds and report
/// mean / sample standard deviation of the global average accuracy.
struct ReportRow {
    std::string scenario, strategy, budgeting, budget;
    std::size_t n = 0;
    double mean_ap = 0.0;
    double std_ap = 0.0;
};

inline std::vector<ReportRow> summarize_results(const std::string& results_dir) {
    namespace fs = std::filesystem;
    const std::string path = (fs::path(results_dir) / "summary.csv").string();
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "' (is this a results directory?)");

    std::string line;
    if (!std::getline(in, line) ||
        detail::trim(line) != "run,scenario,strategy,budgeting,budget,seed,ap_bar") {
        throw Error("'" + path + "' does not look like a run summary");
    }
    std::map<std::vector<std::string>, std::vector<double>> groups;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_fields(line);
        if (fields.size() != 7) {
            throw Error(path + " line " + std::to_string(line_no) + ": expected 7 fields");
        }
        const std::vector<std::string> key = {std::string(fields[1]), std::string(fields[2]),
                                              std::string(fields[3]), std::string(fields[4])};
        groups[key].push_back(
            detail::parse_number<double>(fields[6], line_no, "ap_bar"));
    }

    std::vector<ReportRow> rows;
    for (const auto& [key, values] : groups) {
        ReportRow row;
        row.scenario = key[0];
        row.strategy = key[1];
        row.budgeting = key[2];
        row.budget = key[3];
        row.n = values.size();
        double sum = 0.0;
        for (double v : values) sum += v;
        row.mean_ap = sum / static_cast<double>(values.size());
        if (values.size() > 1) {
            double ss = 0.0;
            for (double v : values) ss += (v - row.mean_ap) * (v - row.mean_ap);
            row.std_ap = std::sqrt(ss / static_cast<double>(values.size() - 1));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_report(const std::string& results_dir, const std::vector<ReportRow>& rows) {
    std::string csv = "scenario,strategy,budgeting,budget,n,mean_ap,std_ap\n";
    for (const ReportRow& r : rows) {
        csv += r.scenario + "," + r.strategy + "," + r.budgeting + "," + r.budget + "," +
               std::to_string(r.n) + "," + detail::format_g17(r.mean_ap) + "," +
               detail::format_g17(r.std_ap) + "\n";
    }
    write_file_atomic((std::filesystem::path(results_dir) / "report.csv").string(), csv);
}

}  // namespace madar
