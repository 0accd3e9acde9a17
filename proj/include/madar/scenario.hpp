#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "madar/core.hpp"
#include "madar/metrics.hpp"
#include "madar/mlp.hpp"
#include "madar/replay.hpp"
#include "madar/rng.hpp"

namespace madar {

struct TrainerConfig {
    std::vector<int> hidden_dims = {1024, 512, 256, 128, 128};
    double dropout = 0.2;
    double lr = 0.001;
    int epochs = 20;
    int batch_size = 256;
    std::uint64_t seed = 1;
};

inline void validate_trainer_config(const TrainerConfig& cfg) {
    if (cfg.hidden_dims.empty()) throw ConfigError("model: at least one hidden layer is required");
    for (int d : cfg.hidden_dims) {
        if (d < 1) throw ConfigError("model: hidden layer widths must be >= 1");
    }
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
        throw ConfigError("model: dropout must lie in [0, 1)");
    }
    if (!(cfg.lr >= 0.0)) throw ConfigError("model: lr must be >= 0");
    if (cfg.epochs < 0) throw ConfigError("model: epochs must be >= 0");
    if (cfg.batch_size < 1) throw ConfigError("model: batch_size must be >= 1");
}

struct ScenarioConfig {
    Scenario kind = Scenario::DomainIl;
    int initial_classes = 50;       // Class-IL mask schedule
    int classes_per_increment = 5;
    int classes_per_task = 5;       // Task-IL mask schedule
    ReplayConfig replay;
    TrainerConfig trainer;
};

/// Schedule-derived output mask: which head units a scenario exposes at a
/// given task. Domain-IL always exposes both labels; Class-IL grows the set by
/// classes_per_increment per task; Task-IL exposes the task's own slice.
inline OutputMask active_mask(Scenario scenario, const ScenarioConfig& cfg, int task_id,
                              int num_classes) {
    if (task_id < 0) throw Error("active_mask: negative task id");
    switch (scenario) {
        case Scenario::DomainIl:
            return OutputMask::of(num_classes, {kLabelGoodware, kLabelMalware});
        case Scenario::ClassIl: {
            const long long upto = static_cast<long long>(cfg.initial_classes) +
                static_cast<long long>(cfg.classes_per_increment) * task_id;
            if (upto < 1 || upto > num_classes) {
                throw Error("active_mask: class schedule reaches " + std::to_string(upto) +
                            " classes at task " + std::to_string(task_id) + " but the head has " +
                            std::to_string(num_classes));
            }
            std::vector<int> classes(static_cast<std::size_t>(upto));
            for (long long c = 0; c < upto; ++c) classes[static_cast<std::size_t>(c)] =
                static_cast<int>(c);
            return OutputMask::of(num_classes, classes);
        }
        case Scenario::TaskIl: {
            const long long lo = static_cast<long long>(cfg.classes_per_task) * task_id;
            const long long hi = lo + cfg.classes_per_task;
            if (lo < 0 || hi > num_classes) {
                throw Error("active_mask: task " + std::to_string(task_id) +
                            " wants classes [" + std::to_string(lo) + ", " + std::to_string(hi) +
                            ") but the head has " + std::to_string(num_classes));
            }
            std::vector<int> classes;
            for (long long c = lo; c < hi; ++c) classes.push_back(static_cast<int>(c));
            return OutputMask::of(num_classes, classes);
        }
    }
    throw Error("active_mask: unknown scenario");
}

/// Mask used while training task i, taken from the stream itself.
inline OutputMask train_mask(const TaskStream& stream, int task) {
    return OutputMask::of(stream.num_classes,
                          stream.tasks[static_cast<std::size_t>(task)].active_classes);
}

/// Mask used when, after training task i, task j's holdout is scored.
/// Task-IL knows the task identity at test time and restricts to task j's own
/// classes; Class-IL scores against everything seen through i; Domain-IL is
/// always binary.
inline OutputMask eval_mask(const TaskStream& stream, int trained_task, int eval_task) {
    if (stream.scenario == Scenario::TaskIl) {
        return OutputMask::of(stream.num_classes,
                              stream.tasks[static_cast<std::size_t>(eval_task)].active_classes);
    }
    return train_mask(stream, trained_task);
}

/// Pick the replay batch for the task about to be trained. Joint returns the
/// whole pool (its re-initialization is the engine's job); the MADAR variants
/// route by scenario.
inline ReplaySet strategy_dispatch(const ScenarioConfig& cfg, const DataPool& pool,
                                   const MlpModel& model, std::uint64_t task_seed) {
    ReplayConfig rc = cfg.replay;
    rc.seed = task_seed;
    switch (rc.strategy) {
        case Strategy::None:
            return {};
        case Strategy::Joint: {
            ReplaySet all;
            all.samples = pool.samples;
            return all;
        }
        case Strategy::Grs:
            return grs_select(pool, rc.budget, task_seed);
        case Strategy::Madar:
            return cfg.kind == Scenario::DomainIl ? madar_select_domain(pool, rc)
                                                  : madar_select_class(pool, rc);
        case Strategy::MadarTheta:
            return cfg.kind == Scenario::DomainIl ? madar_theta_select_domain(pool, rc, model)
                                                  : madar_theta_select_class(pool, rc, model);
    }
    throw Error("strategy_dispatch: unknown strategy");
}

struct RunResult {
    AccuracyMatrix matrix;
    std::vector<std::vector<double>> loss_traces;  // per task, per epoch
    std::vector<double> task_seconds;
    MlpModel model;  // state after the final task
};

/// Drive one continual-learning run over a stream: per task, select replay,
/// train, score every holdout seen so far, then retire the task's train split
/// into the pool. Deterministic given (stream, config seeds).
inline RunResult run_scenario(const TaskStream& stream, const ScenarioConfig& cfg) {
    if (stream.tasks.empty()) throw Error("run_scenario: stream has no tasks");
    if (stream.scenario != cfg.kind) {
        throw Error("run_scenario: config says " + to_string(cfg.kind) + " but the stream is " +
                    to_string(stream.scenario));
    }
    validate_trainer_config(cfg.trainer);

    std::vector<int> dims;
    dims.push_back(stream.feature_dim);
    dims.insert(dims.end(), cfg.trainer.hidden_dims.begin(), cfg.trainer.hidden_dims.end());
    dims.push_back(stream.num_classes);

    RunResult result;
    result.matrix = AccuracyMatrix(stream.num_tasks());
    result.model = mlp_init(dims, cfg.trainer.dropout, derive_seed(cfg.trainer.seed, 8000));
    OptimizerState state = adam_init(result.model, cfg.trainer.lr);

    DataPool pool;
    std::vector<LabeledSet> holdouts;
    for (const TaskData& task : stream.tasks) holdouts.push_back(to_labeled(stream, task.holdout));

    for (int i = 0; i < stream.num_tasks(); ++i) {
        const auto started = std::chrono::steady_clock::now();
        const TaskData& task = stream.tasks[static_cast<std::size_t>(i)];
        try {
            if (cfg.replay.strategy == Strategy::Joint) {
                result.model = mlp_init(dims, cfg.trainer.dropout,
                                        derive_seed(cfg.trainer.seed, 8100 + static_cast<std::uint64_t>(i)));
                state = adam_init(result.model, cfg.trainer.lr);
            }
            const ReplaySet replay = strategy_dispatch(
                cfg, pool, result.model,
                derive_seed(cfg.replay.seed, 9000 + static_cast<std::uint64_t>(i)));
            const LabeledSet train_set = build_training_set(stream, task, replay);
            result.loss_traces.push_back(train_task(
                result.model, state, train_set, train_mask(stream, i), cfg.trainer.epochs,
                cfg.trainer.batch_size,
                derive_seed(cfg.trainer.seed, 8200 + static_cast<std::uint64_t>(i))));
            for (int j = 0; j <= i; ++j) {
                result.matrix.set(i, j,
                                  evaluate(result.model, holdouts[static_cast<std::size_t>(j)],
                                           eval_mask(stream, i, j)));
            }
            pool_append(pool, task);
        } catch (const Error& e) {
            throw Error("task " + std::to_string(i) + ": " + e.what());
        }
        result.task_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    }
    return result;
}

}  // namespace madar
