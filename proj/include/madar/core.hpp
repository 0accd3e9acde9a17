#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace madar {

/// Library-wide failure type. Submodules throw this (or ConfigError) with a
/// message naming the offending input; nothing is reported via error codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad user-supplied configuration (CLI maps this to exit code 1, everything
/// else to 2).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

using FamilyId = std::uint32_t;

/// Family id 0 is the catch-all bucket for unattributed malware.
inline constexpr FamilyId kOtherFamily = 0;

/// Goodware carries no family; it is tagged with the max id so that family
/// maps never collide with real malware families.
inline constexpr FamilyId kGoodwareFamily = std::numeric_limits<FamilyId>::max();

inline constexpr int kLabelGoodware = 0;
inline constexpr int kLabelMalware = 1;

enum class Scenario { DomainIl, ClassIl, TaskIl };

inline std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::DomainIl: return "domain-il";
        case Scenario::ClassIl: return "class-il";
        case Scenario::TaskIl: return "task-il";
    }
    throw Error("unknown scenario enum value");
}

inline Scenario scenario_from_string(const std::string& s) {
    if (s == "domain-il") return Scenario::DomainIl;
    if (s == "class-il") return Scenario::ClassIl;
    if (s == "task-il") return Scenario::TaskIl;
    throw ConfigError("unknown scenario '" + s + "' (expected domain-il, class-il or task-il)");
}

/// One labeled example. Identity is (origin_task, origin_index); replay
/// bookkeeping (disjointness checks, budget audits) keys on it, never on
/// feature values.
struct Sample {
    Eigen::VectorXd features;
    int label = kLabelGoodware;
    FamilyId family = kGoodwareFamily;
    int origin_task = 0;
    int origin_index = 0;
};

struct SampleKey {
    int task = 0;
    int index = 0;
    friend auto operator<=>(const SampleKey&, const SampleKey&) = default;
};

inline SampleKey key_of(const Sample& s) { return {s.origin_task, s.origin_index}; }

/// Dense training/eval batch: one row per sample, integer class targets.
struct LabeledSet {
    Eigen::MatrixXd x;
    std::vector<int> y;

    std::size_t size() const { return y.size(); }
};

/// One episode of the stream.
struct TaskData {
    int task_id = 0;
    std::vector<Sample> train;
    std::vector<Sample> holdout;
    std::vector<int> active_classes;  // sorted; cumulative for Class-IL, own set for Task-IL
};

/// A full continual-learning stream plus the label geometry the scenario
/// needs: output width and the family -> class id map (empty for Domain-IL,
/// where targets are the binary labels themselves).
struct TaskStream {
    Scenario scenario = Scenario::DomainIl;
    int feature_dim = 0;
    int num_classes = 2;
    std::vector<TaskData> tasks;
    std::map<FamilyId, int> class_of_family;

    int num_tasks() const { return static_cast<int>(tasks.size()); }
};

/// Class target for a sample under the stream's scenario.
inline int target_of(const TaskStream& stream, const Sample& s) {
    if (stream.scenario == Scenario::DomainIl) return s.label;
    auto it = stream.class_of_family.find(s.family);
    if (it == stream.class_of_family.end()) {
        throw Error("sample family " + std::to_string(s.family) +
                    " has no class id in this stream");
    }
    return it->second;
}

/// Pack samples into a dense batch with scenario targets.
inline LabeledSet to_labeled(const TaskStream& stream, const std::vector<Sample>& samples) {
    LabeledSet set;
    set.x.resize(static_cast<Eigen::Index>(samples.size()), stream.feature_dim);
    set.y.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].features.size() != stream.feature_dim) {
            throw Error("sample feature width " + std::to_string(samples[i].features.size()) +
                        " does not match stream width " + std::to_string(stream.feature_dim));
        }
        set.x.row(static_cast<Eigen::Index>(i)) = samples[i].features.transpose();
        set.y.push_back(target_of(stream, samples[i]));
    }
    return set;
}

/// Write `content` to `path` via a temp file + rename, so readers never see a
/// half-written file.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open '" + tmp + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("short write to '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw Error("cannot rename '" + tmp + "' to '" + path + "'");
    }
}

/// Per-family sample counts over everything held in a pool. Ordered map so
/// iteration order (ascending family id) is deterministic.
class FamilyCensus {
public:
    void add(FamilyId family, std::size_t n = 1) {
        counts_[family] += n;
        if (family != kGoodwareFamily) total_malware_ += n;
    }

    /// Count for a family; 0 when the family has never been seen.
    std::size_t lookup(FamilyId family) const {
        auto it = counts_.find(family);
        return it == counts_.end() ? 0 : it->second;
    }

    std::size_t total_malware() const { return total_malware_; }

    std::size_t num_families() const {
        return counts_.size() - counts_.count(kGoodwareFamily);
    }

    const std::map<FamilyId, std::size_t>& counts() const { return counts_; }

private:
    std::map<FamilyId, std::size_t> counts_;
    std::size_t total_malware_ = 0;
};

/// Replay memory: every train sample of every completed task, with a running
/// family census kept in lock-step.
struct DataPool {
    std::vector<Sample> samples;
    FamilyCensus census;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

/// Append a finished task's train split to the pool. Holdout rows never enter
/// the pool. Feature widths must agree with what the pool already holds.
inline void pool_append(DataPool& pool, const TaskData& task) {
    if (!pool.samples.empty() && !task.train.empty() &&
        pool.samples.front().features.size() != task.train.front().features.size()) {
        throw Error("pool_append: task " + std::to_string(task.task_id) +
                    " feature width " + std::to_string(task.train.front().features.size()) +
                    " does not match pool width " +
                    std::to_string(pool.samples.front().features.size()));
    }
    pool.samples.reserve(pool.samples.size() + task.train.size());
    for (const Sample& s : task.train) {
        pool.samples.push_back(s);
        pool.census.add(s.family);
    }
}

/// Lower-triangular accuracy matrix: at(i, j) = accuracy on task j's holdout
/// after training through task i, defined for j <= i.
class AccuracyMatrix {
public:
    AccuracyMatrix() = default;
    explicit AccuracyMatrix(int num_tasks) : rows_(static_cast<std::size_t>(num_tasks)) {
        if (num_tasks < 0) throw Error("AccuracyMatrix: negative task count");
        for (int i = 0; i < num_tasks; ++i) {
            rows_[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(i) + 1, kUnset);
        }
    }

    int num_tasks() const { return static_cast<int>(rows_.size()); }

    void set(int i, int j, double accuracy) {
        check_index(i, j);
        if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
            throw Error("AccuracyMatrix: accuracy " + std::to_string(accuracy) +
                        " outside [0, 1] at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
        }
        rows_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = accuracy;
    }

    double at(int i, int j) const {
        check_index(i, j);
        double v = rows_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (v == kUnset) {
            throw Error("AccuracyMatrix: cell (" + std::to_string(i) + ", " +
                        std::to_string(j) + ") was never filled");
        }
        return v;
    }

    bool row_complete(int i) const {
        if (i < 0 || i >= num_tasks()) return false;
        const auto& row = rows_[static_cast<std::size_t>(i)];
        return std::none_of(row.begin(), row.end(), [](double v) { return v == kUnset; });
    }

    bool complete() const {
        for (int i = 0; i < num_tasks(); ++i) {
            if (!row_complete(i)) return false;
        }
        return true;
    }

private:
    static constexpr double kUnset = -1.0;

    void check_index(int i, int j) const {
        if (i < 0 || i >= num_tasks() || j < 0 || j > i) {
            throw Error("AccuracyMatrix: index (" + std::to_string(i) + ", " +
                        std::to_string(j) + ") outside lower triangle of " +
                        std::to_string(num_tasks()) + " tasks");
        }
    }

    std::vector<std::vector<double>> rows_;
};

}  // namespace madar
