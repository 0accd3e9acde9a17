#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "madar/core.hpp"
#include "madar/rng.hpp"
#include "madar/stream_synth.hpp"

namespace madar {

/// Flat on-disk dataset: one row per sample with its task key. Task keys are
/// arbitrary non-negative integers; partition_by_task compacts them.
struct RawDataset {
    Eigen::MatrixXd features;  // rows = samples
    std::vector<int> labels;
    std::vector<FamilyId> families;
    std::vector<long long> task_keys;

    Eigen::Index rows() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

template <class T>
T parse_number(std::string_view field, std::size_t line_no, const char* what) {
    T value{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw Error("csv line " + std::to_string(line_no) + ": bad " + what + " '" +
                    std::string(field) + "'");
    }
    return value;
}

inline void append_double(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace detail

/// Expected header for width D: task,label,family,f0,...,f{D-1}.
inline std::string csv_header(int dim) {
    std::string h = "task,label,family";
    for (int d = 0; d < dim; ++d) h += ",f" + std::to_string(d);
    return h;
}

/// Parse a dataset CSV. Errors carry 1-based line numbers. Rows must be
/// grouped by non-decreasing task key. Goodware rows (label 0) get the
/// goodware family tag regardless of their family column; malware rows must
/// not use the reserved ids.
inline RawDataset load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw Error("'" + path + "' is empty");
    const auto header = detail::split_fields(line);
    if (header.size() < 4 || header[0] != "task" || header[1] != "label" ||
        header[2] != "family") {
        throw Error("csv line 1: header must be task,label,family,f0,...");
    }
    const auto dim = static_cast<Eigen::Index>(header.size() - 3);
    for (Eigen::Index d = 0; d < dim; ++d) {
        if (header[static_cast<std::size_t>(d) + 3] != "f" + std::to_string(d)) {
            throw Error("csv line 1: feature column " + std::to_string(d) +
                        " must be named f" + std::to_string(d));
        }
    }

    std::vector<double> values;
    RawDataset ds;
    std::size_t line_no = 1;
    long long prev_task = -1;
    std::set<long long> closed_tasks;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_fields(line);
        if (fields.size() != header.size()) {
            throw Error("csv line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
        }
        const auto task = detail::parse_number<long long>(fields[0], line_no, "task key");
        if (task < 0) {
            throw Error("csv line " + std::to_string(line_no) + ": task key must be >= 0");
        }
        if (task != prev_task) {
            if (closed_tasks.count(task)) {
                throw Error("csv line " + std::to_string(line_no) + ": task " +
                            std::to_string(task) + " rows are not contiguous");
            }
            if (prev_task >= 0) closed_tasks.insert(prev_task);
            if (task < prev_task) {
                throw Error("csv line " + std::to_string(line_no) +
                            ": task keys must be grouped in ascending order");
            }
            prev_task = task;
        }
        const auto label = detail::parse_number<int>(fields[1], line_no, "label");
        if (label != kLabelGoodware && label != kLabelMalware) {
            throw Error("csv line " + std::to_string(line_no) + ": label must be 0 or 1");
        }
        auto family = detail::parse_number<std::uint64_t>(fields[2], line_no, "family id");
        if (label == kLabelGoodware) {
            family = kGoodwareFamily;  // family column carries no meaning for goodware
        } else if (family >= kGoodwareFamily) {
            throw Error("csv line " + std::to_string(line_no) + ": family id " +
                        std::to_string(family) + " is reserved or out of range");
        }
        for (std::size_t d = 0; d < static_cast<std::size_t>(dim); ++d) {
            values.push_back(detail::parse_number<double>(fields[d + 3], line_no, "feature"));
        }
        ds.labels.push_back(label);
        ds.families.push_back(static_cast<FamilyId>(family));
        ds.task_keys.push_back(task);
    }
    if (ds.labels.empty()) throw Error("'" + path + "' has a header but no rows");

    const auto n = static_cast<Eigen::Index>(ds.labels.size());
    ds.features.resize(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index d = 0; d < dim; ++d) {
            ds.features(i, d) = values[static_cast<std::size_t>(i * dim + d)];
        }
    }
    return ds;
}

/// Serialize a stream to the CSV schema (train and holdout rows together,
/// ordered by task then original index). %.17g keeps doubles round-trippable.
inline std::string stream_to_csv(const TaskStream& stream) {
    std::string out = csv_header(stream.feature_dim);
    out += '\n';
    for (const TaskData& task : stream.tasks) {
        std::vector<const Sample*> rows;
        for (const Sample& s : task.train) rows.push_back(&s);
        for (const Sample& s : task.holdout) rows.push_back(&s);
        std::sort(rows.begin(), rows.end(), [](const Sample* a, const Sample* b) {
            return a->origin_index < b->origin_index;
        });
        for (const Sample* s : rows) {
            out += std::to_string(task.task_id);
            out += ',';
            out += std::to_string(s->label);
            out += ',';
            out += std::to_string(s->family);
            for (Eigen::Index d = 0; d < s->features.size(); ++d) {
                out += ',';
                detail::append_double(out, s->features[d]);
            }
            out += '\n';
        }
    }
    return out;
}

inline void save_csv(const TaskStream& stream, const std::string& path) {
    write_file_atomic(path, stream_to_csv(stream));
}

/// Per-column keep mask: true where the population variance exceeds the
/// threshold. Refuses to erase the whole feature space.
inline std::vector<bool> variance_filter(const Eigen::MatrixXd& features, double threshold) {
    if (features.rows() == 0) throw Error("variance_filter: no rows");
    const Eigen::Index n = features.rows();
    std::vector<bool> keep(static_cast<std::size_t>(features.cols()));
    std::size_t kept = 0;
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
        const double mean = features.col(c).mean();
        const double var = (features.col(c).array() - mean).square().sum() /
                           static_cast<double>(n);
        keep[static_cast<std::size_t>(c)] = var > threshold;
        kept += keep[static_cast<std::size_t>(c)];
    }
    if (kept == 0) {
        throw Error("variance_filter: threshold " + std::to_string(threshold) +
                    " removes every feature");
    }
    return keep;
}

inline RawDataset apply_column_mask(const RawDataset& ds, const std::vector<bool>& keep) {
    if (keep.size() != static_cast<std::size_t>(ds.dim())) {
        throw Error("apply_column_mask: mask width does not match dataset");
    }
    Eigen::Index kept = 0;
    for (bool k : keep) kept += k;
    RawDataset out;
    out.labels = ds.labels;
    out.families = ds.families;
    out.task_keys = ds.task_keys;
    out.features.resize(ds.rows(), kept);
    Eigen::Index dst = 0;
    for (Eigen::Index c = 0; c < ds.dim(); ++c) {
        if (keep[static_cast<std::size_t>(c)]) out.features.col(dst++) = ds.features.col(c);
    }
    return out;
}

/// Build a TaskStream from a flat dataset: group rows by task key, compact
/// keys to 0..N-1, and carve a seeded holdout slice per task. For Class-IL /
/// Task-IL the data must be malware-only; families become classes in order of
/// first appearance.
inline TaskStream partition_by_task(const RawDataset& ds, Scenario scenario,
                                    double holdout_fraction, std::uint64_t seed) {
    if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0) {
        throw ConfigError("holdout_fraction must lie in (0, 1)");
    }
    if (ds.rows() == 0) throw Error("partition_by_task: empty dataset");

    std::vector<long long> distinct = ds.task_keys;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::map<long long, int> task_of_key;
    for (std::size_t i = 0; i < distinct.size(); ++i) {
        task_of_key[distinct[i]] = static_cast<int>(i);
    }

    TaskStream stream;
    stream.scenario = scenario;
    stream.feature_dim = static_cast<int>(ds.dim());

    std::vector<std::vector<std::size_t>> rows_of(distinct.size());
    for (std::size_t i = 0; i < static_cast<std::size_t>(ds.rows()); ++i) {
        if (scenario != Scenario::DomainIl && ds.labels[i] == kLabelGoodware) {
            throw Error("row " + std::to_string(i) + " is goodware; " + to_string(scenario) +
                        " streams are malware-only");
        }
        rows_of[static_cast<std::size_t>(task_of_key.at(ds.task_keys[i]))].push_back(i);
    }

    if (scenario == Scenario::DomainIl) {
        stream.num_classes = 2;
    } else {
        int next_class = 0;
        for (const auto& rows : rows_of) {
            for (std::size_t i : rows) {
                if (!stream.class_of_family.count(ds.families[i])) {
                    stream.class_of_family[ds.families[i]] = next_class++;
                }
            }
        }
        stream.num_classes = next_class;
    }

    std::vector<int> cumulative_classes;
    for (std::size_t t = 0; t < rows_of.size(); ++t) {
        const auto& rows = rows_of[t];
        if (rows.size() < 2) {
            throw Error("task " + std::to_string(t) + " has only " +
                        std::to_string(rows.size()) + " samples; need at least 2 to split");
        }
        TaskData task;
        task.task_id = static_cast<int>(t);

        std::vector<Sample> samples;
        samples.reserve(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const std::size_t i = rows[k];
            Sample s;
            s.features = ds.features.row(static_cast<Eigen::Index>(i)).transpose();
            s.label = ds.labels[i];
            s.family = ds.families[i];
            s.origin_task = task.task_id;
            s.origin_index = static_cast<int>(k);
            samples.push_back(std::move(s));
        }

        std::vector<std::size_t> order(samples.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng split_rng(derive_seed(seed, 4000 + static_cast<std::uint64_t>(t)));
        split_rng.shuffle(order);
        auto holdout_n = static_cast<std::size_t>(
            std::llround(holdout_fraction * static_cast<double>(samples.size())));
        holdout_n = std::clamp<std::size_t>(holdout_n, 1, samples.size() - 1);
        std::vector<bool> in_holdout(samples.size(), false);
        for (std::size_t i = 0; i < holdout_n; ++i) in_holdout[order[i]] = true;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            (in_holdout[i] ? task.holdout : task.train).push_back(std::move(samples[i]));
        }

        if (scenario == Scenario::DomainIl) {
            task.active_classes = {0, 1};
        } else {
            std::set<int> own;
            for (std::size_t i : rows) own.insert(stream.class_of_family.at(ds.families[i]));
            if (scenario == Scenario::ClassIl) {
                for (int c : own) cumulative_classes.push_back(c);
                std::sort(cumulative_classes.begin(), cumulative_classes.end());
                cumulative_classes.erase(
                    std::unique(cumulative_classes.begin(), cumulative_classes.end()),
                    cumulative_classes.end());
                task.active_classes = cumulative_classes;
            } else {
                task.active_classes.assign(own.begin(), own.end());
            }
        }
        stream.tasks.push_back(std::move(task));
    }
    return stream;
}

}  // namespace madar
