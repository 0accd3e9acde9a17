#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "madar/core.hpp"
#include "madar/rng.hpp"

namespace madar {

/// Gaussian mode of a family (or of the goodware mixture).
struct SubCluster {
    Eigen::VectorXd center;
    double scale = 1.0;   // isotropic std-dev
    double weight = 1.0;  // relative draw probability within the family
};

/// Geometry and scheduling of one malware family.
struct FamilySpec {
    FamilyId family = 1;
    std::vector<SubCluster> sub_clusters;
    double size_weight = 1.0;        // relative share of a task's malware
    std::vector<int> active_tasks;   // explicit schedule; empty = scheduler decides
};

/// Full recipe for a synthetic stream. A spec plus a seed determines every
/// byte of the generated stream.
struct StreamSpec {
    Scenario scenario = Scenario::DomainIl;
    int num_tasks = 6;
    int feature_dim = 64;
    std::vector<FamilySpec> families;
    std::vector<SubCluster> goodware_clusters;
    double goodware_ratio = 0.5;     // goodware share of each task (Domain-IL)
    double churn_rate = 0.0;         // share of active families swapped per task
    double other_fraction = 0.0;     // malware relabeled to the catch-all family
    double drift = 0.0;              // per-task center drift, relative to cluster scale
    int samples_per_task = 600;
    double holdout_fraction = 0.2;
    int initial_families = 0;        // Class-IL: families in task 0
    int families_per_increment = 0;  // Class-IL: new families per later task
    int families_per_task = 0;       // Task-IL: partition width
    std::uint64_t seed = 1;
};

namespace detail {

inline std::size_t pick_weighted(Rng& rng, const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) throw Error("cluster weight must be finite and >= 0");
        total += w;
    }
    if (total <= 0.0) throw Error("cluster weights sum to zero");
    double u = rng.real01() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        u -= weights[i];
        if (u < 0.0) return i;
    }
    return weights.size() - 1;
}

/// Split `total` into integer counts proportional to non-negative weights
/// (largest-remainder rounding; ties to larger weight, then lower index).
inline std::vector<long long> proportional_counts(long long total,
                                                  const std::vector<double>& weights) {
    const std::size_t n = weights.size();
    std::vector<long long> out(n, 0);
    double sum = 0.0;
    for (double w : weights) sum += w;
    if (n == 0 || total <= 0) return out;
    if (sum <= 0.0) throw Error("proportional_counts: weights sum to zero");

    std::vector<double> frac(n);
    long long assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double exact = static_cast<double>(total) * (weights[i] / sum);
        out[i] = static_cast<long long>(std::floor(exact));
        frac[i] = exact - std::floor(exact);
        assigned += out[i];
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (frac[a] != frac[b]) return frac[a] > frac[b];
        if (weights[a] != weights[b]) return weights[a] > weights[b];
        return a < b;
    });
    for (std::size_t k = 0; assigned < total; ++k) {
        out[order[k % n]] += 1;
        ++assigned;
    }
    return out;
}

inline Eigen::VectorXd random_unit_vector(int dim, Rng& rng) {
    Eigen::VectorXd v(dim);
    double norm2 = 0.0;
    do {
        for (int i = 0; i < dim; ++i) v[i] = rng.normal();
        norm2 = v.squaredNorm();
    } while (norm2 == 0.0);
    return v / std::sqrt(norm2);
}

}  // namespace detail

/// Draw n samples from a family's sub-cluster mixture. origin_task is stamped
/// on each sample; origin_index is left for the caller (it owns the task-wide
/// numbering).
inline std::vector<Sample> generate_family_samples(const FamilySpec& fspec, int n,
                                                   int origin_task, Rng& rng) {
    if (n < 0) throw Error("generate_family_samples: negative count");
    if (n > 0 && fspec.sub_clusters.empty()) {
        throw Error("family " + std::to_string(fspec.family) + " has no sub-clusters");
    }
    std::vector<double> weights;
    weights.reserve(fspec.sub_clusters.size());
    for (const auto& c : fspec.sub_clusters) weights.push_back(c.weight);

    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const SubCluster& c = fspec.sub_clusters[detail::pick_weighted(rng, weights)];
        Sample s;
        s.features.resize(c.center.size());
        for (Eigen::Index d = 0; d < c.center.size(); ++d) {
            s.features[d] = c.center[d] + c.scale * rng.normal();
        }
        s.label = kLabelMalware;
        s.family = fspec.family;
        s.origin_task = origin_task;
        out.push_back(std::move(s));
    }
    return out;
}

inline void validate_stream_spec(const StreamSpec& spec) {
    if (spec.num_tasks < 1) throw ConfigError("stream: num_tasks must be >= 1");
    if (spec.feature_dim < 1) throw ConfigError("stream: feature_dim must be >= 1");
    if (spec.samples_per_task < 2) throw ConfigError("stream: samples_per_task must be >= 2");
    if (spec.holdout_fraction <= 0.0 || spec.holdout_fraction >= 1.0) {
        throw ConfigError("stream: holdout_fraction must lie in (0, 1)");
    }
    if (spec.goodware_ratio < 0.0 || spec.goodware_ratio >= 1.0) {
        throw ConfigError("stream: goodware_ratio must lie in [0, 1)");
    }
    if (spec.churn_rate < 0.0 || spec.churn_rate > 1.0) {
        throw ConfigError("stream: churn_rate must lie in [0, 1]");
    }
    if (spec.other_fraction < 0.0 || spec.other_fraction >= 1.0) {
        throw ConfigError("stream: other_fraction must lie in [0, 1)");
    }
    if (spec.drift < 0.0) throw ConfigError("stream: drift must be >= 0");
    if (spec.families.empty()) throw ConfigError("stream: at least one family is required");

    std::set<FamilyId> seen;
    for (const auto& f : spec.families) {
        if (f.family == kOtherFamily || f.family == kGoodwareFamily) {
            throw ConfigError("stream: family ids 0 and " + std::to_string(kGoodwareFamily) +
                              " are reserved");
        }
        if (!seen.insert(f.family).second) {
            throw ConfigError("stream: duplicate family id " + std::to_string(f.family));
        }
        if (f.sub_clusters.empty()) {
            throw ConfigError("stream: family " + std::to_string(f.family) + " has no sub-clusters");
        }
        if (f.size_weight <= 0.0) {
            throw ConfigError("stream: family " + std::to_string(f.family) +
                              " size_weight must be > 0");
        }
        for (const auto& c : f.sub_clusters) {
            if (c.center.size() != spec.feature_dim) {
                throw ConfigError("stream: family " + std::to_string(f.family) +
                                  " sub-cluster center width does not match feature_dim");
            }
            if (c.scale < 0.0) throw ConfigError("stream: sub-cluster scale must be >= 0");
        }
        for (int t : f.active_tasks) {
            if (t < 0 || t >= spec.num_tasks) {
                throw ConfigError("stream: family " + std::to_string(f.family) +
                                  " active_tasks entry " + std::to_string(t) + " out of range");
            }
        }
    }
    if (spec.goodware_ratio > 0.0 && spec.goodware_clusters.empty()) {
        throw ConfigError("stream: goodware_ratio > 0 requires goodware clusters");
    }
    for (const auto& c : spec.goodware_clusters) {
        if (c.center.size() != spec.feature_dim) {
            throw ConfigError("stream: goodware cluster center width does not match feature_dim");
        }
    }

    const int num_families = static_cast<int>(spec.families.size());
    if (spec.scenario != Scenario::DomainIl) {
        if (spec.goodware_ratio != 0.0) {
            throw ConfigError("stream: " + to_string(spec.scenario) +
                              " is malware-only; goodware_ratio must be 0");
        }
        if (spec.other_fraction != 0.0) {
            throw ConfigError("stream: " + to_string(spec.scenario) +
                              " uses families as classes; other_fraction must be 0");
        }
        for (const auto& f : spec.families) {
            if (!f.active_tasks.empty()) {
                throw ConfigError("stream: explicit family schedules are a Domain-IL feature");
            }
        }
    }
    if (spec.scenario == Scenario::ClassIl) {
        if (spec.initial_families < 1) {
            throw ConfigError("stream: class-il needs initial_families >= 1");
        }
        if (spec.num_tasks > 1 && spec.families_per_increment < 1) {
            throw ConfigError("stream: class-il with several tasks needs families_per_increment >= 1");
        }
        const long long expected = spec.initial_families +
            static_cast<long long>(spec.families_per_increment) * (spec.num_tasks - 1);
        if (expected != num_families) {
            throw ConfigError("stream: class-il schedule covers " + std::to_string(expected) +
                              " families but " + std::to_string(num_families) + " are defined");
        }
    }
    if (spec.scenario == Scenario::TaskIl) {
        if (spec.families_per_task < 1) {
            throw ConfigError("stream: task-il needs families_per_task >= 1");
        }
        if (num_families != spec.num_tasks * spec.families_per_task) {
            throw ConfigError("stream: task-il needs num_tasks * families_per_task == " +
                              std::to_string(num_families) + " families");
        }
    }
}

namespace detail {

/// Which families are present in each task. Domain-IL runs the churn
/// scheduler; Class-IL and Task-IL use their fixed introduction schedules.
/// Returns, per task, indices into spec.families.
inline std::vector<std::vector<std::size_t>> family_schedule(const StreamSpec& spec) {
    const std::size_t nf = spec.families.size();
    std::vector<std::vector<std::size_t>> active(static_cast<std::size_t>(spec.num_tasks));

    if (spec.scenario == Scenario::ClassIl) {
        std::size_t next = 0;
        for (int t = 0; t < spec.num_tasks; ++t) {
            const int quota = (t == 0) ? spec.initial_families : spec.families_per_increment;
            for (int k = 0; k < quota; ++k) active[static_cast<std::size_t>(t)].push_back(next++);
        }
        return active;
    }
    if (spec.scenario == Scenario::TaskIl) {
        std::size_t next = 0;
        for (int t = 0; t < spec.num_tasks; ++t) {
            for (int k = 0; k < spec.families_per_task; ++k) {
                active[static_cast<std::size_t>(t)].push_back(next++);
            }
        }
        return active;
    }

    // Domain-IL. Families with explicit schedules are honored verbatim; the
    // rest churn: each task retires round(churn * active) of the lowest-weight
    // active families (ties broken by a seeded shuffle) and brings back that
    // many from the retirement bench, oldest first. When the bench cannot
    // cover the swap, retirement is capped so at least one churning family
    // stays active; otherwise full churn would empty the stream.
    std::vector<std::size_t> scheduled, churning;
    for (std::size_t i = 0; i < nf; ++i) {
        (spec.families[i].active_tasks.empty() ? churning : scheduled).push_back(i);
    }
    for (std::size_t i : scheduled) {
        for (int t : spec.families[i].active_tasks) active[static_cast<std::size_t>(t)].push_back(i);
    }

    std::vector<std::size_t> rank(nf, 0);
    {
        std::vector<std::size_t> perm = churning;
        Rng rng(derive_seed(spec.seed, 5000));
        rng.shuffle(perm);
        for (std::size_t pos = 0; pos < perm.size(); ++pos) rank[perm[pos]] = pos;
    }

    std::vector<std::size_t> current = churning;
    std::deque<std::size_t> bench;
    for (int t = 0; t < spec.num_tasks; ++t) {
        if (t > 0 && spec.churn_rate > 0.0 && !current.empty()) {
            const auto r = static_cast<std::size_t>(
                std::llround(spec.churn_rate * static_cast<double>(current.size())));
            std::vector<std::size_t> incoming;
            for (std::size_t k = 0; k < r && !bench.empty(); ++k) {
                incoming.push_back(bench.front());
                bench.pop_front();
            }
            std::vector<std::size_t> by_weight = current;
            std::sort(by_weight.begin(), by_weight.end(), [&](std::size_t a, std::size_t b) {
                if (spec.families[a].size_weight != spec.families[b].size_weight) {
                    return spec.families[a].size_weight < spec.families[b].size_weight;
                }
                return rank[a] < rank[b];
            });
            const std::size_t retire = std::min(r, current.size() + incoming.size() - 1);
            std::set<std::size_t> retired(by_weight.begin(),
                                          by_weight.begin() + static_cast<std::ptrdiff_t>(retire));
            std::vector<std::size_t> next;
            for (std::size_t i : current) {
                if (!retired.count(i)) next.push_back(i);
            }
            next.insert(next.end(), incoming.begin(), incoming.end());
            for (std::size_t i : by_weight) {
                if (retired.count(i)) bench.push_back(i);
            }
            current = std::move(next);
        }
        auto& slot = active[static_cast<std::size_t>(t)];
        slot.insert(slot.end(), current.begin(), current.end());
        std::sort(slot.begin(), slot.end());
    }
    return active;
}

/// Goodware sub-cluster window for a task. Without churn the whole mixture is
/// used every task; with churn a half-width window slides so the benign
/// population evolves along with the malware roster.
inline std::vector<std::size_t> goodware_window(const StreamSpec& spec, int task) {
    const std::size_t g = spec.goodware_clusters.size();
    std::vector<std::size_t> out;
    if (g == 0) return out;
    if (spec.churn_rate <= 0.0 || g == 1) {
        for (std::size_t i = 0; i < g; ++i) out.push_back(i);
        return out;
    }
    const std::size_t width = std::max<std::size_t>(1, g / 2);
    const auto step = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(spec.churn_rate * static_cast<double>(width))));
    const std::size_t start = (static_cast<std::size_t>(task) * step) % g;
    for (std::size_t i = 0; i < width; ++i) out.push_back((start + i) % g);
    return out;
}

/// Cumulative drift offset applied to a cluster's center at a given task.
/// Each task adds a random direction of length drift * scale.
inline Eigen::VectorXd drift_offset(const StreamSpec& spec, std::uint64_t entity_tag,
                                    std::size_t cluster_idx, double scale, int task) {
    Eigen::VectorXd off = Eigen::VectorXd::Zero(spec.feature_dim);
    if (spec.drift <= 0.0) return off;
    for (int tau = 1; tau <= task; ++tau) {
        Rng rng(derive_seed(derive_seed(spec.seed, 6000 + static_cast<std::uint64_t>(tau)),
                            entity_tag, cluster_idx));
        off += spec.drift * scale * random_unit_vector(spec.feature_dim, rng);
    }
    return off;
}

inline FamilySpec drifted_family(const StreamSpec& spec, const FamilySpec& fspec, int task) {
    FamilySpec shifted = fspec;
    for (std::size_t c = 0; c < shifted.sub_clusters.size(); ++c) {
        shifted.sub_clusters[c].center +=
            drift_offset(spec, fspec.family, c, shifted.sub_clusters[c].scale, task);
    }
    return shifted;
}

}  // namespace detail

/// Materialize the stream a spec describes. Pure function of the spec: two
/// calls yield byte-identical streams.
inline TaskStream generate_stream(const StreamSpec& spec) {
    validate_stream_spec(spec);

    TaskStream stream;
    stream.scenario = spec.scenario;
    stream.feature_dim = spec.feature_dim;

    const auto schedule = detail::family_schedule(spec);

    // Class geometry: Domain-IL is binary; otherwise families become classes
    // in order of first appearance.
    if (spec.scenario == Scenario::DomainIl) {
        stream.num_classes = 2;
    } else {
        int next_class = 0;
        for (const auto& task_families : schedule) {
            for (std::size_t fi : task_families) {
                stream.class_of_family[spec.families[fi].family] = next_class++;
            }
        }
        stream.num_classes = next_class;
    }

    std::vector<int> seen_classes;
    for (int t = 0; t < spec.num_tasks; ++t) {
        const auto& task_families = schedule[static_cast<std::size_t>(t)];
        TaskData task;
        task.task_id = t;

        const long long total = spec.samples_per_task;
        const long long goodware_n =
            std::llround(spec.goodware_ratio * static_cast<double>(total));
        const long long malware_n = total - goodware_n;
        if (malware_n > 0 && task_families.empty()) {
            throw Error("task " + std::to_string(t) + " has no active families to draw from");
        }
        if (spec.scenario != Scenario::DomainIl &&
            malware_n < static_cast<long long>(task_families.size())) {
            throw Error("task " + std::to_string(t) + ": " + std::to_string(malware_n) +
                        " samples cannot cover " + std::to_string(task_families.size()) +
                        " families");
        }

        std::vector<double> weights;
        weights.reserve(task_families.size());
        for (std::size_t fi : task_families) weights.push_back(spec.families[fi].size_weight);
        std::vector<long long> counts = detail::proportional_counts(malware_n, weights);

        // Class/Task-IL: every family is somebody's only training data, so
        // guarantee at least one sample each (taken from the largest family).
        if (spec.scenario != Scenario::DomainIl) {
            for (std::size_t i = 0; i < counts.size(); ++i) {
                while (counts[i] == 0) {
                    auto donor = static_cast<std::size_t>(
                        std::max_element(counts.begin(), counts.end()) - counts.begin());
                    if (counts[donor] <= 1) throw Error("task " + std::to_string(t) +
                                                        ": not enough samples per family");
                    --counts[donor];
                    ++counts[i];
                }
            }
        }

        std::vector<Sample> rows;
        rows.reserve(static_cast<std::size_t>(total));
        for (std::size_t k = 0; k < task_families.size(); ++k) {
            const FamilySpec& base = spec.families[task_families[k]];
            FamilySpec shifted = detail::drifted_family(spec, base, t);
            Rng rng(derive_seed(spec.seed, 1000 + static_cast<std::uint64_t>(t), base.family));
            auto fam_rows = generate_family_samples(shifted, static_cast<int>(counts[k]), t, rng);
            rows.insert(rows.end(), std::make_move_iterator(fam_rows.begin()),
                        std::make_move_iterator(fam_rows.end()));
        }

        if (goodware_n > 0) {
            // Drift models malware evolution; the benign population is a
            // stationary anchor whose only movement is the churn window.
            const auto window = detail::goodware_window(spec, t);
            FamilySpec gw;
            gw.family = kGoodwareFamily;
            for (std::size_t ci : window) {
                gw.sub_clusters.push_back(spec.goodware_clusters[ci]);
            }
            Rng rng(derive_seed(spec.seed, 2000 + static_cast<std::uint64_t>(t)));
            auto gw_rows = generate_family_samples(gw, static_cast<int>(goodware_n), t, rng);
            for (Sample& s : gw_rows) {
                s.label = kLabelGoodware;
                s.family = kGoodwareFamily;
            }
            rows.insert(rows.end(), std::make_move_iterator(gw_rows.begin()),
                        std::make_move_iterator(gw_rows.end()));
        }

        if (spec.other_fraction > 0.0) {
            std::vector<std::size_t> malware_rows;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (rows[i].label == kLabelMalware) malware_rows.push_back(i);
            }
            const auto k = static_cast<std::size_t>(std::llround(
                spec.other_fraction * static_cast<double>(malware_rows.size())));
            Rng rng(derive_seed(spec.seed, 3000 + static_cast<std::uint64_t>(t)));
            for (std::size_t pos : rng.pick(malware_rows.size(), k)) {
                rows[malware_rows[pos]].family = kOtherFamily;
            }
        }

        for (std::size_t i = 0; i < rows.size(); ++i) {
            rows[i].origin_index = static_cast<int>(i);
        }

        // Holdout split: seeded shuffle, then the first slice becomes the
        // holdout. Identities were assigned above, so the two sides can never
        // share a (task, index) key.
        std::vector<std::size_t> order(rows.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng split_rng(derive_seed(spec.seed, 4000 + static_cast<std::uint64_t>(t)));
        split_rng.shuffle(order);
        auto holdout_n = static_cast<std::size_t>(
            std::llround(spec.holdout_fraction * static_cast<double>(rows.size())));
        holdout_n = std::clamp<std::size_t>(holdout_n, 1, rows.size() - 1);
        std::vector<bool> in_holdout(rows.size(), false);
        for (std::size_t i = 0; i < holdout_n; ++i) in_holdout[order[i]] = true;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            (in_holdout[i] ? task.holdout : task.train).push_back(std::move(rows[i]));
        }

        if (spec.scenario == Scenario::DomainIl) {
            task.active_classes = {0, 1};
        } else {
            for (std::size_t fi : task_families) {
                seen_classes.push_back(stream.class_of_family.at(spec.families[fi].family));
            }
            std::sort(seen_classes.begin(), seen_classes.end());
            if (spec.scenario == Scenario::ClassIl) {
                task.active_classes = seen_classes;  // cumulative
            } else {
                for (std::size_t fi : task_families) {
                    task.active_classes.push_back(
                        stream.class_of_family.at(spec.families[fi].family));
                }
                std::sort(task.active_classes.begin(), task.active_classes.end());
                seen_classes.clear();
            }
        }
        stream.tasks.push_back(std::move(task));
    }
    return stream;
}

/// Knobs for synthesizing a StreamSpec with randomized geometry. This is the
/// shape the CLI config exposes; library users who need exact cluster control
/// build a StreamSpec directly.
struct SynthParams {
    Scenario scenario = Scenario::DomainIl;
    int num_tasks = 6;
    int feature_dim = 64;
    int num_families = 20;
    int samples_per_task = 600;
    double goodware_ratio = 0.5;
    double churn_rate = 0.0;
    double other_fraction = 0.0;
    double drift = 0.0;
    double holdout_fraction = 0.2;
    double power_law = 1.1;        // family size profile: weight_k ~ (k+1)^-power_law
    int min_sub_clusters = 2;
    int max_sub_clusters = 4;
    double center_spread = 0.9;    // cluster centers ~ N(0, spread^2 I)
    double cluster_scale = 1.0;
    int goodware_clusters = 6;
    int initial_families = 0;      // Class-IL
    int families_per_increment = 0;
    int families_per_task = 0;     // Task-IL
    std::uint64_t seed = 1;
};

/// Roll concrete family geometry from the knobs. Deterministic in the seed.
inline StreamSpec make_stream_spec(const SynthParams& p) {
    if (p.num_families < 1) throw ConfigError("stream: num_families must be >= 1");
    if (p.min_sub_clusters < 1 || p.max_sub_clusters < p.min_sub_clusters) {
        throw ConfigError("stream: need 1 <= min_sub_clusters <= max_sub_clusters");
    }
    if (p.center_spread < 0.0) throw ConfigError("stream: center_spread must be >= 0");
    if (p.cluster_scale <= 0.0) throw ConfigError("stream: cluster_scale must be > 0");
    if (p.power_law < 0.0) throw ConfigError("stream: power_law must be >= 0");
    if (p.goodware_ratio > 0.0 && p.goodware_clusters < 1) {
        throw ConfigError("stream: goodware_ratio > 0 requires goodware_clusters >= 1");
    }

    StreamSpec spec;
    spec.scenario = p.scenario;
    spec.num_tasks = p.num_tasks;
    spec.feature_dim = p.feature_dim;
    spec.goodware_ratio = p.goodware_ratio;
    spec.churn_rate = p.churn_rate;
    spec.other_fraction = p.other_fraction;
    spec.drift = p.drift;
    spec.samples_per_task = p.samples_per_task;
    spec.holdout_fraction = p.holdout_fraction;
    spec.initial_families = p.initial_families;
    spec.families_per_increment = p.families_per_increment;
    spec.families_per_task = p.families_per_task;
    spec.seed = p.seed;

    Rng rng(derive_seed(p.seed, 7000));
    auto roll_cluster = [&](double weight) {
        SubCluster c;
        c.center.resize(p.feature_dim);
        for (int d = 0; d < p.feature_dim; ++d) c.center[d] = p.center_spread * rng.normal();
        c.scale = p.cluster_scale * rng.uniform(0.8, 1.2);
        c.weight = weight;
        return c;
    };

    for (int k = 0; k < p.num_families; ++k) {
        FamilySpec f;
        f.family = static_cast<FamilyId>(k + 1);
        f.size_weight = std::pow(static_cast<double>(k + 1), -p.power_law);
        const int nc = p.min_sub_clusters +
            static_cast<int>(rng.index(static_cast<std::size_t>(
                p.max_sub_clusters - p.min_sub_clusters + 1)));
        for (int c = 0; c < nc; ++c) f.sub_clusters.push_back(roll_cluster(rng.uniform(0.5, 1.5)));
        spec.families.push_back(std::move(f));
    }
    if (p.goodware_ratio > 0.0) {
        for (int c = 0; c < p.goodware_clusters; ++c) {
            spec.goodware_clusters.push_back(roll_cluster(rng.uniform(0.5, 1.5)));
        }
    }
    return spec;
}

}  // namespace madar
