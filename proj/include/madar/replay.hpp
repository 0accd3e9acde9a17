#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "madar/core.hpp"
#include "madar/isolation_forest.hpp"
#include "madar/mlp.hpp"
#include "madar/rng.hpp"

namespace madar {

enum class Strategy { None, Joint, Grs, Madar, MadarTheta };
enum class Budgeting { Ratio, Uniform };

inline std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::None: return "none";
        case Strategy::Joint: return "joint";
        case Strategy::Grs: return "grs";
        case Strategy::Madar: return "madar";
        case Strategy::MadarTheta: return "madar-theta";
    }
    throw Error("unknown strategy enum value");
}

inline Strategy strategy_from_string(const std::string& s) {
    if (s == "none") return Strategy::None;
    if (s == "joint") return Strategy::Joint;
    if (s == "grs") return Strategy::Grs;
    if (s == "madar") return Strategy::Madar;
    if (s == "madar-theta") return Strategy::MadarTheta;
    throw ConfigError("unknown strategy '" + s +
                      "' (expected none, joint, grs, madar or madar-theta)");
}

inline std::string to_string(Budgeting b) {
    return b == Budgeting::Ratio ? "ratio" : "uniform";
}

inline Budgeting budgeting_from_string(const std::string& s) {
    if (s == "ratio") return Budgeting::Ratio;
    if (s == "uniform") return Budgeting::Uniform;
    throw ConfigError("unknown budgeting '" + s + "' (expected ratio or uniform)");
}

/// Marker for "no budget cap": selection keeps the entire pool.
inline constexpr long long kUnlimitedBudget = std::numeric_limits<long long>::max();

struct ReplayConfig {
    Strategy strategy = Strategy::None;
    Budgeting budgeting = Budgeting::Ratio;
    long long budget = 0;
    double gamma = 0.5;          // goodware share of the budget (Domain-IL)
    double alpha = 0.5;          // representative share within a family budget
    double contamination = 0.1;  // isolation-score cut for the anomalous pool
    bool goodware_match_malware = false;  // size goodware replay to the malware draw instead
    IForestParams iforest;
    std::uint64_t seed = 0;
};

inline void validate_replay_config(const ReplayConfig& cfg) {
    if (cfg.budget < 0) throw ConfigError("replay: budget must be >= 0");
    if (cfg.gamma < 0.0 || cfg.gamma > 1.0) throw ConfigError("replay: gamma must lie in [0, 1]");
    if (cfg.alpha < 0.0 || cfg.alpha > 1.0) throw ConfigError("replay: alpha must lie in [0, 1]");
    if (cfg.contamination < 0.0 || cfg.contamination > 1.0) {
        throw ConfigError("replay: contamination must lie in [0, 1]");
    }
    if (cfg.iforest.num_trees < 1) throw ConfigError("replay: iforest num_trees must be >= 1");
    if (cfg.iforest.subsample_size < 1) {
        throw ConfigError("replay: iforest subsample_size must be >= 1");
    }
}

struct ReplaySet {
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
};

/// Uniform replay: draw exactly budget samples from the pool without
/// replacement, the whole pool when the budget covers it.
inline ReplaySet grs_select(const DataPool& pool, long long budget, std::uint64_t seed) {
    if (budget < 0) throw Error("grs_select: negative budget");
    ReplaySet out;
    if (budget >= static_cast<long long>(pool.size())) {
        out.samples = pool.samples;
        return out;
    }
    Rng rng(seed);
    for (std::size_t i : rng.pick(pool.size(), static_cast<std::size_t>(budget))) {
        out.samples.push_back(pool.samples[i]);
    }
    return out;
}

namespace detail {

/// Split an integer budget between two shares (first gets `first_frac`).
/// Floor both, then hand the leftover unit to the larger fractional part;
/// tie_to_first decides exact halves. The two parts always sum to total.
inline std::pair<long long, long long> split_two(long long total, double first_frac,
                                                 bool tie_to_first) {
    const double a_exact = first_frac * static_cast<double>(total);
    const double b_exact = static_cast<double>(total) - a_exact;
    long long a = static_cast<long long>(std::floor(a_exact));
    long long b = static_cast<long long>(std::floor(b_exact));
    a = std::clamp<long long>(a, 0, total);
    b = std::clamp<long long>(b, 0, total - a);
    long long leftover = total - a - b;
    if (leftover == 1) {
        const double fa = a_exact - std::floor(a_exact);
        const double fb = b_exact - std::floor(b_exact);
        if (fa > fb || (fa == fb && tie_to_first)) {
            ++a;
        } else {
            ++b;
        }
        leftover = 0;
    }
    while (leftover > 0) {  // unreachable in exact arithmetic; guards float dust
        ++a;
        --leftover;
    }
    return {a, b};
}

}  // namespace detail

/// Per-family replay budgets for a malware budget beta_m. Exact integer
/// arithmetic; the returned budgets always sum to beta_m (when any malware
/// family exists). Ratio splits proportionally to family size, uniform splits
/// evenly; leftovers go largest-family-first.
inline std::map<FamilyId, long long> family_budgets(const FamilyCensus& census,
                                                    long long beta_m, Budgeting budgeting) {
    if (beta_m < 0) throw Error("family_budgets: negative budget");
    std::map<FamilyId, long long> out;
    std::vector<std::pair<FamilyId, long long>> fams;  // (id, count)
    for (const auto& [fam, count] : census.counts()) {
        if (fam == kGoodwareFamily || count == 0) continue;
        fams.emplace_back(fam, static_cast<long long>(count));
        out[fam] = 0;
    }
    if (fams.empty() || beta_m == 0) return out;

    if (budgeting == Budgeting::Ratio) {
        const auto total = static_cast<long long>(census.total_malware());
        long long assigned = 0;
        std::vector<std::pair<FamilyId, long long>> rems;  // (id, remainder)
        for (const auto& [fam, count] : fams) {
            const long long num = count * beta_m;  // count and beta_m both bounded by pool scale
            out[fam] = num / total;
            assigned += num / total;
            rems.emplace_back(fam, num % total);
        }
        std::sort(rems.begin(), rems.end(), [&](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            const auto ca = census.lookup(a.first), cb = census.lookup(b.first);
            if (ca != cb) return ca > cb;
            return a.first < b.first;
        });
        for (std::size_t k = 0; assigned < beta_m; ++k) {
            out[rems[k % rems.size()].first] += 1;
            ++assigned;
        }
    } else {
        const auto nf = static_cast<long long>(fams.size());
        const long long base = beta_m / nf;
        long long extra = beta_m % nf;
        for (auto& [fam, budget] : out) budget = base;
        std::vector<FamilyId> order;
        for (const auto& [fam, count] : fams) order.push_back(fam);
        std::sort(order.begin(), order.end(), [&](FamilyId a, FamilyId b) {
            const auto ca = census.lookup(a), cb = census.lookup(b);
            if (ca != cb) return ca > cb;
            return a < b;
        });
        for (long long k = 0; k < extra; ++k) out[order[static_cast<std::size_t>(k)]] += 1;
    }
    return out;
}

/// Budget for one family; 0 for families the census has never seen.
inline long long family_budget(const FamilyCensus& census, FamilyId family, long long beta_m,
                               Budgeting budgeting) {
    const auto table = family_budgets(census, beta_m, budgeting);
    auto it = table.find(family);
    return it == table.end() ? 0 : it->second;
}

namespace detail {

inline Eigen::MatrixXd features_of(const std::vector<const Sample*>& rows) {
    if (rows.empty()) return {};
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.front()->features.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        m.row(static_cast<Eigen::Index>(i)) = rows[i]->features.transpose();
    }
    return m;
}

/// Family-stratified anomalous + representative selection shared by the
/// feature-space and activation-space variants. `embed` maps a family's
/// feature matrix to the space the isolation forest runs in.
template <class Embed>
std::vector<Sample> select_malware(const std::vector<const Sample*>& malware,
                                   const FamilyCensus& census, long long beta_m,
                                   const ReplayConfig& cfg, Embed&& embed) {
    std::map<FamilyId, std::vector<const Sample*>> by_family;
    for (const Sample* s : malware) by_family[s->family].push_back(s);

    const auto budgets = family_budgets(census, beta_m, cfg.budgeting);
    std::vector<Sample> out;
    for (const auto& [family, rows] : by_family) {
        auto it = budgets.find(family);
        const long long budget = it == budgets.end() ? 0 : it->second;
        if (budget <= 0) continue;
        if (static_cast<long long>(rows.size()) <= budget) {
            for (const Sample* s : rows) out.push_back(*s);  // take-all branch
            continue;
        }
        const auto [beta_s, beta_a] = split_two(budget, cfg.alpha, /*tie_to_first=*/true);
        const Eigen::MatrixXd space = embed(features_of(rows));
        const SelectionSplit picked = contamination_split(
            space, cfg.contamination, beta_a, beta_s, cfg.iforest,
            derive_seed(cfg.seed, family));
        for (std::size_t i : picked.anomalous) out.push_back(*rows[i]);
        for (std::size_t i : picked.representative) out.push_back(*rows[i]);
    }
    return out;
}

template <class Embed>
ReplaySet madar_domain_impl(const DataPool& pool, const ReplayConfig& cfg, Embed&& embed) {
    ReplaySet out;
    if (cfg.budget == kUnlimitedBudget) {
        out.samples = pool.samples;
        return out;
    }

    std::vector<const Sample*> goodware, malware;
    for (const Sample& s : pool.samples) {
        (s.family == kGoodwareFamily ? goodware : malware).push_back(&s);
    }
    const auto [beta_g, beta_m] =
        split_two(cfg.budget, cfg.gamma, /*tie_to_first=*/false);  // ties favor malware

    std::vector<Sample> picked_malware =
        select_malware(malware, pool.census, beta_m, cfg, embed);

    const long long goodware_target = cfg.goodware_match_malware
        ? static_cast<long long>(picked_malware.size())
        : beta_g;
    const auto take = static_cast<std::size_t>(
        std::min<long long>(goodware_target, static_cast<long long>(goodware.size())));
    Rng rng(derive_seed(cfg.seed, kGoodwareFamily));
    for (std::size_t i : rng.pick(goodware.size(), take)) {
        out.samples.push_back(*goodware[i]);
    }
    out.samples.insert(out.samples.end(), std::make_move_iterator(picked_malware.begin()),
                       std::make_move_iterator(picked_malware.end()));
    return out;
}

template <class Embed>
ReplaySet madar_class_impl(const DataPool& pool, const ReplayConfig& cfg, Embed&& embed) {
    for (const Sample& s : pool.samples) {
        if (s.family == kGoodwareFamily) {
            throw Error("madar_select_class: pool contains goodware; this selector is for "
                        "malware-only scenarios");
        }
    }
    ReplaySet out;
    if (cfg.budget == kUnlimitedBudget) {
        out.samples = pool.samples;
        return out;
    }
    std::vector<const Sample*> malware;
    for (const Sample& s : pool.samples) malware.push_back(&s);
    out.samples = select_malware(malware, pool.census, cfg.budget, cfg, embed);
    return out;
}

inline auto identity_embed() {
    return [](Eigen::MatrixXd m) { return m; };
}

inline auto activation_embed(const MlpModel& model) {
    return [&model](const Eigen::MatrixXd& m) { return extract_activations(model, m); };
}

}  // namespace detail

/// Domain-IL MADAR: the budget splits gamma/(1-gamma) between goodware and
/// malware; malware is drawn per family via isolation-forest splits, goodware
/// uniformly. An unlimited budget returns the whole pool.
inline ReplaySet madar_select_domain(const DataPool& pool, const ReplayConfig& cfg) {
    validate_replay_config(cfg);
    return detail::madar_domain_impl(pool, cfg, detail::identity_embed());
}

/// Class/Task-IL MADAR: the full budget goes to per-family malware selection.
inline ReplaySet madar_select_class(const DataPool& pool, const ReplayConfig& cfg) {
    validate_replay_config(cfg);
    return detail::madar_class_impl(pool, cfg, detail::identity_embed());
}

/// MADAR in activation space: identical selection machinery, but the
/// isolation forest ranks the model's penultimate-layer embedding of each
/// family instead of raw features. Selected rows map back to their source
/// samples by index.
inline ReplaySet madar_theta_select_domain(const DataPool& pool, const ReplayConfig& cfg,
                                           const MlpModel& model) {
    validate_replay_config(cfg);
    if (!pool.empty() && pool.samples.front().features.size() != model.input_dim()) {
        throw Error("madar_theta_select_domain: model input width does not match pool features");
    }
    return detail::madar_domain_impl(pool, cfg, detail::activation_embed(model));
}

inline ReplaySet madar_theta_select_class(const DataPool& pool, const ReplayConfig& cfg,
                                          const MlpModel& model) {
    validate_replay_config(cfg);
    if (!pool.empty() && pool.samples.front().features.size() != model.input_dim()) {
        throw Error("madar_theta_select_class: model input width does not match pool features");
    }
    return detail::madar_class_impl(pool, cfg, detail::activation_embed(model));
}

/// Replay batch + current task, in canonical identity order. Canonical order
/// means equal training sets give equal batch sequences, independent of how
/// the selection happened to order its output.
inline LabeledSet build_training_set(const TaskStream& stream, const TaskData& task,
                                     const ReplaySet& replay) {
    std::vector<Sample> combined;
    combined.reserve(task.train.size() + replay.samples.size());
    combined.insert(combined.end(), task.train.begin(), task.train.end());
    combined.insert(combined.end(), replay.samples.begin(), replay.samples.end());
    std::sort(combined.begin(), combined.end(), [](const Sample& a, const Sample& b) {
        return key_of(a) < key_of(b);
    });
    return to_labeled(stream, combined);
}

}  // namespace madar
