// Acceptance gate: ten end-to-end checks over the whole library, each printing
// exactly one [PASS]/[FAIL] line. Thresholds are hard gates, never compiled
// out; the binary exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "madar/experiment.hpp"

namespace {

using namespace madar;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct CheckFailure {
    std::string detail;
};

void check(bool ok, const std::string& detail) {
    if (!ok) throw CheckFailure{detail};
}

std::string fmt(double v, int prec = 2) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(prec) << v;
    return out.str();
}

int g_failed = 0;

template <class Body>
void criterion(int id, const char* title, Body&& body) {
    const auto started = Clock::now();
    std::string detail;
    bool ok = true;
    try {
        detail = body();
    } catch (const CheckFailure& f) {
        ok = false;
        detail = f.detail;
    } catch (const std::exception& e) {
        ok = false;
        detail = std::string("unexpected error: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - started).count();
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << id << " (" << title
              << "): " << detail << " [" << fmt(secs, 1) << "s]" << std::endl;
    if (!ok) ++g_failed;
}

double mean_of(const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// 1. Gradient check: analytic vs central-difference derivatives across every
//    parameter, batch-norm in train mode included.
// ---------------------------------------------------------------------------

std::string run_gradient_check() {
    MlpModel model = mlp_init({6, 10, 8, 4}, 0.0, 42);
    const OutputMask mask = OutputMask::all(4);

    std::mt19937_64 gen(7);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd x(5, 6);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(gen);
    const std::vector<int> y = {0, 1, 2, 3, 0};

    Gradients grads;
    {
        Rng dr(1);
        loss_and_gradients(model, x, y, mask, dr, grads, /*update_running=*/false);
    }
    auto loss_at = [&]() {
        Gradients scratch;
        Rng dr(1);
        return loss_and_gradients(model, x, y, mask, dr, scratch, /*update_running=*/false);
    };

    double worst = 0.0;
    std::size_t checked = 0;
    auto probe = [&](double& param, double analytic) {
        const double saved = param;
        const double h = 1e-5 * std::max(1.0, std::abs(saved));
        param = saved + h;
        const double up = loss_at();
        param = saved - h;
        const double down = loss_at();
        param = saved;
        const double fd = (up - down) / (2.0 * h);
        const double err = std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-6});
        worst = std::max(worst, err);
        ++checked;
    };

    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& layer = model.layers[l];
        for (Eigen::Index i = 0; i < layer.w.size(); ++i) {
            probe(layer.w.data()[i], grads.layers[l].w.data()[i]);
        }
        for (Eigen::Index i = 0; i < layer.b.size(); ++i) {
            probe(layer.b(i), grads.layers[l].b(i));
        }
    }
    for (std::size_t l = 0; l < model.bn.size(); ++l) {
        for (Eigen::Index i = 0; i < model.bn[l].gamma.size(); ++i) {
            probe(model.bn[l].gamma(i), grads.bn[l].gamma(i));
        }
        for (Eigen::Index i = 0; i < model.bn[l].beta.size(); ++i) {
            probe(model.bn[l].beta(i), grads.bn[l].beta(i));
        }
    }

    check(worst < 1e-4, "max relative gradient error " + fmt(worst * 1e6, 3) +
                            "e-6 exceeds 1e-4 over " + std::to_string(checked) + " parameters");
    std::ostringstream out;
    out << checked << " parameters, max relative error " << std::scientific
        << std::setprecision(2) << worst << " < 1e-4";
    return out.str();
}

// ---------------------------------------------------------------------------
// 2. Isolation forest precision on planted outliers far outside a Gaussian
//    cluster: the top-scored points must be the planted ones.
// ---------------------------------------------------------------------------

std::string run_planted_outliers() {
    const int kCluster = 200;
    const int kPlanted = 20;
    double total_recovered = 0.0;

    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Eigen::MatrixXd pts(kCluster + kPlanted, 2);
        std::mt19937_64 gen(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int i = 0; i < kCluster; ++i) {
            pts(i, 0) = normal(gen);
            pts(i, 1) = normal(gen);
        }
        for (int k = 0; k < kPlanted; ++k) {
            const double angle = 2.0 * std::numbers::pi * k / kPlanted;
            const double radius = 8.0 + (k % 3);  // all at >= 8 sigma
            pts(kCluster + k, 0) = radius * std::cos(angle);
            pts(kCluster + k, 1) = radius * std::sin(angle);
        }

        const IsolationForest forest = iforest_fit(pts, 100, 256, derive_seed(seed, 17));
        std::vector<std::pair<double, int>> scored;
        for (int i = 0; i < pts.rows(); ++i) {
            const double s = anomaly_score(forest, pts.row(i));
            check(s > 0.0 && s <= 1.0, "anomaly score " + fmt(s, 4) + " outside (0, 1]");
            scored.emplace_back(s, i);
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        int recovered = 0;
        for (int k = 0; k < kPlanted; ++k) {
            if (scored[static_cast<std::size_t>(k)].second >= kCluster) ++recovered;
        }
        total_recovered += recovered;
    }

    const double mean_recovered = total_recovered / 10.0;
    check(mean_recovered >= 18.0, "recovered " + fmt(mean_recovered, 1) +
                                      "/20 planted outliers on average, need >= 18");
    return "recovered " + fmt(mean_recovered, 1) + "/20 planted outliers on average (>= 18)";
}

// ---------------------------------------------------------------------------
// 3. Budget accounting: per-family budgets re-derived from scratch, selection
//    invariants, and a straight-line re-implementation of the full selection
//    that must reproduce the library's replay sets sample for sample.
// ---------------------------------------------------------------------------

std::pair<long long, long long> my_split(long long total, double frac, bool tie_first) {
    const double a_exact = frac * static_cast<double>(total);
    const double b_exact = static_cast<double>(total) - a_exact;
    long long a = std::clamp<long long>(static_cast<long long>(std::floor(a_exact)), 0, total);
    long long b = std::clamp<long long>(static_cast<long long>(std::floor(b_exact)), 0, total - a);
    if (a + b < total) {
        const double fa = a_exact - std::floor(a_exact);
        const double fb = b_exact - std::floor(b_exact);
        if (fa > fb || (fa == fb && tie_first)) {
            a = total - b;
        } else {
            b = total - a;
        }
    }
    return {a, b};
}

std::map<FamilyId, long long> my_family_budgets(const FamilyCensus& census, long long beta_m,
                                                Budgeting budgeting) {
    std::vector<std::pair<FamilyId, long long>> fams;
    std::map<FamilyId, long long> out;
    for (const auto& [fam, count] : census.counts()) {
        if (fam == kGoodwareFamily || count == 0) continue;
        fams.emplace_back(fam, static_cast<long long>(count));
        out[fam] = 0;
    }
    if (fams.empty() || beta_m == 0) return out;

    auto larger_family_first = [&](FamilyId a, FamilyId b) {
        if (census.lookup(a) != census.lookup(b)) return census.lookup(a) > census.lookup(b);
        return a < b;
    };

    if (budgeting == Budgeting::Ratio) {
        const auto total = static_cast<long long>(census.total_malware());
        long long handed = 0;
        std::vector<std::pair<FamilyId, long long>> rems;
        for (const auto& [fam, count] : fams) {
            out[fam] = count * beta_m / total;
            handed += out[fam];
            rems.emplace_back(fam, count * beta_m % total);
        }
        std::sort(rems.begin(), rems.end(), [&](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return larger_family_first(a.first, b.first);
        });
        for (std::size_t k = 0; handed < beta_m; ++k, ++handed) {
            out[rems[k % rems.size()].first] += 1;
        }
    } else {
        const auto nf = static_cast<long long>(fams.size());
        for (auto& [fam, budget] : out) budget = beta_m / nf;
        std::vector<FamilyId> order;
        for (const auto& [fam, count] : fams) order.push_back(fam);
        std::sort(order.begin(), order.end(), larger_family_first);
        for (long long k = 0; k < beta_m % nf; ++k) out[order[static_cast<std::size_t>(k)]] += 1;
    }
    return out;
}

using KeyBag = std::multiset<SampleKey>;

KeyBag my_select_malware(const std::vector<const Sample*>& malware, const FamilyCensus& census,
                         long long beta_m, const ReplayConfig& cfg) {
    std::map<FamilyId, std::vector<const Sample*>> by_family;
    for (const Sample* s : malware) by_family[s->family].push_back(s);
    const auto budgets = my_family_budgets(census, beta_m, cfg.budgeting);

    KeyBag keys;
    for (const auto& [family, rows] : by_family) {
        auto it = budgets.find(family);
        const long long budget = it == budgets.end() ? 0 : it->second;
        if (budget <= 0) continue;
        if (static_cast<long long>(rows.size()) <= budget) {
            for (const Sample* s : rows) keys.insert(key_of(*s));
            continue;
        }
        const auto [beta_s, beta_a] = my_split(budget, cfg.alpha, true);
        Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), rows.front()->features.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            x.row(static_cast<Eigen::Index>(i)) = rows[i]->features.transpose();
        }
        const SelectionSplit picked = contamination_split(x, cfg.contamination, beta_a, beta_s,
                                                          cfg.iforest, derive_seed(cfg.seed, family));
        for (std::size_t i : picked.anomalous) keys.insert(key_of(*rows[i]));
        for (std::size_t i : picked.representative) keys.insert(key_of(*rows[i]));
    }
    return keys;
}

KeyBag my_madar_domain(const DataPool& pool, const ReplayConfig& cfg) {
    KeyBag keys;
    if (cfg.budget == kUnlimitedBudget) {
        for (const Sample& s : pool.samples) keys.insert(key_of(s));
        return keys;
    }
    std::vector<const Sample*> goodware, malware;
    for (const Sample& s : pool.samples) {
        (s.family == kGoodwareFamily ? goodware : malware).push_back(&s);
    }
    const auto [beta_g, beta_m] = my_split(cfg.budget, cfg.gamma, false);
    KeyBag picked = my_select_malware(malware, pool.census, beta_m, cfg);

    const long long target =
        cfg.goodware_match_malware ? static_cast<long long>(picked.size()) : beta_g;
    const auto take = static_cast<std::size_t>(
        std::min<long long>(target, static_cast<long long>(goodware.size())));
    Rng rng(derive_seed(cfg.seed, kGoodwareFamily));
    for (std::size_t i : rng.pick(goodware.size(), take)) keys.insert(key_of(*goodware[i]));
    keys.insert(picked.begin(), picked.end());
    return keys;
}

KeyBag keys_of(const ReplaySet& set) {
    KeyBag keys;
    for (const Sample& s : set.samples) keys.insert(key_of(s));
    return keys;
}

DataPool random_pool(std::mt19937_64& gen, bool with_goodware, int max_rows) {
    std::uniform_int_distribution<int> fam_count(2, 6);
    std::uniform_int_distribution<int> fam_id(1, 30);
    std::normal_distribution<double> normal(0.0, 1.0);

    TaskData task;
    int index = 0;
    const int families = fam_count(gen);
    std::set<FamilyId> used;
    for (int f = 0; f < families && index < max_rows; ++f) {
        FamilyId id = static_cast<FamilyId>(fam_id(gen));
        while (used.count(id)) ++id;
        used.insert(id);
        const int count = std::uniform_int_distribution<int>(3, 120)(gen);
        for (int i = 0; i < count && index < max_rows; ++i) {
            Sample s;
            s.features = Eigen::Vector4d(normal(gen) + static_cast<double>(id), normal(gen),
                                         normal(gen), normal(gen));
            s.label = kLabelMalware;
            s.family = id;
            s.origin_task = 0;
            s.origin_index = index++;
            task.train.push_back(std::move(s));
        }
    }
    if (with_goodware) {
        const int count = std::uniform_int_distribution<int>(5, 150)(gen);
        for (int i = 0; i < count && index < max_rows; ++i) {
            Sample s;
            s.features = Eigen::Vector4d(normal(gen) - 4.0, normal(gen), normal(gen), normal(gen));
            s.label = kLabelGoodware;
            s.family = kGoodwareFamily;
            s.origin_task = 0;
            s.origin_index = index++;
            task.train.push_back(std::move(s));
        }
    }
    DataPool pool;
    pool_append(pool, task);
    return pool;
}

ReplayConfig random_replay_config(std::mt19937_64& gen, long long pool_size) {
    ReplayConfig cfg;
    cfg.budget = std::uniform_int_distribution<long long>(0, pool_size + 20)(gen);
    const double gammas[] = {0.0, 0.3, 0.5, 1.0};
    const double alphas[] = {0.0, 0.4, 0.5, 1.0};
    const double contaminations[] = {0.0, 0.1, 0.5};
    cfg.gamma = gammas[gen() % 4];
    cfg.alpha = alphas[gen() % 4];
    cfg.contamination = contaminations[gen() % 3];
    cfg.budgeting = gen() % 2 ? Budgeting::Ratio : Budgeting::Uniform;
    cfg.goodware_match_malware = gen() % 4 == 0;
    cfg.iforest.num_trees = 50;
    cfg.iforest.subsample_size = 64;
    cfg.seed = gen();
    return cfg;
}

std::string run_budget_accounting() {
    std::mt19937_64 gen(1234);

    // Per-family budget arithmetic against an independent largest-remainder
    // implementation, 200 random instances.
    for (int trial = 0; trial < 200; ++trial) {
        FamilyCensus census;
        const int families = std::uniform_int_distribution<int>(1, 8)(gen);
        std::set<FamilyId> used;
        long long total = 0;
        for (int f = 0; f < families; ++f) {
            FamilyId id = static_cast<FamilyId>(std::uniform_int_distribution<int>(1, 30)(gen));
            while (used.count(id)) ++id;
            used.insert(id);
            const auto count = std::uniform_int_distribution<std::size_t>(1, 150)(gen);
            census.add(id, count);
            total += static_cast<long long>(count);
        }
        if (gen() % 3 == 0) census.add(kGoodwareFamily, 40);  // must be ignored

        const long long beta = std::uniform_int_distribution<long long>(0, total + 10)(gen);
        const Budgeting budgeting = gen() % 2 ? Budgeting::Ratio : Budgeting::Uniform;
        const auto lib = family_budgets(census, beta, budgeting);

        long long handed = 0;
        for (const auto& [fam, budget] : lib) {
            check(budget >= 0, "negative family budget");
            check(fam != kGoodwareFamily, "goodware received a malware budget");
            handed += budget;
        }
        check(handed == beta, "family budgets sum to " + std::to_string(handed) +
                                  ", expected " + std::to_string(beta));
        check(lib == my_family_budgets(census, beta, budgeting),
              "family budgets disagree with the independent re-implementation");
    }

    // Anomalous/representative split invariants: disjoint, bounded, exact fill.
    for (int trial = 0; trial < 30; ++trial) {
        const int n = std::uniform_int_distribution<int>(1, 400)(gen);
        Eigen::MatrixXd pts(n, 3);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = normal(gen);
        const double contaminations[] = {0.0, 0.07, 0.5, 1.0};
        const double contamination = contaminations[gen() % 4];
        const long long ba = std::uniform_int_distribution<long long>(0, n + 10)(gen);
        const long long bs = std::uniform_int_distribution<long long>(0, n + 10)(gen);
        const SelectionSplit split =
            contamination_split(pts, contamination, ba, bs, {50, 64}, gen());

        std::set<std::size_t> seen;
        for (std::size_t i : split.anomalous) {
            check(i < static_cast<std::size_t>(n), "index out of range");
            check(seen.insert(i).second, "anomalous/representative sets overlap");
        }
        for (std::size_t i : split.representative) {
            check(i < static_cast<std::size_t>(n), "index out of range");
            check(seen.insert(i).second, "anomalous/representative sets overlap");
        }
        const auto want = std::min<long long>(ba + bs, n);
        check(static_cast<long long>(seen.size()) == want,
              "split holds " + std::to_string(seen.size()) + " rows, expected " +
                  std::to_string(want));
    }

    // Full selection equality: the library's replay set must match a
    // straight-line re-implementation, sample for sample, under shared seeds.
    for (int trial = 0; trial < 12; ++trial) {
        const DataPool pool = random_pool(gen, true, 1000);
        const ReplayConfig cfg = random_replay_config(gen, static_cast<long long>(pool.size()));
        const ReplaySet lib = madar_select_domain(pool, cfg);
        const KeyBag keys = keys_of(lib);
        check(keys.size() == lib.size(), "replay set holds duplicate samples");
        if (!cfg.goodware_match_malware && cfg.budget != kUnlimitedBudget) {
            check(static_cast<long long>(lib.size()) <= cfg.budget, "replay set exceeds budget");
        }
        check(keys == my_madar_domain(pool, cfg),
              "selection disagrees with the re-implementation (trial " +
                  std::to_string(trial) + ")");
    }
    for (int trial = 0; trial < 8; ++trial) {
        const DataPool pool = random_pool(gen, false, 1000);
        ReplayConfig cfg = random_replay_config(gen, static_cast<long long>(pool.size()));
        cfg.goodware_match_malware = false;
        const ReplaySet lib = madar_select_class(pool, cfg);
        const KeyBag keys = keys_of(lib);
        check(keys.size() == lib.size(), "replay set holds duplicate samples");
        std::vector<const Sample*> malware;
        for (const Sample& s : pool.samples) malware.push_back(&s);
        const KeyBag mine = cfg.budget == kUnlimitedBudget
                                ? keys_of(lib)
                                : my_select_malware(malware, pool.census, cfg.budget, cfg);
        check(cfg.budget == kUnlimitedBudget ? keys.size() == pool.size() : keys == mine,
              "class selection disagrees with the re-implementation (trial " +
                  std::to_string(trial) + ")");
    }

    return "200 budget instances, 30 split instances, 20 pools selected identically";
}

// ---------------------------------------------------------------------------
// 4. Accuracy metric oracle.
// ---------------------------------------------------------------------------

std::string run_metric_oracle() {
    AccuracyMatrix m(2);
    m.set(0, 0, 1.0);
    m.set(1, 0, 0.8);
    m.set(1, 1, 0.9);
    check(global_ap(m) == 92.5, "global average accuracy " + fmt(global_ap(m), 12) +
                                    " != 92.5 exactly");

    std::mt19937_64 gen(55);
    std::uniform_real_distribution<double> cell(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = std::uniform_int_distribution<int>(1, 10)(gen);
        AccuracyMatrix random(n);
        std::vector<std::vector<double>> rows(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j <= i; ++j) {
                const double v = cell(gen);
                random.set(i, j, v);
                rows[static_cast<std::size_t>(i)].push_back(v);
            }
        }
        double total = 0.0;
        for (int i = n - 1; i >= 0; --i) {  // reversed accumulation on purpose
            double row_sum = 0.0;
            for (int j = i; j >= 0; --j) row_sum += rows[static_cast<std::size_t>(i)]
                                                        [static_cast<std::size_t>(j)];
            total += row_sum / (i + 1);
        }
        const double expected = 100.0 * total / n;
        worst = std::max(worst, std::abs(global_ap(random) - expected));
    }
    check(worst <= 1e-12, "recomputation differs by " + fmt(worst * 1e12, 3) + "e-12");
    std::ostringstream out;
    out << "fixed matrix is exactly 92.5; 100 random matrices within " << std::scientific
        << std::setprecision(2) << std::max(worst, 1e-16) << " of recomputation";
    return out.str();
}

// ---------------------------------------------------------------------------
// 5. Unlimited-budget degeneracy: joint retraining, reservoir selection and
//    family-stratified selection all see the same training data.
// ---------------------------------------------------------------------------

std::string run_degeneracy() {
    SynthParams p;
    p.scenario = Scenario::DomainIl;
    p.num_tasks = 3;
    p.feature_dim = 8;
    p.num_families = 4;
    p.samples_per_task = 150;
    p.goodware_ratio = 0.5;
    p.center_spread = 3.0;  // well separated so every variant converges
    p.seed = 404;
    const TaskStream stream = generate_stream(make_stream_spec(p));

    // Training-set equality, replaying the engine's pool evolution by hand.
    ReplayConfig unlimited;
    unlimited.budget = kUnlimitedBudget;
    DataPool pool;
    for (const TaskData& task : stream.tasks) {
        KeyBag joint;
        for (const Sample& s : pool.samples) joint.insert(key_of(s));
        const KeyBag grs = keys_of(grs_select(pool, kUnlimitedBudget, 9));
        const KeyBag madar = keys_of(madar_select_domain(pool, unlimited));
        check(joint == grs && grs == madar,
              "unlimited-budget strategies disagree at task " + std::to_string(task.task_id));
        pool_append(pool, task);
    }

    // Average-accuracy agreement over 3 seeds.
    std::map<Strategy, std::vector<double>> ap;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        for (Strategy strategy : {Strategy::Joint, Strategy::Grs, Strategy::Madar}) {
            ScenarioConfig cfg;
            cfg.kind = Scenario::DomainIl;
            cfg.trainer.hidden_dims = {16, 8};
            cfg.trainer.dropout = 0.0;
            cfg.trainer.lr = 0.01;
            cfg.trainer.epochs = 20;
            cfg.trainer.batch_size = 32;
            cfg.trainer.seed = seed;
            cfg.replay.strategy = strategy;
            cfg.replay.budget = kUnlimitedBudget;
            cfg.replay.seed = seed;
            ap[strategy].push_back(global_ap(run_scenario(stream, cfg).matrix));
        }
    }
    const double joint = mean_of(ap[Strategy::Joint]);
    const double grs = mean_of(ap[Strategy::Grs]);
    const double madar = mean_of(ap[Strategy::Madar]);
    const double spread =
        std::max({joint, grs, madar}) - std::min({joint, grs, madar});
    check(spread <= 1.0, "mean average accuracies spread " + fmt(spread) +
                             " points apart (joint " + fmt(joint) + ", grs " + fmt(grs) +
                             ", madar " + fmt(madar) + "), need <= 1.0");
    return "identical training sets; means joint " + fmt(joint) + " / grs " + fmt(grs) +
           " / madar " + fmt(madar) + " within " + fmt(spread) + " points";
}

// ---------------------------------------------------------------------------
// 6 + 10. Forgetting trend on a churning, drifting binary stream, and the
//         retrograde-probe gap that replay must restore. The runs are shared.
// ---------------------------------------------------------------------------

struct TrendRuns {
    double none = 0.0, grs = 0.0, joint = 0.0;  // mean global average accuracy
    double tpr_none = 0.0, tpr_grs = 0.0;       // mean task-0 malware TPR, final model
};

std::optional<TrendRuns> g_trend;

TrainerConfig trend_trainer(std::uint64_t seed, int epochs) {
    TrainerConfig t;
    t.hidden_dims = {64, 32};
    t.dropout = 0.0;
    t.lr = 0.01;
    t.epochs = epochs;
    t.batch_size = 64;
    t.seed = seed;
    return t;
}

std::string run_forgetting_trend() {
    SynthParams p;
    p.scenario = Scenario::DomainIl;
    p.num_tasks = 6;
    p.feature_dim = 64;
    p.num_families = 20;
    p.samples_per_task = 600;
    p.goodware_ratio = 0.5;
    p.churn_rate = 0.5;
    p.drift = 24.0;  // deep per-task movement against the stationary benign anchor
    p.seed = 606;
    const TaskStream stream = generate_stream(make_stream_spec(p));

    long long pool_rows = 0;
    for (const TaskData& task : stream.tasks) {
        pool_rows += static_cast<long long>(task.train.size());
    }
    const long long budget = pool_rows / 10;

    TrendRuns runs;
    std::vector<double> none, grs, joint, tpr_none, tpr_grs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        for (Strategy strategy : {Strategy::None, Strategy::Grs, Strategy::Joint}) {
            ScenarioConfig cfg;
            cfg.kind = Scenario::DomainIl;
            cfg.trainer = trend_trainer(seed, 16);
            cfg.replay.strategy = strategy;
            cfg.replay.budget = budget;
            cfg.replay.seed = seed;
            const RunResult run = run_scenario(stream, cfg);
            const double ap = global_ap(run.matrix);
            if (strategy == Strategy::None) {
                none.push_back(ap);
                tpr_none.push_back(rma_probe(run.model, stream, 6).malware_tpr[0]);
            } else if (strategy == Strategy::Grs) {
                grs.push_back(ap);
                tpr_grs.push_back(rma_probe(run.model, stream, 6).malware_tpr[0]);
            } else {
                joint.push_back(ap);
            }
        }
    }
    runs.none = mean_of(none);
    runs.grs = mean_of(grs);
    runs.joint = mean_of(joint);
    runs.tpr_none = mean_of(tpr_none);
    runs.tpr_grs = mean_of(tpr_grs);
    g_trend = runs;

    const std::string means = "means over 5 seeds: none " + fmt(runs.none) + ", grs(10%) " +
                              fmt(runs.grs) + ", joint " + fmt(runs.joint);
    check(runs.none + 5.0 <= runs.grs, "replay lift too small; " + means);
    check(runs.grs <= runs.joint, "replay beat joint retraining; " + means);
    check(runs.joint - runs.none >= 10.0, "forgetting gap too small; " + means);
    return means;
}

// ---------------------------------------------------------------------------
// 7 + 8. Class-incremental stream with power-law family sizes: uniform
//        family-stratified replay versus reservoir and none, then the same
//        selection run in activation space. Stream and baselines are shared.
// ---------------------------------------------------------------------------

struct ClassRuns {
    TaskStream stream;
    long long budget = 0;
    double none = 0.0, grs = 0.0, madar_u = 0.0;
};

std::optional<ClassRuns> g_class;

ScenarioConfig class_config(Strategy strategy, long long budget, std::uint64_t seed) {
    ScenarioConfig cfg;
    cfg.kind = Scenario::ClassIl;
    cfg.trainer = trend_trainer(seed, 8);
    cfg.replay.strategy = strategy;
    cfg.replay.budgeting = Budgeting::Uniform;
    cfg.replay.budget = budget;
    cfg.replay.seed = seed;
    cfg.replay.iforest.num_trees = 50;
    cfg.replay.iforest.subsample_size = 128;
    return cfg;
}

std::string run_distribution_awareness() {
    SynthParams p;
    p.scenario = Scenario::ClassIl;
    p.num_tasks = 11;
    p.feature_dim = 64;
    p.num_families = 20;
    p.samples_per_task = 600;
    p.goodware_ratio = 0.0;
    p.power_law = 1.6;      // strongly imbalanced family sizes
    p.center_spread = 2.5;  // classes are distinct; coverage, not volume, decides
    p.initial_families = 10;
    p.families_per_increment = 1;
    p.seed = 707;
    ClassRuns runs{generate_stream(make_stream_spec(p)), 0, 0.0, 0.0, 0.0};

    long long pool_rows = 0;
    for (const TaskData& task : runs.stream.tasks) {
        pool_rows += static_cast<long long>(task.train.size());
    }
    runs.budget = pool_rows / 20;

    std::vector<double> none, grs, madar_u;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        none.push_back(global_ap(
            run_scenario(runs.stream, class_config(Strategy::None, runs.budget, seed)).matrix));
        grs.push_back(global_ap(
            run_scenario(runs.stream, class_config(Strategy::Grs, runs.budget, seed)).matrix));
        madar_u.push_back(global_ap(
            run_scenario(runs.stream, class_config(Strategy::Madar, runs.budget, seed)).matrix));
    }
    runs.none = mean_of(none);
    runs.grs = mean_of(grs);
    runs.madar_u = mean_of(madar_u);
    g_class = runs;

    const std::string means = "means over 5 seeds: none " + fmt(runs.none) + ", grs " +
                              fmt(runs.grs) + ", madar-u " + fmt(runs.madar_u) + " at budget " +
                              std::to_string(runs.budget);
    check(runs.madar_u >= runs.grs - 0.5, "stratified replay fell behind reservoir; " + means);
    check(runs.madar_u - runs.none >= 10.0, "replay lift too small; " + means);
    return means;
}

std::string run_activation_space_consistency() {
    // With an identity penultimate map the activation-space selection must be
    // the feature-space selection, sample for sample.
    {
        TaskData task;
        std::mt19937_64 gen(51);
        std::uniform_real_distribution<double> positive(0.5, 3.0);
        const FamilyId fams[] = {1, 1, 2, 2, 3};
        for (int i = 0; i < 60; ++i) {
            Sample s;
            s.features = Eigen::Vector3d(positive(gen), positive(gen), positive(gen));
            s.label = kLabelMalware;
            s.family = fams[i % 5];
            s.origin_task = 0;
            s.origin_index = i;
            task.train.push_back(std::move(s));
        }
        DataPool pool;
        pool_append(pool, task);

        MlpModel identity = mlp_init({3, 3, 3}, 0.0, 1);
        identity.layers[0].w = Eigen::MatrixXd::Identity(3, 3);
        identity.layers[0].b.setZero();

        ReplayConfig cfg;
        cfg.budget = 18;
        cfg.budgeting = Budgeting::Uniform;
        cfg.contamination = 0.1;
        cfg.iforest.num_trees = 60;
        cfg.iforest.subsample_size = 64;
        cfg.seed = 5;
        check(keys_of(madar_theta_select_class(pool, cfg, identity)) ==
                  keys_of(madar_select_class(pool, cfg)),
              "identity-map activation selection differs from feature-space selection");
    }

    // The stock architecture must expose a 128-wide penultimate embedding
    // after training.
    const TrainerConfig stock;
    {
        std::vector<int> dims;
        dims.push_back(64);
        dims.insert(dims.end(), stock.hidden_dims.begin(), stock.hidden_dims.end());
        dims.push_back(2);
        MlpModel model = mlp_init(dims, stock.dropout, 8);
        OptimizerState state = adam_init(model, stock.lr);

        LabeledSet warmup;
        std::mt19937_64 gen(77);
        std::normal_distribution<double> normal(0.0, 1.0);
        warmup.x.resize(128, 64);
        for (Eigen::Index i = 0; i < warmup.x.size(); ++i) warmup.x.data()[i] = normal(gen);
        for (int i = 0; i < 128; ++i) warmup.y.push_back(i % 2);
        train_task(model, state, warmup, OutputMask::all(2), 1, 64, 3);

        const Eigen::MatrixXd acts = extract_activations(model, warmup.x.topRows(4));
        check(acts.cols() == 128, "trained stock model embeds " + std::to_string(acts.cols()) +
                                      " dims, expected 128");
    }

    // Full activation-space sweep on the shared class-incremental stream.
    check(g_class.has_value(), "shared class-incremental baselines unavailable");
    std::vector<double> theta;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        theta.push_back(global_ap(
            run_scenario(g_class->stream,
                         class_config(Strategy::MadarTheta, g_class->budget, seed))
                .matrix));
    }
    const double mean_theta = mean_of(theta);
    const double gap = std::abs(mean_theta - g_class->madar_u);
    check(gap <= 3.0, "activation-space mean " + fmt(mean_theta) + " strays " + fmt(gap) +
                          " points from feature-space mean " + fmt(g_class->madar_u));
    return "identity map exact; stock embedding width 128; activation-space mean " +
           fmt(mean_theta) + " within " + fmt(gap) + " points of feature-space " +
           fmt(g_class->madar_u);
}

// ---------------------------------------------------------------------------
// 9. Determinism: the same config run twice produces byte-identical summaries.
// ---------------------------------------------------------------------------

std::string run_determinism() {
    const fs::path dir = fs::temp_directory_path() / "madar_acceptance" / "determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);

    const fs::path config_path = dir / "config.json";
    {
        std::ofstream out(config_path);
        out << R"({
            "name": "determinism",
            "output_dir": ")" << (dir / "results").string() << R"(",
            "workers": 1,
            "scenario": {"kind": "domain-il"},
            "stream": {"num_tasks": 2, "feature_dim": 8, "num_families": 3,
                       "samples_per_task": 100, "seed": 11},
            "model": {"hidden_dims": [12], "dropout": 0.0, "lr": 0.01,
                      "epochs": 3, "batch_size": 32},
            "grid": {"strategies": ["grs", "madar"], "budgets": [25], "seeds": [1, 2]}
        })";
    }
    const ExperimentConfig cfg = load_config(config_path.string());

    auto summary_bytes = [&]() {
        const ExperimentResult result = run_experiment(cfg);
        check(result.failures == 0, "a grid cell failed");
        std::ifstream in(fs::path(cfg.output_dir) / "summary.csv", std::ios::binary);
        std::ostringstream bytes;
        bytes << in.rdbuf();
        return bytes.str();
    };
    const std::string first = summary_bytes();
    const std::string second = summary_bytes();
    check(!first.empty(), "summary.csv is empty");
    check(first == second, "summary.csv changed between identical runs");
    return "summary.csv byte-identical across reruns (" + std::to_string(first.size()) +
           " bytes, 4 grid cells)";
}

std::string run_retrograde_probe() {
    check(g_trend.has_value(), "shared forgetting-trend runs unavailable");
    const double none_points = 100.0 * g_trend->tpr_none;
    const double grs_points = 100.0 * g_trend->tpr_grs;
    check(grs_points - none_points >= 5.0,
          "task-0 malware TPR after the final task: grs(10%) " + fmt(grs_points) +
              " vs none " + fmt(none_points) + ", need a >= 5 point gap");
    return "task-0 malware TPR after the final task: grs(10%) " + fmt(grs_points) +
           " vs none " + fmt(none_points) + " (gap " + fmt(grs_points - none_points) + " >= 5)";
}

}  // namespace

int main() {
    std::cout << "acceptance: 10 criteria\n";
    criterion(1, "gradient check", run_gradient_check);
    criterion(2, "isolation forest planted outliers", run_planted_outliers);
    criterion(3, "replay budget accounting", run_budget_accounting);
    criterion(4, "accuracy metric oracle", run_metric_oracle);
    criterion(5, "unlimited-budget degeneracy", run_degeneracy);
    criterion(6, "forgetting trend", run_forgetting_trend);
    criterion(7, "distribution-aware replay", run_distribution_awareness);
    criterion(8, "activation-space consistency", run_activation_space_consistency);
    criterion(9, "run determinism", run_determinism);
    criterion(10, "retrograde malware probe", run_retrograde_probe);

    if (g_failed != 0) {
        std::cout << "acceptance: " << (10 - g_failed) << "/10 criteria passed\n";
        return 1;
    }
    std::cout << "acceptance: 10/10 criteria passed\n";
    return 0;
}
