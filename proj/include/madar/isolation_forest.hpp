#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "madar/core.hpp"
#include "madar/rng.hpp"

namespace madar {

/// Expected unsuccessful-search path length in a BST of n nodes; the standard
/// normalizer for isolation scores. 0 for n <= 1, exactly 1 for n == 2,
/// harmonic approximation above that.
inline double average_path_length(std::size_t n) {
    if (n <= 1) return 0.0;
    if (n == 2) return 1.0;
    const double m = static_cast<double>(n);
    const double harmonic = std::log(m - 1.0) + std::numbers::egamma;
    return 2.0 * harmonic - 2.0 * (m - 1.0) / m;
}

namespace detail {

struct IsoNode {
    int feature = -1;          // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    int size = 0;              // population of a leaf
};

struct IsoTree {
    std::vector<IsoNode> nodes;

    double path_length(const Eigen::VectorXd& x) const {
        int node = 0;
        double depth = 0.0;
        while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
            const IsoNode& nd = nodes[static_cast<std::size_t>(node)];
            node = x[nd.feature] < nd.threshold ? nd.left : nd.right;
            depth += 1.0;
        }
        return depth + average_path_length(
                           static_cast<std::size_t>(nodes[static_cast<std::size_t>(node)].size));
    }
};

}  // namespace detail

struct IsolationForest {
    std::vector<detail::IsoTree> trees;
    int dim = 0;
    std::size_t subsample_used = 0;  // actual per-tree subsample (min of requested and n)

    double normalizer() const { return average_path_length(subsample_used); }
};

namespace detail {

// Recursive isolation-tree construction over an index scratch vector. Splits
// choose uniformly among features that still vary; a region with no varying
// feature (all points identical) becomes a leaf regardless of depth.
inline int build_iso_node(const Eigen::MatrixXd& points, std::vector<int>& idx, int lo, int hi,
                          int depth, int depth_limit, Rng& rng, std::vector<IsoNode>& nodes) {
    const int count = hi - lo;
    const int self = static_cast<int>(nodes.size());
    nodes.emplace_back();
    if (count <= 1 || depth >= depth_limit) {
        nodes[static_cast<std::size_t>(self)].size = count;
        return self;
    }

    std::vector<int> varying;
    for (int f = 0; f < points.cols(); ++f) {
        double mn = points(idx[static_cast<std::size_t>(lo)], f);
        double mx = mn;
        for (int i = lo + 1; i < hi; ++i) {
            const double v = points(idx[static_cast<std::size_t>(i)], f);
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        if (mx > mn) varying.push_back(f);
    }
    if (varying.empty()) {
        nodes[static_cast<std::size_t>(self)].size = count;
        return self;
    }

    const int feature = varying[rng.index(varying.size())];
    double mn = points(idx[static_cast<std::size_t>(lo)], feature);
    double mx = mn;
    for (int i = lo + 1; i < hi; ++i) {
        const double v = points(idx[static_cast<std::size_t>(i)], feature);
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    const double threshold = mn + rng.real01() * (mx - mn);

    auto mid_it = std::partition(idx.begin() + lo, idx.begin() + hi, [&](int i) {
        return points(i, feature) < threshold;
    });
    const int mid = static_cast<int>(mid_it - idx.begin());
    if (mid == lo || mid == hi) {  // degenerate threshold (floating-point edge)
        nodes[static_cast<std::size_t>(self)].size = count;
        return self;
    }
    nodes[static_cast<std::size_t>(self)].feature = feature;
    nodes[static_cast<std::size_t>(self)].threshold = threshold;
    const int left = build_iso_node(points, idx, lo, mid, depth + 1, depth_limit, rng, nodes);
    const int right = build_iso_node(points, idx, mid, hi, depth + 1, depth_limit, rng, nodes);
    nodes[static_cast<std::size_t>(self)].left = left;
    nodes[static_cast<std::size_t>(self)].right = right;
    return self;
}

}  // namespace detail

/// Fit an isolation forest: num_trees trees, each on a seeded subsample of
/// min(subsample_size, n) points, grown to depth ceil(log2 subsample).
inline IsolationForest iforest_fit(const Eigen::MatrixXd& points, int num_trees,
                                   int subsample_size, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (n == 0) throw Error("iforest_fit: no points");
    if (num_trees < 1) throw Error("iforest_fit: num_trees must be >= 1");
    if (subsample_size < 1) throw Error("iforest_fit: subsample_size must be >= 1");
    if (points.cols() < 1) throw Error("iforest_fit: points need at least one feature");

    IsolationForest forest;
    forest.dim = static_cast<int>(points.cols());
    forest.subsample_used = std::min(static_cast<std::size_t>(subsample_size), n);
    const int depth_limit = forest.subsample_used <= 1
        ? 0
        : static_cast<int>(std::ceil(std::log2(static_cast<double>(forest.subsample_used))));

    forest.trees.reserve(static_cast<std::size_t>(num_trees));
    for (int t = 0; t < num_trees; ++t) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        const auto picked = rng.pick(n, forest.subsample_used);
        std::vector<int> idx;
        idx.reserve(picked.size());
        for (std::size_t i : picked) idx.push_back(static_cast<int>(i));
        detail::IsoTree tree;
        detail::build_iso_node(points, idx, 0, static_cast<int>(idx.size()), 0, depth_limit,
                               rng, tree.nodes);
        forest.trees.push_back(std::move(tree));
    }
    return forest;
}

/// Isolation score in (0, 1]: 2^(-E[path] / c(subsample)). Higher = more
/// isolated. Degenerate forests (subsample 1) score everything 0.5.
inline double anomaly_score(const IsolationForest& forest, const Eigen::VectorXd& point) {
    if (point.size() != forest.dim) {
        throw Error("anomaly_score: point width " + std::to_string(point.size()) +
                    " does not match forest dimension " + std::to_string(forest.dim));
    }
    const double norm = forest.normalizer();
    if (norm <= 0.0) return 0.5;
    double total = 0.0;
    for (const auto& tree : forest.trees) total += tree.path_length(point);
    const double mean_path = total / static_cast<double>(forest.trees.size());
    return std::exp2(-mean_path / norm);
}

/// Score-ranked partition of a point set: the top round(contamination * n)
/// scorers form the anomalous pool, everything else the representative pool.
/// Ties rank by ascending row index, so the partition is stable.
struct ContaminationSplit {
    std::vector<std::size_t> anomalous;       // descending score order
    std::vector<std::size_t> representative;  // descending score order
    std::vector<double> scores;               // per input row
};

struct IForestParams {
    int num_trees = 100;
    int subsample_size = 256;
};

inline ContaminationSplit rank_by_contamination(const Eigen::MatrixXd& points,
                                                double contamination, const IForestParams& params,
                                                std::uint64_t seed) {
    if (contamination < 0.0 || contamination > 1.0) {
        throw Error("rank_by_contamination: contamination must lie in [0, 1]");
    }
    const auto n = static_cast<std::size_t>(points.rows());
    ContaminationSplit split;
    if (n == 0) return split;

    const IsolationForest forest =
        iforest_fit(points, params.num_trees, params.subsample_size, derive_seed(seed, 101));
    split.scores.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        split.scores[i] = anomaly_score(forest, points.row(static_cast<Eigen::Index>(i)));
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (split.scores[a] != split.scores[b]) return split.scores[a] > split.scores[b];
        return a < b;
    });
    auto k = static_cast<std::size_t>(std::llround(contamination * static_cast<double>(n)));
    k = std::min(k, n);
    split.anomalous.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    split.representative.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    return split;
}

/// Budgeted anomalous/representative selection. Draws budget_anom rows from
/// the anomalous pool and budget_repr from the representative pool (seeded,
/// without replacement); when one pool runs dry the other tops up the short
/// side, so together the two sides always hold min(budget_anom + budget_repr,
/// n) distinct rows.
struct SelectionSplit {
    std::vector<std::size_t> anomalous;
    std::vector<std::size_t> representative;
};

inline SelectionSplit contamination_split(const Eigen::MatrixXd& points, double contamination,
                                          long long budget_anom, long long budget_repr,
                                          const IForestParams& params, std::uint64_t seed) {
    if (budget_anom < 0 || budget_repr < 0) {
        throw Error("contamination_split: budgets must be >= 0");
    }
    SelectionSplit out;
    const auto n = static_cast<std::size_t>(points.rows());
    if (n == 0) return out;

    const ContaminationSplit pools = rank_by_contamination(points, contamination, params, seed);

    auto draw = [](const std::vector<std::size_t>& pool, std::size_t want, Rng& rng,
                   std::vector<std::size_t>& taken, std::vector<std::size_t>& spare) {
        const std::size_t k = std::min(want, pool.size());
        std::vector<bool> used(pool.size(), false);
        for (std::size_t j : rng.pick(pool.size(), k)) {
            taken.push_back(pool[j]);
            used[j] = true;
        }
        for (std::size_t j = 0; j < pool.size(); ++j) {
            if (!used[j]) spare.push_back(pool[j]);
        }
    };

    const auto want_a = static_cast<std::size_t>(budget_anom);
    const auto want_s = static_cast<std::size_t>(budget_repr);
    std::vector<std::size_t> spare_a, spare_s;
    Rng rng_a(derive_seed(seed, 202));
    Rng rng_s(derive_seed(seed, 303));
    draw(pools.anomalous, want_a, rng_a, out.anomalous, spare_a);
    draw(pools.representative, want_s, rng_s, out.representative, spare_s);

    // Top up whichever side fell short from the other pool's leftovers.
    Rng rng_t(derive_seed(seed, 404));
    if (out.anomalous.size() < want_a && !spare_s.empty()) {
        const std::size_t need = std::min(want_a - out.anomalous.size(), spare_s.size());
        for (std::size_t j : rng_t.pick(spare_s.size(), need)) {
            out.anomalous.push_back(spare_s[j]);
        }
    } else if (out.representative.size() < want_s && !spare_a.empty()) {
        const std::size_t need = std::min(want_s - out.representative.size(), spare_a.size());
        for (std::size_t j : rng_t.pick(spare_a.size(), need)) {
            out.representative.push_back(spare_a[j]);
        }
    }
    return out;
}

}  // namespace madar
