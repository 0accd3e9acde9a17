#pragma once

#include <string>
#include <vector>

#include "madar/core.hpp"
#include "madar/mlp.hpp"

namespace madar {

/// Average accuracy over every task learned so far, measured after training
/// task i (mean of the matrix's row i), in [0, 1].
inline double ap_at_task(const AccuracyMatrix& m, int i) {
    if (!m.row_complete(i)) {
        throw Error("ap_at_task: row " + std::to_string(i) + " is incomplete");
    }
    double sum = 0.0;
    for (int j = 0; j <= i; ++j) sum += m.at(i, j);
    return sum / static_cast<double>(i + 1);
}

/// Mean of per-task average accuracies, as a percentage in [0, 100].
inline double global_ap(const AccuracyMatrix& m) {
    if (m.num_tasks() == 0) throw Error("global_ap: empty matrix");
    if (!m.complete()) throw Error("global_ap: matrix has unfilled cells");
    double sum = 0.0;
    for (int i = 0; i < m.num_tasks(); ++i) sum += ap_at_task(m, i);
    return 100.0 * sum / static_cast<double>(m.num_tasks());
}

/// Residual malware awareness after training further tasks: for each earlier
/// task, the rate at which its holdout malware is still flagged (TPR) and its
/// holdout goodware is wrongly flagged (FPR). Domain-IL only.
struct RmaReport {
    std::vector<double> malware_tpr;  // one entry per probed task
    std::vector<double> goodware_fpr;
};

inline RmaReport rma_probe(const MlpModel& model, const TaskStream& stream, int upto_task) {
    if (stream.scenario != Scenario::DomainIl) {
        throw Error("rma_probe: defined for Domain-IL streams only");
    }
    if (upto_task < 0 || upto_task > stream.num_tasks()) {
        throw Error("rma_probe: upto_task out of range");
    }
    const OutputMask mask = OutputMask::of(model.output_dim(), {kLabelGoodware, kLabelMalware});
    RmaReport report;
    for (int t = 0; t < upto_task; ++t) {
        const TaskData& task = stream.tasks[static_cast<std::size_t>(t)];
        std::size_t mal = 0, mal_hit = 0, good = 0, good_hit = 0;
        if (task.holdout.empty()) {
            throw Error("rma_probe: task " + std::to_string(t) + " has no holdout");
        }
        LabeledSet set = to_labeled(stream, task.holdout);
        const Eigen::MatrixXd logits = forward_eval(model, set.x);
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            const bool flagged =
                logits(i, kLabelMalware) > logits(i, kLabelGoodware);
            if (set.y[static_cast<std::size_t>(i)] == kLabelMalware) {
                ++mal;
                mal_hit += flagged;
            } else {
                ++good;
                good_hit += flagged;
            }
        }
        if (mal == 0 || good == 0) {
            throw Error("rma_probe: task " + std::to_string(t) +
                        " holdout lacks malware or goodware rows");
        }
        report.malware_tpr.push_back(static_cast<double>(mal_hit) / static_cast<double>(mal));
        report.goodware_fpr.push_back(static_cast<double>(good_hit) / static_cast<double>(good));
    }
    return report;
}

}  // namespace madar
