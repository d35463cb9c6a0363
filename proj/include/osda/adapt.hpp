#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "osda/config.hpp"
#include "osda/data.hpp"
#include "osda/eval.hpp"
#include "osda/losses.hpp"
#include "osda/model.hpp"

namespace osda {

struct EpochStats {
    double l_cls = 0.0;
    double l_ctr = 0.0;
    double l_div = 0.0;
    double total = 0.0;
    double selection_rate = 0.0;
    double mean_u_nc = 0.0;
    double mean_u_cs = 0.0;
    double sum_u_nc_selected = 0.0;
    double sum_u_nc_rejected = 0.0;
    int n_selected = 0;
    int n_rejected = 0;
    int n_ctr_skipped = 0;
    int n_excluded_pairs = 0;
    double pseudo_label_accuracy = -1.0;  // -1 when no ground truth is available
};

struct RunReport {
    std::string config_json;
    std::vector<EpochStats> trace;
    std::vector<int> initial_labels;
    double initial_label_accuracy = -1.0;
    double raw_extended_accuracy = -1.0;  // extended-source argmax, pre-initialization
    OpenSetMetrics final_metrics;
    std::optional<DiscoveryMetrics> discovery;
    std::optional<DiscoveryMetrics> discovery_prototype;
    double wall_clock_sec = 0.0;
};

// include_wall_clock=false gives the canonical form used by the determinism
// contract (two identical runs differ only in timing).
std::string report_to_json(const RunReport& report, bool include_wall_clock = true);

// Epoch observer: may fill stats.pseudo_label_accuracy from ground truth it
// owns; the adaptation core itself never sees labels.
using EpochObserver = std::function<void(int epoch, const std::vector<int>& refined_labels,
                                         EpochStats& stats)>;

struct AdaptCoreResult {
    Model adapted;
    std::vector<EpochStats> trace;
    std::vector<int> initial_labels;
    std::vector<int> raw_extended_labels;  // extended-source argmax, pre-initialization
};

// Full adaptation loop over a label-free target view:
// extend -> cluster-init -> bank -> epochs of {plan, evaluate, sgd, ema,
// bank refresh, queue push}.
AdaptCoreResult adapt_core(const Model& source, const TargetInputs& target, const RunConfig& cfg,
                           const EpochObserver& observer = nullptr);

// Pseudo-label correctness against ground truth: shared-class samples need
// an exact match, private-class samples any private prediction.
double pseudo_label_accuracy(const std::vector<int>& labels, const std::vector<int>& truth,
                             int n_shared);

// Argmax predictions of the (un-augmented) inputs.
std::vector<int> predict(const Model& m, const std::vector<Vec>& inputs);

struct AdaptOutcome {
    Model adapted;
    RunReport report;
};

// Adaptation plus reporting: the target split's labels feed only the
// per-epoch accuracy trace and the final metrics.
AdaptOutcome run_adaptation(const Model& source, const DatasetSplit& target,
                            const RunConfig& cfg);

}  // namespace osda
