#pragma once

#include <string>
#include <vector>

#include "osda/numerics.hpp"

namespace osda {

// Scores are percentages in [0, 100]. per_class_acc holds one entry per
// shared class; classes absent from the ground truth are NaN and excluded
// from the OS* mean.
struct OpenSetMetrics {
    double os_star = 0.0;
    double unk = 0.0;
    double hos = 0.0;
    std::vector<double> per_class_acc;
};

// Harmonic mean of OS* and UNK; 0 when both are 0.
double hos_score(double os_star, double unk);

// Any prediction >= n_shared counts as "unknown"; same for ground truth.
// OS* is the mean per-class accuracy over shared classes (exact match);
// UNK is the fraction of ground-truth-unknown samples predicted unknown.
OpenSetMetrics open_set_metrics(const std::vector<int>& pred, const std::vector<int>& truth,
                                int n_shared);

// Minimum-cost perfect assignment on a square matrix. Returns perm with
// perm[row] = column. Deterministic: among co-optimal assignments the
// lexicographically smallest permutation is returned.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

struct DiscoveryMetrics {
    double cluster_acc = 0.0;
    std::vector<int> matching;  // matching[predicted private class] = truth private class
};

// Permutation-maximized accuracy over target-private samples.
// pred entries are predicted private-class indices (or -1 for a sample
// predicted into a shared class, which can never count as correct); truth
// entries are ground-truth private-class indices in [0, n_private).
DiscoveryMetrics cluster_accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                                  int n_private);

// Alternative matching mode: class prototypes are the mean feature vectors
// per predicted / per ground-truth class, matched by minimum total cosine
// distance. Predicted classes with no samples are matched last.
DiscoveryMetrics cluster_accuracy_prototype(const std::vector<Vec>& features,
                                            const std::vector<int>& pred,
                                            const std::vector<int>& truth, int n_private);

std::string metrics_to_json(const OpenSetMetrics& m, const DiscoveryMetrics* disc = nullptr);
std::string metrics_csv_header();
std::string metrics_csv_row(const OpenSetMetrics& m, const DiscoveryMetrics* disc = nullptr);

}  // namespace osda
