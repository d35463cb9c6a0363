#include "osda/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "osda/error.hpp"

namespace osda {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Classic O(n^3) shortest-augmenting-path LAP solver (minimization).
// Returns assignment[row] = col and writes the optimal total into *total.
std::vector<int> lap_solve(const std::vector<std::vector<double>>& a, double* total) {
    const int n = static_cast<int>(a.size());
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> assign(n, -1);
    double sum = 0.0;
    for (int j = 1; j <= n; ++j) {
        if (p[j] > 0) {
            assign[p[j] - 1] = j - 1;
            sum += a[p[j] - 1][j - 1];
        }
    }
    if (total) *total = sum;
    return assign;
}

// Optimal cost of assigning `rows` to a subset of `cols` (square case only,
// |rows| == |cols|).
double lap_cost_subset(const std::vector<std::vector<double>>& cost, const std::vector<int>& rows,
                       const std::vector<int>& cols) {
    if (rows.empty()) return 0.0;
    std::vector<std::vector<double>> sub(rows.size(), std::vector<double>(cols.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        for (size_t j = 0; j < cols.size(); ++j) sub[i][j] = cost[rows[i]][cols[j]];
    }
    double total = 0.0;
    lap_solve(sub, &total);
    return total;
}

}  // namespace

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    if (n == 0) return {};
    for (const auto& row : cost) {
        if (static_cast<int>(row.size()) != n) {
            throw ShapeError("hungarian: cost matrix must be square");
        }
        if (!all_finite(row)) throw ShapeError("hungarian: non-finite cost entry");
    }

    double best_total = 0.0;
    lap_solve(cost, &best_total);
    const double tol = 1e-9 * (1.0 + std::abs(best_total));

    // Fix rows one by one to the smallest column that still admits an optimal
    // completion; this yields the lexicographically smallest optimal perm.
    std::vector<int> assign(n, -1);
    std::vector<char> col_used(n, 0);
    double fixed_cost = 0.0;
    for (int i = 0; i < n; ++i) {
        std::vector<int> rest_rows;
        for (int r = i + 1; r < n; ++r) rest_rows.push_back(r);
        for (int j = 0; j < n; ++j) {
            if (col_used[j]) continue;
            std::vector<int> rest_cols;
            for (int c = 0; c < n; ++c) {
                if (!col_used[c] && c != j) rest_cols.push_back(c);
            }
            const double completion = lap_cost_subset(cost, rest_rows, rest_cols);
            if (fixed_cost + cost[i][j] + completion <= best_total + tol) {
                assign[i] = j;
                col_used[j] = 1;
                fixed_cost += cost[i][j];
                break;
            }
        }
    }
    return assign;
}

double hos_score(double os_star, double unk) {
    if (os_star + unk == 0.0) return 0.0;
    return 2.0 * os_star * unk / (os_star + unk);
}

OpenSetMetrics open_set_metrics(const std::vector<int>& pred, const std::vector<int>& truth,
                                int n_shared) {
    if (pred.size() != truth.size()) {
        throw ShapeError("open_set_metrics: pred/truth length mismatch");
    }
    if (n_shared < 1) throw InvalidClassCount("open_set_metrics: n_shared must be >= 1");

    std::vector<long> per_class_total(n_shared, 0), per_class_hit(n_shared, 0);
    long unk_total = 0, unk_hit = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < n_shared) {
            per_class_total[truth[i]]++;
            if (pred[i] == truth[i]) per_class_hit[truth[i]]++;
        } else {
            unk_total++;
            if (pred[i] >= n_shared) unk_hit++;
        }
    }

    OpenSetMetrics m;
    m.per_class_acc.assign(n_shared, std::numeric_limits<double>::quiet_NaN());
    double acc_sum = 0.0;
    int present = 0;
    for (int c = 0; c < n_shared; ++c) {
        if (per_class_total[c] == 0) {
            std::fprintf(stderr,
                         "warning: shared class %d absent from ground truth, omitted from OS*\n",
                         c);
            continue;
        }
        m.per_class_acc[c] =
            100.0 * static_cast<double>(per_class_hit[c]) / static_cast<double>(per_class_total[c]);
        acc_sum += m.per_class_acc[c];
        present++;
    }
    m.os_star = present > 0 ? acc_sum / present : 0.0;
    if (unk_total == 0) {
        std::fprintf(stderr, "warning: no ground-truth unknown samples, UNK set to 0\n");
        m.unk = 0.0;
    } else {
        m.unk = 100.0 * static_cast<double>(unk_hit) / static_cast<double>(unk_total);
    }
    m.hos = hos_score(m.os_star, m.unk);
    return m;
}

DiscoveryMetrics cluster_accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                                  int n_private) {
    if (n_private < 1) throw InvalidClassCount("cluster_accuracy: n_private must be >= 1");
    if (pred.size() != truth.size()) {
        throw ShapeError("cluster_accuracy: pred/truth length mismatch");
    }
    int side = n_private;
    for (int p : pred) side = std::max(side, p + 1);
    for (int t : truth) {
        if (t < 0 || t >= n_private) {
            throw InvalidLabel("cluster_accuracy: truth label outside [0, n_private)");
        }
    }

    // Contingency counts, padded to square; unmatched predicted classes
    // contribute no hits.
    std::vector<std::vector<double>> contingency(side, std::vector<double>(side, 0.0));
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] >= 0) contingency[pred[i]][truth[i]] += 1.0;
    }
    std::vector<std::vector<double>> cost(side, std::vector<double>(side));
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) cost[i][j] = -contingency[i][j];
    }
    DiscoveryMetrics d;
    d.matching = hungarian(cost);
    double hits = 0.0;
    for (int i = 0; i < side; ++i) hits += contingency[i][d.matching[i]];
    d.cluster_acc = pred.empty() ? 0.0 : hits / static_cast<double>(pred.size());
    return d;
}

DiscoveryMetrics cluster_accuracy_prototype(const std::vector<Vec>& features,
                                            const std::vector<int>& pred,
                                            const std::vector<int>& truth, int n_private) {
    if (n_private < 1) throw InvalidClassCount("cluster_accuracy_prototype: n_private must be >= 1");
    if (features.size() != pred.size() || pred.size() != truth.size()) {
        throw ShapeError("cluster_accuracy_prototype: input length mismatch");
    }
    int side = n_private;
    for (int p : pred) side = std::max(side, p + 1);

    const size_t dim = features.empty() ? 0 : features[0].size();
    std::vector<Vec> pred_proto(side, Vec(dim, 0.0)), truth_proto(side, Vec(dim, 0.0));
    std::vector<int> pred_count(side, 0), truth_count(side, 0);
    for (size_t i = 0; i < features.size(); ++i) {
        if (pred[i] >= 0) {
            pred_count[pred[i]]++;
            for (size_t k = 0; k < dim; ++k) pred_proto[pred[i]][k] += features[i][k];
        }
        truth_count[truth[i]]++;
        for (size_t k = 0; k < dim; ++k) truth_proto[truth[i]][k] += features[i][k];
    }
    for (int c = 0; c < side; ++c) {
        for (size_t k = 0; k < dim; ++k) {
            if (pred_count[c] > 0) pred_proto[c][k] /= pred_count[c];
            if (truth_count[c] > 0) truth_proto[c][k] /= truth_count[c];
        }
    }

    // Empty classes get a flat large cost so they absorb the leftover slots.
    const double kMissing = 10.0;
    std::vector<std::vector<double>> cost(side, std::vector<double>(side, kMissing));
    for (int i = 0; i < side; ++i) {
        if (pred_count[i] == 0) continue;
        for (int j = 0; j < side; ++j) {
            if (truth_count[j] == 0) continue;
            cost[i][j] = cosine_distance(pred_proto[i], truth_proto[j]);
        }
    }
    DiscoveryMetrics d;
    d.matching = hungarian(cost);
    double hits = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] >= 0 && d.matching[pred[i]] == truth[i]) hits += 1.0;
    }
    d.cluster_acc = pred.empty() ? 0.0 : hits / static_cast<double>(pred.size());
    return d;
}

std::string metrics_to_json(const OpenSetMetrics& m, const DiscoveryMetrics* disc) {
    nlohmann::json j;
    j["os_star"] = m.os_star;
    j["unk"] = m.unk;
    j["hos"] = m.hos;
    j["per_class_acc"] = nlohmann::json::array();
    for (double a : m.per_class_acc) {
        if (std::isnan(a)) {
            j["per_class_acc"].push_back(nullptr);
        } else {
            j["per_class_acc"].push_back(a);
        }
    }
    if (disc) {
        j["cluster_acc"] = disc->cluster_acc;
        j["matching"] = disc->matching;
    }
    return j.dump(2);
}

std::string metrics_csv_header() { return "os_star,unk,hos,cluster_acc"; }

std::string metrics_csv_row(const OpenSetMetrics& m, const DiscoveryMetrics* disc) {
    std::ostringstream os;
    os << m.os_star << "," << m.unk << "," << m.hos << ",";
    if (disc) os << disc->cluster_acc;
    return os.str();
}

}  // namespace osda
