// Test-only oracles and gradient-check helpers. Everything here is written
// independently of the library implementations it cross-checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "osda/model.hpp"
#include "osda/numerics.hpp"
#include "osda/rng.hpp"

namespace osda::testing {

// ---------------------------------------------------------------------------
// Finite differences

struct FdReport {
    double max_rel_err = 0.0;
    size_t n_checked = 0;
};

// Central differences on a flat parameter vector. `eval` must read the
// current values of `theta` through whatever state `apply` writes them to.
inline FdReport fd_check(Vec& theta, const std::function<void()>& apply,
                         const std::function<double()>& eval, const Vec& analytic,
                         double h = 1e-5) {
    FdReport rep;
    for (size_t i = 0; i < theta.size(); ++i) {
        const double orig = theta[i];
        theta[i] = orig + h;
        apply();
        const double fp = eval();
        theta[i] = orig - h;
        apply();
        const double fm = eval();
        theta[i] = orig;
        apply();
        const double fd = (fp - fm) / (2.0 * h);
        const double a = analytic[i];
        const double denom = std::max(std::abs(a), std::abs(fd));
        double rel;
        if (denom > 1e-6) {
            rel = std::abs(a - fd) / denom;
        } else {
            rel = std::abs(a - fd) > 1e-8 ? 1.0 : 0.0;
        }
        rep.max_rel_err = std::max(rep.max_rel_err, rel);
        rep.n_checked++;
    }
    return rep;
}

// Convenience wrapper for whole-model checks.
inline FdReport fd_check_model(Model& model, const std::function<double()>& loss,
                               const Vec& analytic_grads, double h = 1e-5) {
    Vec theta = flatten_params(model);
    return fd_check(
        theta, [&] { unflatten_params(model, theta); }, loss, analytic_grads, h);
}

// ---------------------------------------------------------------------------
// Brute-force oracles

// Minimum assignment cost over all n! permutations.
inline double lap_brute_force(const std::vector<std::vector<double>>& cost,
                              std::vector<int>* best_perm = nullptr) {
    const int n = static_cast<int>(cost.size());
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += cost[i][perm[i]];
        if (total < best) {
            best = total;
            if (best_perm) *best_perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Maximum total similarity over all injective class -> centroid maps.
inline double injection_brute_force(const std::vector<std::vector<double>>& sim) {
    const int ns = static_cast<int>(sim.size());
    const int k = static_cast<int>(sim[0].size());
    std::vector<int> chosen(ns, -1);
    std::vector<char> used(k, 0);
    double best = -std::numeric_limits<double>::infinity();
    std::function<void(int, double)> rec = [&](int i, double acc) {
        if (i == ns) {
            best = std::max(best, acc);
            return;
        }
        for (int j = 0; j < k; ++j) {
            if (used[j]) continue;
            used[j] = 1;
            rec(i + 1, acc + sim[i][j]);
            used[j] = 0;
        }
    };
    rec(0, 0.0);
    return best;
}

// Max-over-permutations clustering accuracy (pred -1 never matches).
inline double cluster_acc_brute_force(const std::vector<int>& pred, const std::vector<int>& truth,
                                      int n_private) {
    std::vector<int> perm(n_private);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 0.0;
    do {
        int hits = 0;
        for (size_t i = 0; i < pred.size(); ++i) {
            if (pred[i] >= 0 && pred[i] < n_private && perm[pred[i]] == truth[i]) hits++;
        }
        best = std::max(best, static_cast<double>(hits) / pred.size());
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Plain Lloyd iteration with k-means++ seeding, written naively; consumes
// the rng exactly like the library (uniform_int for the first seed, then a
// uniform01 per additional centroid).
struct OracleKmeans {
    std::vector<Vec> centroids;
    std::vector<int> assignment;
    double inertia = 0.0;
};

inline double sq_euclid(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

inline OracleKmeans oracle_lloyd(const std::vector<Vec>& pts, int k, Rng rng, int max_iter,
                                 double tol) {
    const int n = static_cast<int>(pts.size());
    OracleKmeans res;
    res.centroids.push_back(pts[rng.uniform_int(n)]);
    for (int c = 1; c < k; ++c) {
        std::vector<double> d2(n);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& cen : res.centroids) best = std::min(best, sq_euclid(pts[i], cen));
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            res.centroids.push_back(pts[rng.uniform_int(n)]);
            continue;
        }
        double r = rng.uniform01() * total;
        int pick = n - 1;
        for (int i = 0; i < n; ++i) {
            r -= d2[i];
            if (r <= 0.0) {
                pick = i;
                break;
            }
        }
        res.centroids.push_back(pts[pick]);
    }

    res.assignment.assign(n, 0);
    for (int iter = 0; iter < max_iter; ++iter) {
        std::vector<int> count(k, 0);
        for (int i = 0; i < n; ++i) {
            int arg = 0;
            double best = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = sq_euclid(pts[i], res.centroids[c]);
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            res.assignment[i] = arg;
            count[arg]++;
        }
        for (int c = 0; c < k; ++c) {
            if (count[c] > 0) continue;
            double worst = -1.0;
            int far_idx = -1;
            for (int i = 0; i < n; ++i) {
                if (count[res.assignment[i]] <= 1) continue;
                const double d = sq_euclid(pts[i], res.centroids[res.assignment[i]]);
                if (d > worst) {
                    worst = d;
                    far_idx = i;
                }
            }
            if (far_idx < 0) continue;
            count[res.assignment[far_idx]]--;
            res.centroids[c] = pts[far_idx];
            res.assignment[far_idx] = c;
            count[c] = 1;
        }
        std::vector<Vec> means(k, Vec(pts[0].size(), 0.0));
        for (int i = 0; i < n; ++i) {
            for (size_t d = 0; d < pts[i].size(); ++d) means[res.assignment[i]][d] += pts[i][d];
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            for (size_t d = 0; d < means[c].size(); ++d) means[c][d] /= count[c];
            shift = std::max(shift, std::sqrt(sq_euclid(means[c], res.centroids[c])));
            res.centroids[c] = means[c];
        }
        if (shift < tol) break;
    }
    res.inertia = 0.0;
    for (int i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int c = 0; c < k; ++c) {
            const double d = sq_euclid(pts[i], res.centroids[c]);
            if (d < best) {
                best = d;
                arg = c;
            }
        }
        res.assignment[i] = arg;
        res.inertia += best;
    }
    return res;
}

// Random helpers for property tests.
inline Vec random_vec(int dim, Rng& rng, double scale = 1.0) {
    Vec v(dim);
    for (double& x : v) x = scale * rng.uniform(-1.0, 1.0);
    return v;
}

inline Vec random_nonzero_vec(int dim, Rng& rng, double scale = 1.0) {
    Vec v = random_vec(dim, rng, scale);
    while (norm(v) < 1e-9) v = random_vec(dim, rng, scale);
    return v;
}

inline ProbVec random_prob_vec(int n, Rng& rng) {
    ProbVec p(n);
    double sum = 0.0;
    for (double& x : p) {
        x = -std::log(std::max(rng.uniform01(), 1e-12));
        sum += x;
    }
    for (double& x : p) x /= sum;
    return p;
}

}  // namespace osda::testing
