#include "osda/cluster_init.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

#include "osda/error.hpp"
#include "osda/eval.hpp"

namespace osda {

namespace {

double sq_dist(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// k-means++ seeding: first centroid uniform, then D^2-weighted draws.
std::vector<Vec> seed_centroids(const std::vector<Vec>& pts, int k, Rng& rng) {
    std::vector<Vec> centroids;
    centroids.reserve(k);
    centroids.push_back(pts[rng.uniform_int(static_cast<int>(pts.size()))]);
    std::vector<double> d2(pts.size());
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (size_t i = 0; i < pts.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& cen : centroids) best = std::min(best, sq_dist(pts[i], cen));
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            // All points coincide with existing centroids; any choice works.
            centroids.push_back(pts[rng.uniform_int(static_cast<int>(pts.size()))]);
            continue;
        }
        double r = rng.uniform01() * total;
        size_t pick = pts.size() - 1;
        for (size_t i = 0; i < pts.size(); ++i) {
            r -= d2[i];
            if (r <= 0.0) {
                pick = i;
                break;
            }
        }
        centroids.push_back(pts[pick]);
    }
    return centroids;
}

}  // namespace

ClusterResult kmeans(const std::vector<Vec>& features, int k, Rng& rng, int max_iter, double tol,
                     std::vector<double>* inertia_trace) {
    const int n = static_cast<int>(features.size());
    if (k < 1) throw InvalidConfig("kmeans: k must be >= 1");
    if (n < k) {
        throw InsufficientSamples("kmeans: " + std::to_string(n) + " samples for k = " +
                                  std::to_string(k));
    }
    const size_t dim = features[0].size();

    ClusterResult res;
    res.centroids = seed_centroids(features, k, rng);
    res.assignment.assign(n, 0);

    double prev_inertia = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iter; ++iter) {
        // Assignment step.
        double inertia = 0.0;
        std::vector<int> count(k, 0);
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int arg = 0;
            for (int c = 0; c < k; ++c) {
                const double d = sq_dist(features[i], res.centroids[c]);
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            res.assignment[i] = arg;
            count[arg]++;
            inertia += best;
        }

        // Reseed empty clusters to the point currently farthest from its own
        // centroid, then redo the bookkeeping for that point.
        for (int c = 0; c < k; ++c) {
            if (count[c] > 0) continue;
            double worst = -1.0;
            int far_idx = -1;
            for (int i = 0; i < n; ++i) {
                if (count[res.assignment[i]] <= 1) continue;
                const double d = sq_dist(features[i], res.centroids[res.assignment[i]]);
                if (d > worst) {
                    worst = d;
                    far_idx = i;
                }
            }
            if (far_idx < 0) continue;
            count[res.assignment[far_idx]]--;
            inertia -= worst;
            res.centroids[c] = features[far_idx];
            res.assignment[far_idx] = c;
            count[c] = 1;
        }

        // Update step.
        std::vector<Vec> means(k, Vec(dim, 0.0));
        for (int i = 0; i < n; ++i) {
            for (size_t j = 0; j < dim; ++j) means[res.assignment[i]][j] += features[i][j];
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            for (size_t j = 0; j < dim; ++j) means[c][j] /= count[c];
            shift = std::max(shift, std::sqrt(sq_dist(means[c], res.centroids[c])));
            res.centroids[c] = std::move(means[c]);
        }

        assert(inertia <= prev_inertia + 1e-9 * (1.0 + prev_inertia));
        prev_inertia = inertia;
        (void)prev_inertia;
        if (inertia_trace) inertia_trace->push_back(inertia);
        if (shift < tol) break;
    }

    // Final inertia under the converged centroids.
    res.inertia = 0.0;
    for (int i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int c = 0; c < k; ++c) {
            const double d = sq_dist(features[i], res.centroids[c]);
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

CentroidMatching match_centroids(const std::vector<Vec>& shared_prototypes,
                                 const std::vector<Vec>& centroids, MatchingMode mode) {
    const int ns = static_cast<int>(shared_prototypes.size());
    const int k = static_cast<int>(centroids.size());
    if (k < ns) {
        throw InsufficientSamples("match_centroids: fewer centroids than shared classes");
    }
    for (const auto& c : centroids) {
        if (norm(c) == 0.0) throw DegenerateVector("match_centroids: zero centroid");
    }

    std::vector<std::vector<double>> sim(ns, std::vector<double>(k));
    for (int i = 0; i < ns; ++i) {
        for (int j = 0; j < k; ++j) {
            sim[i][j] = 1.0 - cosine_distance(shared_prototypes[i], centroids[j]);
        }
    }

    CentroidMatching out;
    out.shared_map.assign(ns, -1);
    std::vector<char> taken(k, 0);

    if (mode == MatchingMode::kGreedy) {
        for (int i = 0; i < ns; ++i) {
            int best = -1;
            for (int j = 0; j < k; ++j) {
                if (taken[j]) continue;
                if (best < 0 || sim[i][j] > sim[i][best]) best = j;
            }
            out.shared_map[i] = best;
            taken[best] = 1;
        }
    } else {
        // Globally optimal injection: pad to a square K x K cost matrix where
        // dummy rows cost 0, then minimize negated similarity.
        std::vector<std::vector<double>> cost(k, std::vector<double>(k, 0.0));
        for (int i = 0; i < ns; ++i) {
            for (int j = 0; j < k; ++j) cost[i][j] = -sim[i][j];
        }
        const std::vector<int> assign = hungarian(cost);
        for (int i = 0; i < ns; ++i) {
            out.shared_map[i] = assign[i];
            taken[assign[i]] = 1;
        }
    }
    for (int j = 0; j < k; ++j) {
        if (!taken[j]) out.private_centroids.push_back(j);
    }
    return out;
}

ProbVec bank_init_probs(const Vec& z, const std::vector<Vec>& class_centroids, double tau2) {
    if (class_centroids.empty()) throw InvalidClassCount("bank_init_probs: no centroids");
    const int k = static_cast<int>(class_centroids.size());
    Vec dist(k);
    double max_dist = 0.0;
    for (int c = 0; c < k; ++c) {
        dist[c] = cosine_distance(z, class_centroids[c]);
        max_dist = std::max(max_dist, dist[c]);
    }
    Vec score(k);
    if (max_dist == 0.0) {
        // z coincides (directionally) with every centroid: uniform.
        std::fill(score.begin(), score.end(), 0.0);
    } else {
        for (int c = 0; c < k; ++c) score[c] = 1.0 - dist[c] / max_dist;
    }
    return softmax_temp(score, tau2);
}

InitResult initialize_target(Model& model, const std::vector<Vec>& target_features, double tau2,
                             MatchingMode mode, Rng& rng, int kmeans_max_iter, double kmeans_tol) {
    const int k = model.classifier.n_classes();
    std::vector<Vec> normalized;
    normalized.reserve(target_features.size());
    for (const auto& z : target_features) normalized.push_back(l2_normalize(z));

    InitResult res;
    res.clusters = kmeans(normalized, k, rng, kmeans_max_iter, kmeans_tol);

    std::vector<Vec> shared_protos(model.classifier.columns.begin(),
                                   model.classifier.columns.begin() + model.classifier.n_shared);
    res.matching = match_centroids(shared_protos, res.clusters.centroids, mode);

    res.class_centroids.resize(k);
    for (int i = 0; i < model.classifier.n_shared; ++i) {
        res.class_centroids[i] = res.clusters.centroids[res.matching.shared_map[i]];
    }
    std::vector<Vec> private_protos;
    for (size_t t = 0; t < res.matching.private_centroids.size(); ++t) {
        const Vec& c = res.clusters.centroids[res.matching.private_centroids[t]];
        res.class_centroids[model.classifier.n_shared + static_cast<int>(t)] = c;
        private_protos.push_back(c);
    }
    set_private_prototypes(model.classifier, private_protos);

    res.bank_probs.reserve(target_features.size());
    res.initial_labels.reserve(target_features.size());
    for (const auto& z : target_features) {
        ProbVec p = bank_init_probs(z, res.class_centroids, tau2);
        res.initial_labels.push_back(argmax_index(p));
        res.bank_probs.push_back(std::move(p));
    }
    return res;
}

}  // namespace osda
