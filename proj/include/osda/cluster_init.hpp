#pragma once

#include <utility>
#include <vector>

#include "osda/model.hpp"
#include "osda/numerics.hpp"
#include "osda/rng.hpp"

namespace osda {

struct ClusterResult {
    std::vector<Vec> centroids;   // length K; centroid k = mean of its members
    std::vector<int> assignment;  // per sample, in [0, K)
    double inertia = 0.0;
};

// Lloyd's algorithm with k-means++ seeding. Terminates when the largest
// centroid shift drops below tol or after max_iter rounds. Empty clusters
// are reseeded to the point farthest from its own centroid. If given,
// inertia_trace receives the per-iteration assignment cost (non-increasing).
ClusterResult kmeans(const std::vector<Vec>& features, int k, Rng& rng, int max_iter = 100,
                     double tol = 1e-6, std::vector<double>* inertia_trace = nullptr);

struct CentroidMatching {
    std::vector<int> shared_map;         // class index -> centroid index, pairwise distinct
    std::vector<int> private_centroids;  // leftover centroid indices, ascending
};

enum class MatchingMode {
    kOptimal,  // one-to-one assignment maximizing total cosine similarity
    kGreedy,   // per-class best centroid, first-come priority by class index
};

CentroidMatching match_centroids(const std::vector<Vec>& shared_prototypes,
                                 const std::vector<Vec>& centroids,
                                 MatchingMode mode = MatchingMode::kOptimal);

// Similarity-proportional bank probabilities: per-class score
// s_k = 1 - CosDist(z, c_k) / max_j CosDist(z, c_j), then softmax(s / tau2).
// Centroids must already be permuted so index == class index.
ProbVec bank_init_probs(const Vec& z, const std::vector<Vec>& class_centroids, double tau2);

struct InitResult {
    std::vector<Vec> class_centroids;  // index == class index
    std::vector<ProbVec> bank_probs;   // per target sample
    std::vector<int> initial_labels;   // per target sample
    CentroidMatching matching;
    ClusterResult clusters;
};

// Clustering-based target-model initialization: k-means over the (L2
// normalized) source-extractor target features, centroid/prototype matching,
// leftover centroids written into W_P, and per-sample bank probabilities.
// The initial hard label of a sample is the argmax of its bank probability
// vector (equivalently, its cosine-nearest class centroid).
InitResult initialize_target(Model& model, const std::vector<Vec>& target_features, double tau2,
                             MatchingMode mode, Rng& rng, int kmeans_max_iter = 100,
                             double kmeans_tol = 1e-6);

}  // namespace osda
