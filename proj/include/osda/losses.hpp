#pragma once

#include <utility>
#include <vector>

#include "osda/bank.hpp"
#include "osda/config.hpp"
#include "osda/model.hpp"
#include "osda/numerics.hpp"
#include "osda/pseudo.hpp"
#include "osda/rng.hpp"

namespace osda {

struct LossBreakdown {
    double l_cls = 0.0;
    double l_ctr = 0.0;
    double l_div = 0.0;
    double total = 0.0;
    int n_selected = 0;
    int n_excluded_pairs = 0;  // negative pairs removed by temporal exclusion
    int n_ctr_skipped = 0;     // samples with fewer than 2 admissible negatives
};

struct CeResult {
    double loss = 0.0;
    Vec dlogits;
};

// Standard cross-entropy -log p_y with its softmax-level gradient p - e_y.
CeResult cross_entropy_loss(const ProbVec& p, int label);

struct NlClsResult {
    double loss = 0.0;
    Vec dlogits;
    int y_tilde = -1;
};

// Negative-learning classification loss: a complementary label y_tilde is
// drawn uniformly from the classes other than y_bar and the model is pushed
// away from it, loss = -log(1 - p[y_tilde]).
// Through the softmax, d/dlogit_c = p_yt / (1 - p_yt) * (1[c = yt] - p_c).
// Where 1 - p[y_tilde] falls below the 1e-7 clamp the loss saturates and
// the gradient is zero.
NlClsResult nl_classification_loss(const ProbVec& p_sa, int y_bar, Rng& rng);

// Deterministic core with the complementary label already chosen.
NlClsResult nl_classification_eval(const ProbVec& p_sa, int y_tilde);

// FIFO queue of momentum-encoder keys used as contrastive negatives.
struct KeyQueue {
    std::vector<int> ids;
    std::vector<Vec> keys;  // L2-normalized
    int capacity = 256;

    int size() const { return static_cast<int>(ids.size()); }
    void push(int sample_id, Vec key);
};

// Indices of queue entries admissible as negatives for query_id: entries
// whose pseudo-label history never intersected the query's, and that do not
// belong to the query sample itself.
std::vector<int> exclusion_set(const std::vector<int>& queue_ids, int query_id,
                               const TemporalQueue& queue);

struct NlInfoNceResult {
    bool skipped = false;
    double loss = 0.0;
    Vec dq;            // gradient w.r.t. the (normalized) query
    int k_minus = -1;  // position within `admissible`
};

// Negative-learning InfoNCE: one negative key drawn uniformly from the
// admissible set, loss = -log(1 - exp(q.k_-/tau) / sum_j exp(q.k_j/tau)).
// Keys are constants (momentum path); the gradient flows to q only.
// Fewer than two admissible negatives makes the sample a skip, not an error.
NlInfoNceResult nl_infonce_loss(const Vec& q, const KeyQueue& queue,
                                const std::vector<int>& admissible, double tau, Rng& rng,
                                const Vec* positive_key = nullptr);

// Deterministic core with the negative already chosen (used by the batch
// evaluation and by finite-difference checks).
NlInfoNceResult nl_infonce_eval(const Vec& q, const KeyQueue& queue,
                                const std::vector<int>& admissible, int k_minus_pos, double tau,
                                const Vec* positive_key = nullptr);

struct DiversityResult {
    double loss = 0.0;
    std::vector<Vec> dlogits;  // per sample, already carrying the 1/B factor
};

// Negative entropy of the batch-mean prediction (natural log); minimizing
// pushes the mean towards uniform and prevents posterior collapse.
DiversityResult diversity_loss(const std::vector<ProbVec>& p_batch);

// All randomness and discrete choices of one optimization step, fixed ahead
// of the differentiable evaluation: augmented inputs, refined pseudo-labels,
// selection, complementary labels, momentum keys, and negative choices.
struct SamplePlan {
    int sample_id = -1;
    Vec input_weak;
    Vec input_strong;          // query path: classification + contrastive
    Vec key;                   // momentum-encoder key of a second strong view
    PseudoLabelRecord record;
    int y_tilde = -1;
    std::vector<int> admissible;  // indices into the key-queue snapshot
    int k_minus_pos = -1;         // position within admissible, -1 = skipped
};

struct BatchPlan {
    std::vector<SamplePlan> samples;
    KeyQueue queue_snapshot;
    int n_excluded_pairs = 0;
};

// RNG streams consumed while planning a batch. Copyable so that a plan can
// be reproduced exactly.
struct RngPack {
    Rng aug_weak;
    Rng aug_strong;
    Rng selection;
    Rng complementary;
    Rng negative;

    explicit RngPack(uint64_t seed)
        : aug_weak(seed, Stream::kAugWeak),
          aug_strong(seed, Stream::kAugStrong),
          selection(seed, Stream::kSelection),
          complementary(seed, Stream::kComplementary),
          negative(seed, Stream::kNegativeKeys) {}
};

// Refines, gates and augments one batch. Samples are processed in ascending
// sample_id order so that stream consumption is deterministic.
BatchPlan make_batch_plan(const Model& live, const Model& momentum,
                          const std::vector<std::pair<int, Vec>>& batch, const MemoryBank& bank,
                          const TemporalQueue& queue, const KeyQueue& key_queue,
                          const RunConfig& cfg, double in_scale, RngPack& rngs);

// Differentiable evaluation of the total objective for a fixed plan:
// L = gamma_cls * L_cls + gamma_ctr * L_ctr + gamma_div * L_div, with L_cls
// averaged over selected samples and the other terms over the whole batch.
std::pair<LossBreakdown, ModelGrads> evaluate_plan(const Model& live, const BatchPlan& plan,
                                                   const RunConfig& cfg);

// Convenience wrapper: plan + evaluate in one call.
std::pair<LossBreakdown, ModelGrads> total_loss_and_grads(
    const Model& live, const Model& momentum, const std::vector<std::pair<int, Vec>>& batch,
    const MemoryBank& bank, const TemporalQueue& queue, const KeyQueue& key_queue,
    const RunConfig& cfg, double in_scale, RngPack& rngs, BatchPlan* plan_out = nullptr);

}  // namespace osda
