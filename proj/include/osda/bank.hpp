#pragma once

#include <unordered_map>
#include <utility>
#include <vector>

#include "osda/model.hpp"
#include "osda/numerics.hpp"
#include "osda/rng.hpp"

namespace osda {

struct BankEntry {
    int sample_id = -1;
    Vec z;      // momentum-model feature
    ProbVec p;  // momentum-model softmax prediction
};

// Fixed-membership store of (feature, prediction) pairs; contents are
// overwritten by the momentum model, membership never changes.
struct MemoryBank {
    std::vector<BankEntry> entries;
    std::unordered_map<int, int> index;  // sample_id -> position

    int size() const { return static_cast<int>(entries.size()); }
    bool contains(int sample_id) const { return index.count(sample_id) > 0; }
};

// Uniformly samples m distinct seed entries without replacement.
MemoryBank bank_create(const std::vector<BankEntry>& seed_pairs, int m, Rng& rng);

// Recomputes z' and p' with the momentum model for every bank member in the
// batch; inputs are the (already weakly augmented) sample vectors.
void bank_refresh(MemoryBank& bank, const Model& momentum,
                  const std::vector<std::pair<int, Vec>>& batch_inputs);

// The n entries with smallest cosine distance to z; ties broken by
// ascending sample_id. Exhaustive scan.
std::vector<std::pair<int, ProbVec>> neighbors(const MemoryBank& bank, const Vec& z, int n);

enum class ExclusionMode {
    kIntersect,  // histories share a label value anywhere in the window
    kSameEpoch,  // histories share a label at the same past epoch
};

// Per-sample ring buffer of the last tau_hist refined pseudo-labels.
class TemporalQueue {
   public:
    TemporalQueue(int tau_hist, int n_classes, ExclusionMode mode = ExclusionMode::kIntersect)
        : tau_hist_(tau_hist), n_classes_(n_classes), mode_(mode) {}

    int tau_hist() const { return tau_hist_; }
    ExclusionMode mode() const { return mode_; }

    void push(int sample_id, int label);
    const std::vector<int>* history(int sample_id) const;

   private:
    int tau_hist_;
    int n_classes_;
    ExclusionMode mode_;
    std::unordered_map<int, std::vector<int>> hist_;
};

void queue_push(TemporalQueue& q, int sample_id, int label);

// True iff the two samples shared a pseudo-label within the window, under
// the queue's exclusion mode. Unknown ids have empty histories.
bool shared_history(const TemporalQueue& q, int id_a, int id_b);

}  // namespace osda
