#include "osda/bank.hpp"

#include <algorithm>

#include "osda/error.hpp"

namespace osda {

MemoryBank bank_create(const std::vector<BankEntry>& seed_pairs, int m, Rng& rng) {
    const int n = static_cast<int>(seed_pairs.size());
    if (m < 1) throw InvalidConfig("bank_create: m must be >= 1");
    if (m > n) {
        throw InsufficientSamples("bank_create: m = " + std::to_string(m) + " > " +
                                  std::to_string(n) + " seed pairs");
    }
    MemoryBank bank;
    for (int idx : rng.sample_without_replacement(n, m)) {
        bank.index[seed_pairs[idx].sample_id] = static_cast<int>(bank.entries.size());
        bank.entries.push_back(seed_pairs[idx]);
    }
    return bank;
}

void bank_refresh(MemoryBank& bank, const Model& momentum,
                  const std::vector<std::pair<int, Vec>>& batch_inputs) {
    for (const auto& [sample_id, input] : batch_inputs) {
        auto it = bank.index.find(sample_id);
        if (it == bank.index.end()) continue;
        const ForwardResult r = forward(momentum, input);
        bank.entries[it->second].z = r.z;
        bank.entries[it->second].p = r.p;
    }
}

std::vector<std::pair<int, ProbVec>> neighbors(const MemoryBank& bank, const Vec& z, int n) {
    if (n > bank.size()) {
        throw InsufficientSamples("neighbors: n = " + std::to_string(n) + " > bank size " +
                                  std::to_string(bank.size()));
    }
    std::vector<std::pair<double, int>> order;  // (distance, sample_id)
    order.reserve(bank.entries.size());
    for (const auto& e : bank.entries) {
        order.emplace_back(cosine_distance(z, e.z), e.sample_id);
    }
    std::sort(order.begin(), order.end());
    std::vector<std::pair<int, ProbVec>> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        const int id = order[i].second;
        out.emplace_back(id, bank.entries[bank.index.at(id)].p);
    }
    return out;
}

void TemporalQueue::push(int sample_id, int label) {
    if (label < 0 || label >= n_classes_) {
        throw InvalidLabel("TemporalQueue: label " + std::to_string(label) + " outside [0, " +
                           std::to_string(n_classes_) + ")");
    }
    auto& h = hist_[sample_id];
    h.push_back(label);
    if (static_cast<int>(h.size()) > tau_hist_) h.erase(h.begin());
}

const std::vector<int>* TemporalQueue::history(int sample_id) const {
    auto it = hist_.find(sample_id);
    return it == hist_.end() ? nullptr : &it->second;
}

void queue_push(TemporalQueue& q, int sample_id, int label) { q.push(sample_id, label); }

bool shared_history(const TemporalQueue& q, int id_a, int id_b) {
    const std::vector<int>* ha = q.history(id_a);
    const std::vector<int>* hb = q.history(id_b);
    if (!ha || !hb) return false;
    if (q.mode() == ExclusionMode::kSameEpoch) {
        // Compare positionally from the most recent epoch backwards, so
        // unequal-length histories stay aligned on the shared suffix.
        const size_t depth = std::min(ha->size(), hb->size());
        for (size_t k = 1; k <= depth; ++k) {
            if ((*ha)[ha->size() - k] == (*hb)[hb->size() - k]) return true;
        }
        return false;
    }
    for (int la : *ha) {
        for (int lb : *hb) {
            if (la == lb) return true;
        }
    }
    return false;
}

}  // namespace osda
