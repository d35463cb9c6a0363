#include "osda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "osda/data.hpp"
#include "osda/error.hpp"

namespace osda {

CeResult cross_entropy_loss(const ProbVec& p, int label) {
    if (label < 0 || label >= static_cast<int>(p.size())) {
        throw InvalidLabel("cross_entropy_loss: label out of range");
    }
    CeResult r;
    r.loss = -std::log(std::max(p[label], 1e-12));
    r.dlogits = p;
    r.dlogits[label] -= 1.0;
    return r;
}

NlClsResult nl_classification_eval(const ProbVec& p_sa, int y_tilde) {
    const int n_classes = static_cast<int>(p_sa.size());
    NlClsResult r;
    r.y_tilde = y_tilde;
    r.dlogits.assign(n_classes, 0.0);
    const double p_yt = p_sa[y_tilde];
    const double one_minus = 1.0 - p_yt;
    if (one_minus < 1e-7) {
        // Clamped region: the loss saturates at -log(1e-7) and is locally
        // constant, so the gradient is identically zero.
        r.loss = -std::log(1e-7);
        return r;
    }
    r.loss = -std::log(one_minus);
    // d/dlogit_c of -log(1 - softmax(l)_yt):
    //   dp_yt/dl_c = p_yt (1[c=yt] - p_c)
    //   => g_c = p_yt / (1 - p_yt) * (1[c=yt] - p_c)
    const double factor = p_yt / one_minus;
    for (int c = 0; c < n_classes; ++c) {
        r.dlogits[c] = factor * ((c == y_tilde ? 1.0 : 0.0) - p_sa[c]);
    }
    return r;
}

NlClsResult nl_classification_loss(const ProbVec& p_sa, int y_bar, Rng& rng) {
    const int n_classes = static_cast<int>(p_sa.size());
    if (n_classes < 2) throw InvalidClassCount("nl_classification_loss: need >= 2 classes");
    if (y_bar < 0 || y_bar >= n_classes) {
        throw InvalidLabel("nl_classification_loss: y_bar out of range");
    }
    const int draw = rng.uniform_int(n_classes - 1);
    return nl_classification_eval(p_sa, draw < y_bar ? draw : draw + 1);
}

void KeyQueue::push(int sample_id, Vec key) {
    ids.push_back(sample_id);
    keys.push_back(std::move(key));
    while (static_cast<int>(ids.size()) > capacity) {
        ids.erase(ids.begin());
        keys.erase(keys.begin());
    }
}

std::vector<int> exclusion_set(const std::vector<int>& queue_ids, int query_id,
                               const TemporalQueue& queue) {
    std::vector<int> admissible;
    for (int j = 0; j < static_cast<int>(queue_ids.size()); ++j) {
        if (queue_ids[j] == query_id) continue;
        if (!shared_history(queue, query_id, queue_ids[j])) admissible.push_back(j);
    }
    return admissible;
}

NlInfoNceResult nl_infonce_eval(const Vec& q, const KeyQueue& queue,
                                const std::vector<int>& admissible, int k_minus_pos, double tau,
                                const Vec* positive_key) {
    NlInfoNceResult r;
    if (admissible.size() < 2 || k_minus_pos < 0) {
        r.skipped = true;
        return r;
    }
    r.k_minus = k_minus_pos;
    // Stabilize exp by the max inner product over denominator terms.
    std::vector<double> sims(admissible.size());
    double max_sim = positive_key ? dot(q, *positive_key) / tau : -1e300;
    for (size_t j = 0; j < admissible.size(); ++j) {
        sims[j] = dot(q, queue.keys[admissible[j]]) / tau;
        max_sim = std::max(max_sim, sims[j]);
    }
    std::vector<double> e(admissible.size());
    double rest = 0.0;  // denominator mass excluding the chosen negative
    for (size_t j = 0; j < admissible.size(); ++j) {
        e[j] = std::exp(sims[j] - max_sim);
        if (static_cast<int>(j) != k_minus_pos) rest += e[j];
    }
    double e_pos = 0.0;
    if (positive_key) {
        e_pos = std::exp(dot(q, *positive_key) / tau - max_sim);
        rest += e_pos;
    }
    const double denom = rest + e[k_minus_pos];
    const double ratio = e[k_minus_pos] / denom;
    const double one_minus = rest / denom;  // = 1 - ratio, computed without cancellation
    r.dq.assign(q.size(), 0.0);
    if (one_minus < 1e-7) {
        // Clamped region: locally constant loss, zero gradient.
        r.loss = -std::log(1e-7);
        return r;
    }
    r.loss = -std::log(one_minus);

    // dL/dq = ratio / ((1 - ratio) tau) * (k_- - sum_j softmax_j k_j),
    // the softmax running over every denominator term.
    Vec mean_key(q.size(), 0.0);
    for (size_t j = 0; j < admissible.size(); ++j) {
        const double w = e[j] / denom;
        const Vec& k = queue.keys[admissible[j]];
        for (size_t d = 0; d < q.size(); ++d) mean_key[d] += w * k[d];
    }
    if (positive_key) {
        const double w = e_pos / denom;
        for (size_t d = 0; d < q.size(); ++d) mean_key[d] += w * (*positive_key)[d];
    }
    const double factor = ratio / (one_minus * tau);
    const Vec& k_minus = queue.keys[admissible[k_minus_pos]];
    for (size_t d = 0; d < q.size(); ++d) {
        r.dq[d] = factor * (k_minus[d] - mean_key[d]);
    }
    return r;
}

NlInfoNceResult nl_infonce_loss(const Vec& q, const KeyQueue& queue,
                                const std::vector<int>& admissible, double tau, Rng& rng,
                                const Vec* positive_key) {
    if (admissible.size() < 2) {
        NlInfoNceResult r;
        r.skipped = true;
        return r;
    }
    const int pos = rng.uniform_int(static_cast<int>(admissible.size()));
    return nl_infonce_eval(q, queue, admissible, pos, tau, positive_key);
}

DiversityResult diversity_loss(const std::vector<ProbVec>& p_batch) {
    if (p_batch.empty()) throw EmptyBatch("diversity_loss: empty batch");
    const size_t n_classes = p_batch[0].size();
    const double inv_b = 1.0 / static_cast<double>(p_batch.size());

    ProbVec mean(n_classes, 0.0);
    for (const auto& p : p_batch) {
        for (size_t c = 0; c < n_classes; ++c) mean[c] += inv_b * p[c];
    }
    DiversityResult r;
    Vec dmean(n_classes, 0.0);  // dL/dmean_c = log(mean_c) + 1
    for (size_t c = 0; c < n_classes; ++c) {
        const double m = std::max(mean[c], 1e-12);
        r.loss += mean[c] > 0.0 ? mean[c] * std::log(m) : 0.0;
        dmean[c] = (std::log(m) + 1.0) * inv_b;
    }
    // Chain through each sample's softmax.
    r.dlogits.reserve(p_batch.size());
    for (const auto& p : p_batch) {
        double inner = 0.0;
        for (size_t c = 0; c < n_classes; ++c) inner += dmean[c] * p[c];
        Vec g(n_classes);
        for (size_t c = 0; c < n_classes; ++c) g[c] = p[c] * (dmean[c] - inner);
        r.dlogits.push_back(std::move(g));
    }
    return r;
}

BatchPlan make_batch_plan(const Model& live, const Model& momentum,
                          const std::vector<std::pair<int, Vec>>& batch, const MemoryBank& bank,
                          const TemporalQueue& queue, const KeyQueue& key_queue,
                          const RunConfig& cfg, double in_scale, RngPack& rngs) {
    BatchPlan plan;
    plan.queue_snapshot = key_queue;
    const int n_classes = live.classifier.n_classes();
    const double sigma_w = cfg.sigma_w * in_scale;
    const double sigma_s = cfg.sigma_s * in_scale;

    std::vector<std::pair<int, Vec>> ordered = batch;
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    for (const auto& [sample_id, input] : ordered) {
        SamplePlan sp;
        sp.sample_id = sample_id;
        sp.input_weak = weak_aug(input, sigma_w, rngs.aug_weak);
        sp.input_strong = strong_aug(input, sigma_s, cfg.mask_prob, rngs.aug_strong);
        const Vec strong2 = strong_aug(input, sigma_s, cfg.mask_prob, rngs.aug_strong);
        sp.key = l2_normalize(extract_features(momentum.extractor, strong2));

        // Refinement and gating run on the weak view through the live model.
        const Vec z_wa = extract_features(live.extractor, sp.input_weak);
        auto [p_bar, y_bar] = refine(bank, z_wa, cfg.n_neighbors);
        sp.record.sample_id = sample_id;
        sp.record.p_bar = std::move(p_bar);
        sp.record.y_bar = y_bar;
        sp.record.u_nc = uncertainty_nc(sp.record.p_bar, n_classes);
        sp.record.u_cs = uncertainty_cs(z_wa, live.classifier, sp.record.p_bar);
        sp.record.w_nc =
            cfg.use_nc_uncertainty ? to_weight(sp.record.u_nc, cfg.weight_fn_nc) : 1.0;
        sp.record.w_cs =
            cfg.use_cs_uncertainty ? to_weight(sp.record.u_cs, cfg.weight_fn_cs) : 1.0;
        sp.record.selected =
            select(sp.record.w_nc, sp.record.w_cs, cfg.combiner, rngs.selection);

        // Complementary label, drawn for every sample to keep the stream
        // independent of selection outcomes.
        const int draw = rngs.complementary.uniform_int(n_classes - 1);
        sp.y_tilde = draw < y_bar ? draw : draw + 1;

        sp.admissible = exclusion_set(plan.queue_snapshot.ids, sample_id, queue);
        int excluded_by_history = 0;
        for (int j = 0; j < plan.queue_snapshot.size(); ++j) {
            if (plan.queue_snapshot.ids[j] != sample_id &&
                shared_history(queue, sample_id, plan.queue_snapshot.ids[j])) {
                excluded_by_history++;
            }
        }
        plan.n_excluded_pairs += excluded_by_history;
        if (sp.admissible.size() >= 2) {
            sp.k_minus_pos = rngs.negative.uniform_int(static_cast<int>(sp.admissible.size()));
        }
        plan.samples.push_back(std::move(sp));
    }
    return plan;
}

std::pair<LossBreakdown, ModelGrads> evaluate_plan(const Model& live, const BatchPlan& plan,
                                                   const RunConfig& cfg) {
    const int batch_size = static_cast<int>(plan.samples.size());
    if (batch_size == 0) throw EmptyBatch("evaluate_plan: empty batch");

    LossBreakdown breakdown;
    breakdown.n_excluded_pairs = plan.n_excluded_pairs;
    ModelGrads grads = make_zero_grads(live);

    // Forward pass for every query view.
    std::vector<ForwardCache> caches(batch_size);
    std::vector<ForwardResult> results(batch_size);
    std::vector<ProbVec> p_batch(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        results[i] = forward(live, plan.samples[i].input_strong, &caches[i]);
        p_batch[i] = results[i].p;
    }

    for (const auto& sp : plan.samples) {
        if (sp.record.selected) breakdown.n_selected++;
    }
    if (breakdown.n_selected == 0 && cfg.gamma_cls != 0.0) {
        std::fprintf(stderr, "warning: no selected samples in batch, L_cls contributes 0\n");
    }

    const DiversityResult div = diversity_loss(p_batch);
    breakdown.l_div = div.loss;
    if (!std::isfinite(div.loss)) throw NonFiniteGradient("evaluate_plan: L_div non-finite");

    const double cls_scale =
        breakdown.n_selected > 0 ? 1.0 / static_cast<double>(breakdown.n_selected) : 0.0;
    const double ctr_scale = 1.0 / static_cast<double>(batch_size);

    for (int i = 0; i < batch_size; ++i) {
        const SamplePlan& sp = plan.samples[i];
        Vec dlogits(live.classifier.n_classes(), 0.0);

        if (sp.record.selected) {
            const NlClsResult cls = nl_classification_eval(results[i].p, sp.y_tilde);
            breakdown.l_cls += cls_scale * cls.loss;
            for (int c = 0; c < live.classifier.n_classes(); ++c) {
                dlogits[c] += cfg.gamma_cls * cls_scale * cls.dlogits[c];
            }
        }
        for (int c = 0; c < live.classifier.n_classes(); ++c) {
            dlogits[c] += cfg.gamma_div * div.dlogits[i][c];
        }

        Vec dz;
        const Vec* dz_ptr = nullptr;
        if (cfg.use_contrastive && cfg.gamma_ctr != 0.0) {
            const Vec q = l2_normalize(results[i].z);
            const NlInfoNceResult nce =
                nl_infonce_eval(q, plan.queue_snapshot, sp.admissible, sp.k_minus_pos,
                                cfg.tau_contrastive,
                                cfg.include_positive_in_denominator ? &sp.key : nullptr);
            if (nce.skipped) {
                breakdown.n_ctr_skipped++;
            } else {
                breakdown.l_ctr += ctr_scale * nce.loss;
                // Chain dL/dq through q = z / ||z||:
                //   dL/dz = (dq - (dq . q) q) / ||z||
                const double zn = norm(results[i].z);
                const double proj = dot(nce.dq, q);
                dz.assign(q.size(), 0.0);
                for (size_t d = 0; d < q.size(); ++d) {
                    dz[d] = cfg.gamma_ctr * ctr_scale * (nce.dq[d] - proj * q[d]) / zn;
                }
                dz_ptr = &dz;
            }
        }
        accumulate_backward(live, caches[i], &dlogits, dz_ptr, grads);
    }

    if (!std::isfinite(breakdown.l_cls)) throw NonFiniteGradient("evaluate_plan: L_cls non-finite");
    if (!std::isfinite(breakdown.l_ctr)) throw NonFiniteGradient("evaluate_plan: L_ctr non-finite");
    breakdown.total = cfg.gamma_cls * breakdown.l_cls + cfg.gamma_ctr * breakdown.l_ctr +
                      cfg.gamma_div * breakdown.l_div;
    return {breakdown, grads};
}

std::pair<LossBreakdown, ModelGrads> total_loss_and_grads(
    const Model& live, const Model& momentum, const std::vector<std::pair<int, Vec>>& batch,
    const MemoryBank& bank, const TemporalQueue& queue, const KeyQueue& key_queue,
    const RunConfig& cfg, double in_scale, RngPack& rngs, BatchPlan* plan_out) {
    BatchPlan plan =
        make_batch_plan(live, momentum, batch, bank, queue, key_queue, cfg, in_scale, rngs);
    auto result = evaluate_plan(live, plan, cfg);
    if (plan_out) *plan_out = std::move(plan);
    return result;
}

}  // namespace osda
