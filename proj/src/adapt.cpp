#include "osda/adapt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <tuple>

#include <json.hpp>

#include "osda/bank.hpp"
#include "osda/cluster_init.hpp"
#include "osda/error.hpp"

namespace osda {

std::vector<int> predict(const Model& m, const std::vector<Vec>& inputs) {
    std::vector<int> out;
    out.reserve(inputs.size());
    for (const auto& x : inputs) out.push_back(argmax_index(forward(m, x).logits));
    return out;
}

double pseudo_label_accuracy(const std::vector<int>& labels, const std::vector<int>& truth,
                             int n_shared) {
    if (labels.size() != truth.size() || labels.empty()) {
        throw ShapeError("pseudo_label_accuracy: size mismatch");
    }
    int hits = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (truth[i] < n_shared) {
            hits += labels[i] == truth[i];
        } else {
            hits += labels[i] >= n_shared;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

AdaptCoreResult adapt_core(const Model& source, const TargetInputs& target, const RunConfig& cfg,
                           const EpochObserver& observer) {
    const int n = target.size();
    if (n == 0) throw DataError("adapt_core: empty target");
    const int n_private_hat = cfg.resolved_n_private_hat();

    AdaptCoreResult res;

    // Extend the classifier with uniformly initialized private columns.
    Model live = source;
    if (n_private_hat > 0) {
        Rng init_rng(cfg.seed, Stream::kClassifierInit);
        live.classifier = extend_classifier(live.classifier, n_private_hat, init_rng);
    }
    const int n_classes = live.classifier.n_classes();
    if (cfg.n_neighbors > n) throw InsufficientSamples("adapt_core: n_neighbors > target size");

    // Target features under the frozen source extractor.
    std::vector<Vec> features(n);
    for (int i = 0; i < n; ++i) features[i] = extract_features(source.extractor, target.inputs[i]);
    res.raw_extended_labels = predict(live, target.inputs);

    // Initial pseudo-labels and bank probabilities: clustering-based when
    // enabled, otherwise the extended model's own softmax predictions.
    std::vector<ProbVec> bank_probs(n);
    if (cfg.use_cluster_init) {
        Rng cluster_rng(cfg.seed, Stream::kClustering);
        InitResult init = initialize_target(live, features, cfg.tau2, cfg.matching, cluster_rng,
                                            cfg.kmeans_max_iter, cfg.kmeans_tol);
        res.initial_labels = std::move(init.initial_labels);
        bank_probs = std::move(init.bank_probs);
    } else {
        res.initial_labels.resize(n);
        for (int i = 0; i < n; ++i) {
            const ForwardResult r = forward(live, target.inputs[i]);
            bank_probs[i] = r.p;
            res.initial_labels[i] = argmax_index(r.p);
        }
    }

    std::vector<BankEntry> seeds(n);
    for (int i = 0; i < n; ++i) seeds[i] = {i, features[i], bank_probs[i]};
    Rng bank_rng(cfg.seed, Stream::kBankInit);
    MemoryBank bank = bank_create(seeds, cfg.resolved_bank_size(n), bank_rng);

    MomentumModel momentum{live, cfg.ema_momentum};
    TemporalQueue queue(cfg.tau_hist, n_classes, cfg.exclusion);
    for (int i = 0; i < n; ++i) queue_push(queue, i, res.initial_labels[i]);
    KeyQueue key_queue;
    key_queue.capacity = cfg.key_queue_size;

    RngPack rngs(cfg.seed);
    Rng order_rng(cfg.seed, Stream::kBatchOrder);
    const double in_scale = input_scale(target.inputs);

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs_adapt; ++epoch) {
        const double lr_e =
            cfg.lr * 0.5 *
            (1.0 + std::cos(std::numbers::pi * epoch / std::max(1, cfg.epochs_adapt)));
        order_rng.shuffle(order);

        EpochStats stats;
        std::vector<int> epoch_labels(n, -1);
        double sum_u_nc = 0.0, sum_u_cs = 0.0;
        int selected_count = 0;

        for (int start = 0; start < n; start += cfg.batch_size) {
            const int end = std::min(start + cfg.batch_size, n);
            std::vector<std::pair<int, Vec>> batch;
            batch.reserve(end - start);
            for (int bi = start; bi < end; ++bi) {
                batch.emplace_back(order[bi], target.inputs[order[bi]]);
            }

            BatchPlan plan;
            LossBreakdown breakdown;
            try {
                plan = make_batch_plan(live, momentum.shadow, batch, bank, queue, key_queue, cfg,
                                       in_scale, rngs);
                ModelGrads grads;
                std::tie(breakdown, grads) = evaluate_plan(live, plan, cfg);
                sgd_step(live, grads, lr_e, cfg.weight_decay);
            } catch (const Error& e) {
                throw Error("epoch " + std::to_string(epoch) + ", batch at sample " +
                            std::to_string(start) + ": " + e.what());
            }
            ema_update(momentum, live);

            std::vector<std::pair<int, Vec>> weak_inputs;
            weak_inputs.reserve(plan.samples.size());
            for (const auto& sp : plan.samples) {
                weak_inputs.emplace_back(sp.sample_id, sp.input_weak);
            }
            bank_refresh(bank, momentum.shadow, weak_inputs);

            const double b = static_cast<double>(plan.samples.size());
            for (auto& sp : plan.samples) {
                key_queue.push(sp.sample_id, std::move(sp.key));
                epoch_labels[sp.sample_id] = sp.record.y_bar;
                sum_u_nc += sp.record.u_nc;
                sum_u_cs += sp.record.u_cs;
                if (sp.record.selected) {
                    stats.sum_u_nc_selected += sp.record.u_nc;
                    stats.n_selected++;
                } else {
                    stats.sum_u_nc_rejected += sp.record.u_nc;
                    stats.n_rejected++;
                }
            }
            selected_count += breakdown.n_selected;
            stats.l_cls += breakdown.l_cls * b;
            stats.l_ctr += breakdown.l_ctr * b;
            stats.l_div += breakdown.l_div * b;
            stats.total += breakdown.total * b;
            stats.n_ctr_skipped += breakdown.n_ctr_skipped;
            stats.n_excluded_pairs += breakdown.n_excluded_pairs;
        }

        for (int i = 0; i < n; ++i) queue_push(queue, i, epoch_labels[i]);
        stats.l_cls /= n;
        stats.l_ctr /= n;
        stats.l_div /= n;
        stats.total /= n;
        stats.selection_rate = static_cast<double>(selected_count) / n;
        stats.mean_u_nc = sum_u_nc / n;
        stats.mean_u_cs = sum_u_cs / n;
        if (observer) observer(epoch, epoch_labels, stats);
        res.trace.push_back(stats);
    }

    res.adapted = std::move(live);
    return res;
}

AdaptOutcome run_adaptation(const Model& source, const DatasetSplit& target,
                            const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const TargetInputs inputs = strip_labels(target);
    const bool have_truth =
        !target.labels.empty() &&
        std::none_of(target.labels.begin(), target.labels.end(), [](int y) { return y < 0; });
    const int n_shared = source.classifier.n_shared;

    EpochObserver observer = nullptr;
    if (have_truth) {
        observer = [&](int, const std::vector<int>& labels, EpochStats& stats) {
            stats.pseudo_label_accuracy = pseudo_label_accuracy(labels, target.labels, n_shared);
        };
    }

    AdaptCoreResult core = adapt_core(source, inputs, cfg, observer);

    AdaptOutcome out;
    out.report.config_json = config_to_json(cfg);
    out.report.trace = std::move(core.trace);
    out.report.initial_labels = std::move(core.initial_labels);
    if (have_truth) {
        out.report.initial_label_accuracy =
            pseudo_label_accuracy(out.report.initial_labels, target.labels, n_shared);
        out.report.raw_extended_accuracy =
            pseudo_label_accuracy(core.raw_extended_labels, target.labels, n_shared);

        const std::vector<int> pred = predict(core.adapted, target.inputs);
        out.report.final_metrics = open_set_metrics(pred, target.labels, n_shared);

        // Discovery metrics only when the extension size matches the true
        // private class count.
        int true_private = 0;
        for (int y : target.labels) true_private = std::max(true_private, y - n_shared + 1);
        if (true_private > 0 && cfg.resolved_n_private_hat() == true_private) {
            std::vector<int> pred_private, truth_private;
            std::vector<Vec> private_feats;
            for (size_t i = 0; i < pred.size(); ++i) {
                if (target.labels[i] < n_shared) continue;
                truth_private.push_back(target.labels[i] - n_shared);
                pred_private.push_back(pred[i] >= n_shared ? pred[i] - n_shared : -1);
                private_feats.push_back(
                    extract_features(core.adapted.extractor, target.inputs[i]));
            }
            out.report.discovery = cluster_accuracy(pred_private, truth_private, true_private);
            out.report.discovery_prototype =
                cluster_accuracy_prototype(private_feats, pred_private, truth_private,
                                           true_private);
        }
    }
    out.adapted = std::move(core.adapted);
    const auto t1 = std::chrono::steady_clock::now();
    out.report.wall_clock_sec = std::chrono::duration<double>(t1 - t0).count();
    return out;
}

std::string report_to_json(const RunReport& report, bool include_wall_clock) {
    nlohmann::json j;
    j["config"] = nlohmann::json::parse(report.config_json);
    j["trace"] = nlohmann::json::array();
    for (const auto& s : report.trace) {
        nlohmann::json e;
        e["l_cls"] = s.l_cls;
        e["l_ctr"] = s.l_ctr;
        e["l_div"] = s.l_div;
        e["total"] = s.total;
        e["selection_rate"] = s.selection_rate;
        e["mean_u_nc"] = s.mean_u_nc;
        e["mean_u_cs"] = s.mean_u_cs;
        e["n_ctr_skipped"] = s.n_ctr_skipped;
        e["n_excluded_pairs"] = s.n_excluded_pairs;
        e["pseudo_label_accuracy"] = s.pseudo_label_accuracy;
        j["trace"].push_back(e);
    }
    j["initial_labels"] = report.initial_labels;
    j["initial_label_accuracy"] = report.initial_label_accuracy;
    j["raw_extended_accuracy"] = report.raw_extended_accuracy;
    j["final_metrics"] = nlohmann::json::parse(metrics_to_json(
        report.final_metrics, report.discovery ? &*report.discovery : nullptr));
    if (report.discovery_prototype) {
        j["discovery_prototype"] = {{"cluster_acc", report.discovery_prototype->cluster_acc},
                                    {"matching", report.discovery_prototype->matching}};
    }
    if (include_wall_clock) j["wall_clock_sec"] = report.wall_clock_sec;
    return j.dump(2);
}

}  // namespace osda
