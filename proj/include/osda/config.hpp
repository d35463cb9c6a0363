#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "osda/bank.hpp"
#include "osda/cluster_init.hpp"
#include "osda/data.hpp"
#include "osda/pseudo.hpp"

namespace osda {

// Every hyperparameter surfaced by the pipeline, with documented defaults.
// Loaded from a flat JSON document; unknown keys are rejected.
struct RunConfig {
    uint64_t seed = 42;

    // Data contract.
    int n_shared = 10;

    // Model architecture.
    std::vector<int> hidden_dims = {64, 64};
    int feature_dim = 32;

    // Classifier extension; -1 means "equal to n_shared".
    int n_private_hat = -1;

    // Memory bank and neighbours; bank_size -1 means min(N_target, 2048).
    int bank_size = -1;
    int n_neighbors = 4;
    int tau_hist = 5;
    int key_queue_size = 256;

    // Temperatures and EMA momentum. The momentum default is set for
    // desk-scale step counts (hundreds of updates per run); push it towards
    // 0.999 for long schedules.
    double tau2 = 0.25;
    double tau_contrastive = 0.07;
    double ema_momentum = 0.99;

    // Loss weights.
    double gamma_cls = 1.0;
    double gamma_ctr = 1.0;
    double gamma_div = 1.0;

    // Uncertainty-to-probability maps and the Bernoulli combiner.
    WeightFn weight_fn_nc = WeightFn::kExponential;
    WeightFn weight_fn_cs = WeightFn::kLinear;
    Combiner combiner = Combiner::kAnd;

    ExclusionMode exclusion = ExclusionMode::kIntersect;
    MatchingMode matching = MatchingMode::kOptimal;
    bool include_positive_in_denominator = false;

    // Augmentations, relative to the RMS input scale.
    double sigma_w = 0.02;
    double sigma_s = 0.1;
    double mask_prob = 0.1;

    // Optimization.
    double lr = 1e-2;
    double weight_decay = 1e-4;
    int batch_size = 64;
    int epochs_source = 100;
    int epochs_adapt = 30;

    int kmeans_max_iter = 100;
    double kmeans_tol = 1e-6;

    // Component toggles for ablations.
    bool use_cluster_init = true;
    bool use_nc_uncertainty = true;
    bool use_cs_uncertainty = true;
    bool use_contrastive = true;

    SynthConfig synth;

    int resolved_n_private_hat() const { return n_private_hat < 0 ? n_shared : n_private_hat; }
    int resolved_bank_size(int n_target) const {
        return bank_size < 0 ? std::min(n_target, 2048) : bank_size;
    }
};

// Parses a JSON document; missing keys keep defaults, unknown keys and
// out-of-range values raise ConfigError naming the field.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

// Applies one "key=value" override on top of the config's JSON form.
std::string apply_override(const std::string& json_text, const std::string& assignment);

std::string config_to_json(const RunConfig& cfg);

}  // namespace osda
