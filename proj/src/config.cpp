#include "osda/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "osda/error.hpp"

namespace osda {

namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config: field '") + key + "' has the wrong type");
    }
}

void read_enum(const json& j, const char* key, const std::vector<std::pair<std::string, int>>& map,
               int& out) {
    if (!j.contains(key)) return;
    std::string s;
    read_field(j, key, s);
    for (const auto& [name, value] : map) {
        if (s == name) {
            out = value;
            return;
        }
    }
    std::string options;
    for (const auto& [name, value] : map) options += (options.empty() ? "" : "|") + name;
    throw ConfigError(std::string("config: field '") + key + "' must be one of " + options);
}

const std::vector<std::pair<std::string, int>> kWeightFnNames = {
    {"linear", static_cast<int>(WeightFn::kLinear)},
    {"exponential", static_cast<int>(WeightFn::kExponential)},
};
const std::vector<std::pair<std::string, int>> kCombinerNames = {
    {"and", static_cast<int>(Combiner::kAnd)},
    {"or", static_cast<int>(Combiner::kOr)},
};
const std::vector<std::pair<std::string, int>> kExclusionNames = {
    {"intersect", static_cast<int>(ExclusionMode::kIntersect)},
    {"same_epoch", static_cast<int>(ExclusionMode::kSameEpoch)},
};
const std::vector<std::pair<std::string, int>> kMatchingNames = {
    {"optimal", static_cast<int>(MatchingMode::kOptimal)},
    {"greedy", static_cast<int>(MatchingMode::kGreedy)},
};

std::string enum_name(const std::vector<std::pair<std::string, int>>& map, int value) {
    for (const auto& [name, v] : map) {
        if (v == value) return name;
    }
    return "?";
}

const std::set<std::string> kKnownKeys = {
    "seed", "n_shared", "hidden_dims", "feature_dim", "n_private_hat", "bank_size",
    "n_neighbors", "tau_hist", "key_queue_size", "tau2", "tau_contrastive", "ema_momentum",
    "gamma_cls", "gamma_ctr", "gamma_div", "weight_fn_nc", "weight_fn_cs", "combiner",
    "exclusion", "matching", "include_positive_in_denominator", "sigma_w", "sigma_s",
    "mask_prob", "lr", "weight_decay", "batch_size", "epochs_source", "epochs_adapt",
    "kmeans_max_iter", "kmeans_tol", "use_cluster_init", "use_nc_uncertainty",
    "use_cs_uncertainty", "use_contrastive", "synth"};

const std::set<std::string> kKnownSynthKeys = {
    "n_shared",     "n_private",    "input_dim", "samples_per_class", "center_scale",
    "within_std",   "rotation_deg", "translation", "jitter_lo",       "jitter_hi",
    "seed"};

void require_positive(double v, const char* key) {
    if (!(v > 0.0)) throw ConfigError(std::string("config: field '") + key + "' must be > 0");
}

void require_prob(double v, const char* key) {
    if (v < 0.0 || v > 1.0) {
        throw ConfigError(std::string("config: field '") + key + "' must be in [0, 1]");
    }
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: document must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!kKnownKeys.count(key)) {
            throw ConfigError("config: unknown field '" + key + "'");
        }
    }

    RunConfig cfg;
    read_field(j, "seed", cfg.seed);
    read_field(j, "n_shared", cfg.n_shared);
    read_field(j, "hidden_dims", cfg.hidden_dims);
    read_field(j, "feature_dim", cfg.feature_dim);
    read_field(j, "n_private_hat", cfg.n_private_hat);
    read_field(j, "bank_size", cfg.bank_size);
    read_field(j, "n_neighbors", cfg.n_neighbors);
    read_field(j, "tau_hist", cfg.tau_hist);
    read_field(j, "key_queue_size", cfg.key_queue_size);
    read_field(j, "tau2", cfg.tau2);
    read_field(j, "tau_contrastive", cfg.tau_contrastive);
    read_field(j, "ema_momentum", cfg.ema_momentum);
    read_field(j, "gamma_cls", cfg.gamma_cls);
    read_field(j, "gamma_ctr", cfg.gamma_ctr);
    read_field(j, "gamma_div", cfg.gamma_div);

    int wf = static_cast<int>(cfg.weight_fn_nc);
    read_enum(j, "weight_fn_nc", kWeightFnNames, wf);
    cfg.weight_fn_nc = static_cast<WeightFn>(wf);
    wf = static_cast<int>(cfg.weight_fn_cs);
    read_enum(j, "weight_fn_cs", kWeightFnNames, wf);
    cfg.weight_fn_cs = static_cast<WeightFn>(wf);
    int comb = static_cast<int>(cfg.combiner);
    read_enum(j, "combiner", kCombinerNames, comb);
    cfg.combiner = static_cast<Combiner>(comb);
    int excl = static_cast<int>(cfg.exclusion);
    read_enum(j, "exclusion", kExclusionNames, excl);
    cfg.exclusion = static_cast<ExclusionMode>(excl);
    int match = static_cast<int>(cfg.matching);
    read_enum(j, "matching", kMatchingNames, match);
    cfg.matching = static_cast<MatchingMode>(match);

    read_field(j, "include_positive_in_denominator", cfg.include_positive_in_denominator);
    read_field(j, "sigma_w", cfg.sigma_w);
    read_field(j, "sigma_s", cfg.sigma_s);
    read_field(j, "mask_prob", cfg.mask_prob);
    read_field(j, "lr", cfg.lr);
    read_field(j, "weight_decay", cfg.weight_decay);
    read_field(j, "batch_size", cfg.batch_size);
    read_field(j, "epochs_source", cfg.epochs_source);
    read_field(j, "epochs_adapt", cfg.epochs_adapt);
    read_field(j, "kmeans_max_iter", cfg.kmeans_max_iter);
    read_field(j, "kmeans_tol", cfg.kmeans_tol);
    read_field(j, "use_cluster_init", cfg.use_cluster_init);
    read_field(j, "use_nc_uncertainty", cfg.use_nc_uncertainty);
    read_field(j, "use_cs_uncertainty", cfg.use_cs_uncertainty);
    read_field(j, "use_contrastive", cfg.use_contrastive);

    if (j.contains("synth")) {
        const json& s = j.at("synth");
        if (!s.is_object()) throw ConfigError("config: field 'synth' must be an object");
        for (const auto& [key, value] : s.items()) {
            if (!kKnownSynthKeys.count(key)) {
                throw ConfigError("config: unknown field 'synth." + key + "'");
            }
        }
        read_field(s, "n_shared", cfg.synth.n_shared);
        read_field(s, "n_private", cfg.synth.n_private);
        read_field(s, "input_dim", cfg.synth.input_dim);
        read_field(s, "samples_per_class", cfg.synth.samples_per_class);
        read_field(s, "center_scale", cfg.synth.center_scale);
        read_field(s, "within_std", cfg.synth.within_std);
        read_field(s, "rotation_deg", cfg.synth.rotation_deg);
        read_field(s, "translation", cfg.synth.translation);
        read_field(s, "jitter_lo", cfg.synth.jitter_lo);
        read_field(s, "jitter_hi", cfg.synth.jitter_hi);
        read_field(s, "seed", cfg.synth.seed);
    }

    if (cfg.n_shared < 1) throw ConfigError("config: field 'n_shared' must be >= 1");
    if (cfg.feature_dim < 1) throw ConfigError("config: field 'feature_dim' must be >= 1");
    if (cfg.n_neighbors < 1) throw ConfigError("config: field 'n_neighbors' must be >= 1");
    if (cfg.tau_hist < 1) throw ConfigError("config: field 'tau_hist' must be >= 1");
    if (cfg.key_queue_size < 2) throw ConfigError("config: field 'key_queue_size' must be >= 2");
    require_positive(cfg.tau2, "tau2");
    require_positive(cfg.tau_contrastive, "tau_contrastive");
    require_prob(cfg.ema_momentum, "ema_momentum");
    require_prob(cfg.mask_prob, "mask_prob");
    if (cfg.sigma_w < 0 || cfg.sigma_s < 0) {
        throw ConfigError("config: fields 'sigma_w'/'sigma_s' must be >= 0");
    }
    require_positive(cfg.lr, "lr");
    if (cfg.weight_decay < 0) throw ConfigError("config: field 'weight_decay' must be >= 0");
    if (cfg.batch_size < 1) throw ConfigError("config: field 'batch_size' must be >= 1");
    if (cfg.epochs_source < 0 || cfg.epochs_adapt < 0) {
        throw ConfigError("config: epoch counts must be >= 0");
    }
    if (cfg.kmeans_max_iter < 1) throw ConfigError("config: field 'kmeans_max_iter' must be >= 1");
    require_positive(cfg.kmeans_tol, "kmeans_tol");
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

std::string apply_override(const std::string& json_text, const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("config: override '" + assignment + "' is not of the form key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    json parsed_value;
    try {
        parsed_value = json::parse(value);
    } catch (const json::exception&) {
        parsed_value = value;  // bare strings (e.g. combiner=or)
    }
    // Dotted keys address nested objects (synth.n_private=5).
    json* cursor = &j;
    size_t pos = 0;
    while (true) {
        const size_t dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos
                                                                          : dot - pos);
        if (dot == std::string::npos) {
            (*cursor)[part] = parsed_value;
            break;
        }
        cursor = &(*cursor)[part];
        pos = dot + 1;
    }
    return j.dump();
}

std::string config_to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["n_shared"] = cfg.n_shared;
    j["hidden_dims"] = cfg.hidden_dims;
    j["feature_dim"] = cfg.feature_dim;
    j["n_private_hat"] = cfg.n_private_hat;
    j["bank_size"] = cfg.bank_size;
    j["n_neighbors"] = cfg.n_neighbors;
    j["tau_hist"] = cfg.tau_hist;
    j["key_queue_size"] = cfg.key_queue_size;
    j["tau2"] = cfg.tau2;
    j["tau_contrastive"] = cfg.tau_contrastive;
    j["ema_momentum"] = cfg.ema_momentum;
    j["gamma_cls"] = cfg.gamma_cls;
    j["gamma_ctr"] = cfg.gamma_ctr;
    j["gamma_div"] = cfg.gamma_div;
    j["weight_fn_nc"] = enum_name(kWeightFnNames, static_cast<int>(cfg.weight_fn_nc));
    j["weight_fn_cs"] = enum_name(kWeightFnNames, static_cast<int>(cfg.weight_fn_cs));
    j["combiner"] = enum_name(kCombinerNames, static_cast<int>(cfg.combiner));
    j["exclusion"] = enum_name(kExclusionNames, static_cast<int>(cfg.exclusion));
    j["matching"] = enum_name(kMatchingNames, static_cast<int>(cfg.matching));
    j["include_positive_in_denominator"] = cfg.include_positive_in_denominator;
    j["sigma_w"] = cfg.sigma_w;
    j["sigma_s"] = cfg.sigma_s;
    j["mask_prob"] = cfg.mask_prob;
    j["lr"] = cfg.lr;
    j["weight_decay"] = cfg.weight_decay;
    j["batch_size"] = cfg.batch_size;
    j["epochs_source"] = cfg.epochs_source;
    j["epochs_adapt"] = cfg.epochs_adapt;
    j["kmeans_max_iter"] = cfg.kmeans_max_iter;
    j["kmeans_tol"] = cfg.kmeans_tol;
    j["use_cluster_init"] = cfg.use_cluster_init;
    j["use_nc_uncertainty"] = cfg.use_nc_uncertainty;
    j["use_cs_uncertainty"] = cfg.use_cs_uncertainty;
    j["use_contrastive"] = cfg.use_contrastive;
    j["synth"] = {
        {"n_shared", cfg.synth.n_shared},
        {"n_private", cfg.synth.n_private},
        {"input_dim", cfg.synth.input_dim},
        {"samples_per_class", cfg.synth.samples_per_class},
        {"center_scale", cfg.synth.center_scale},
        {"within_std", cfg.synth.within_std},
        {"rotation_deg", cfg.synth.rotation_deg},
        {"translation", cfg.synth.translation},
        {"jitter_lo", cfg.synth.jitter_lo},
        {"jitter_hi", cfg.synth.jitter_hi},
        {"seed", cfg.synth.seed},
    };
    return j.dump(2);
}

}  // namespace osda
