// Command-line front end: synthetic data generation, source pretraining,
// adaptation, evaluation, and ablation sweeps.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "osda/adapt.hpp"
#include "osda/checkpoint.hpp"
#include "osda/config.hpp"
#include "osda/data.hpp"
#include "osda/error.hpp"
#include "osda/eval.hpp"

namespace fs = std::filesystem;
using namespace osda;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<uint64_t> seed;
};

RunConfig resolve_config(const CommonOpts& opts) {
    std::string text = "{}";
    if (!opts.config_path.empty()) {
        std::ifstream is(opts.config_path);
        if (!is) throw ConfigError("config: cannot open " + opts.config_path);
        std::stringstream ss;
        ss << is.rdbuf();
        text = ss.str();
    }
    for (const auto& assignment : opts.overrides) {
        text = apply_override(text, assignment);
    }
    if (opts.seed) {
        text = apply_override(text, "seed=" + std::to_string(*opts.seed));
        text = apply_override(text, "synth.seed=" + std::to_string(*opts.seed));
    }
    return parse_config(text);
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--set", opts.overrides, "Override a config key, e.g. --set combiner=or");
    cmd->add_option("--seed", opts.seed, "Override the run seed");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os << text;
    if (!text.empty() && text.back() != '\n') os << "\n";
}

Model build_source_model(const RunConfig& cfg, int input_dim) {
    Rng rng(cfg.seed, Stream::kPretrain);
    Model m;
    m.extractor = make_extractor(input_dim, cfg.hidden_dims, cfg.feature_dim, rng);
    m.classifier = make_classifier(cfg.feature_dim, cfg.n_shared, rng);
    return m;
}

int cmd_synth(const CommonOpts& opts, const std::string& out_dir) {
    const RunConfig cfg = resolve_config(opts);
    fs::create_directories(out_dir);
    auto [source, target] = generate_synthetic(cfg.synth);
    save_features((fs::path(out_dir) / "source.csv").string(), source);
    save_features((fs::path(out_dir) / "target.csv").string(), target);
    write_text(fs::path(out_dir) / "config.json", config_to_json(cfg));
    std::printf("wrote %s/{source.csv,target.csv,config.json} (%d source, %d target samples)\n",
                out_dir.c_str(), source.size(), target.size());
    return 0;
}

int cmd_pretrain(const CommonOpts& opts, const std::string& source_csv,
                 const std::string& out_ckpt) {
    const RunConfig cfg = resolve_config(opts);
    DatasetSplit source = load_features(source_csv);
    if (source.size() == 0) throw DataError("pretrain: empty source file");
    for (int y : source.labels) {
        if (y < 0 || y >= cfg.n_shared) {
            throw DataError("pretrain: label " + std::to_string(y) + " outside [0, " +
                            std::to_string(cfg.n_shared) + ")");
        }
    }
    Model model = build_source_model(cfg, source.dim());
    Rng rng(cfg.seed, Stream::kPretrain);
    const double loss = pretrain_source(model, source, cfg.epochs_source, cfg.lr,
                                        cfg.weight_decay, cfg.batch_size, rng);
    save_checkpoint(out_ckpt, model);

    int hits = 0;
    const std::vector<int> pred = predict(model, source.inputs);
    for (int i = 0; i < source.size(); ++i) hits += pred[i] == source.labels[i];
    std::printf("pretrained %d epochs, final CE %.4f, train acc %.1f%%, saved %s\n",
                cfg.epochs_source, loss, 100.0 * hits / source.size(), out_ckpt.c_str());
    return 0;
}

int cmd_adapt(const CommonOpts& opts, const std::string& ckpt_path,
              const std::string& target_csv, const std::string& out_dir) {
    const RunConfig cfg = resolve_config(opts);
    const Model source = load_checkpoint(ckpt_path);
    DatasetSplit target = load_features(target_csv);
    if (target.dim() != source.extractor.input_dim()) {
        throw ShapeError("adapt: target feature dim " + std::to_string(target.dim()) +
                         " != checkpoint input dim " +
                         std::to_string(source.extractor.input_dim()));
    }
    fs::create_directories(out_dir);
    const AdaptOutcome outcome = run_adaptation(source, target, cfg);
    save_checkpoint((fs::path(out_dir) / "adapted.ckpt").string(), outcome.adapted);
    write_text(fs::path(out_dir) / "report.json", report_to_json(outcome.report));
    std::printf("adapted %d epochs in %.1fs", cfg.epochs_adapt, outcome.report.wall_clock_sec);
    if (outcome.report.initial_label_accuracy >= 0.0) {
        std::printf(", HOS %.1f (OS* %.1f, UNK %.1f)", outcome.report.final_metrics.hos,
                    outcome.report.final_metrics.os_star, outcome.report.final_metrics.unk);
    }
    std::printf("; wrote %s/{adapted.ckpt,report.json}\n", out_dir.c_str());
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& ckpt_path, const std::string& target_csv,
             const std::string& out_path) {
    const RunConfig cfg = resolve_config(opts);
    (void)cfg;
    const Model model = load_checkpoint(ckpt_path);
    DatasetSplit target = load_features(target_csv);
    if (target.size() == 0) throw DataError("eval: empty target file");
    for (int y : target.labels) {
        if (y < 0) throw DataError("eval: ground-truth labels required (found -1)");
    }
    const int n_shared = model.classifier.n_shared;
    const std::vector<int> pred = predict(model, target.inputs);
    const OpenSetMetrics metrics = open_set_metrics(pred, target.labels, n_shared);

    int true_private = 0;
    for (int y : target.labels) true_private = std::max(true_private, y - n_shared + 1);
    std::optional<DiscoveryMetrics> disc;
    std::optional<DiscoveryMetrics> disc_proto;
    if (true_private > 0 && model.classifier.n_private() == true_private) {
        std::vector<int> pred_private, truth_private;
        std::vector<Vec> private_feats;
        for (size_t i = 0; i < pred.size(); ++i) {
            if (target.labels[i] < n_shared) continue;
            truth_private.push_back(target.labels[i] - n_shared);
            pred_private.push_back(pred[i] >= n_shared ? pred[i] - n_shared : -1);
            private_feats.push_back(extract_features(model.extractor, target.inputs[i]));
        }
        disc = cluster_accuracy(pred_private, truth_private, true_private);
        disc_proto =
            cluster_accuracy_prototype(private_feats, pred_private, truth_private, true_private);
    }
    std::string text = metrics_to_json(metrics, disc ? &*disc : nullptr);
    if (disc && disc->cluster_acc != disc_proto->cluster_acc) {
        // The two matching modes disagree; report both.
        nlohmann::json j = nlohmann::json::parse(text);
        j["cluster_acc_prototype"] = disc_proto->cluster_acc;
        text = j.dump(2);
    }
    if (!out_path.empty()) {
        if (out_path.size() > 4 && out_path.substr(out_path.size() - 4) == ".csv") {
            write_text(out_path, metrics_csv_header() + "\n" +
                                     metrics_csv_row(metrics, disc ? &*disc : nullptr));
        } else {
            write_text(out_path, text);
        }
    }
    std::printf("%s\n", text.c_str());
    return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& axis, const std::string& ckpt_path,
              const std::string& target_csv, const std::string& out_path, int n_seeds) {
    if (n_seeds < 3) throw ConfigError("sweep: need at least 3 seeds");
    const RunConfig base = resolve_config(opts);
    const Model source = load_checkpoint(ckpt_path);
    DatasetSplit target = load_features(target_csv);

    struct Cell {
        std::string label;
        RunConfig cfg;
    };
    std::vector<Cell> cells;
    if (axis == "combiner") {
        for (const char* v : {"and", "or"}) {
            Cell c{v, base};
            c.cfg.combiner = std::string(v) == "and" ? Combiner::kAnd : Combiner::kOr;
            cells.push_back(std::move(c));
        }
    } else if (axis == "f_assignment") {
        const std::tuple<const char*, WeightFn, WeightFn> rows[] = {
            {"lin/lin", WeightFn::kLinear, WeightFn::kLinear},
            {"lin/exp", WeightFn::kLinear, WeightFn::kExponential},
            {"exp/exp", WeightFn::kExponential, WeightFn::kExponential},
            {"exp/lin", WeightFn::kExponential, WeightFn::kLinear},
        };
        for (const auto& [name, f_nc, f_cs] : rows) {
            Cell c{name, base};
            c.cfg.weight_fn_nc = f_nc;
            c.cfg.weight_fn_cs = f_cs;
            cells.push_back(std::move(c));
        }
    } else if (axis == "n_private") {
        const int ns = source.classifier.n_shared;
        for (int v : {1, std::max(1, ns / 2), ns, 2 * ns}) {
            Cell c{std::to_string(v), base};
            c.cfg.n_private_hat = v;
            cells.push_back(std::move(c));
        }
    } else {
        throw ConfigError("sweep: unknown axis '" + axis +
                          "' (expected combiner|f_assignment|n_private)");
    }

    std::ostringstream csv;
    csv << "axis,value,n_seeds,hos_mean,hos_std\n";
    for (auto& cell : cells) {
        std::vector<double> hos;
        for (int s = 0; s < n_seeds; ++s) {
            cell.cfg.seed = base.seed + static_cast<uint64_t>(s);
            const AdaptOutcome outcome = run_adaptation(source, target, cell.cfg);
            hos.push_back(outcome.report.final_metrics.hos);
            std::printf("sweep %s=%s seed=%llu -> HOS %.2f\n", axis.c_str(), cell.label.c_str(),
                        static_cast<unsigned long long>(cell.cfg.seed), hos.back());
        }
        double mean = 0.0;
        for (double h : hos) mean += h;
        mean /= hos.size();
        double var = 0.0;
        for (double h : hos) var += (h - mean) * (h - mean);
        const double stddev = hos.size() > 1 ? std::sqrt(var / (hos.size() - 1)) : 0.0;
        csv << axis << "," << cell.label << "," << n_seeds << "," << mean << "," << stddev
            << "\n";
    }
    write_text(out_path, csv.str());
    std::printf("wrote %s\n", out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Source-free open-set domain adaptation over feature vectors"};
    app.require_subcommand(1);

    CommonOpts synth_opts, pre_opts, adapt_opts, eval_opts, sweep_opts;
    std::string synth_out = "data";
    std::string pre_source, pre_out = "source.ckpt";
    std::string adapt_ckpt, adapt_target, adapt_out = "run";
    std::string eval_ckpt, eval_target, eval_out;
    std::string sweep_axis, sweep_ckpt, sweep_target, sweep_out = "sweep.csv";
    int sweep_seeds = 3;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic source/target benchmark");
    add_common(synth, synth_opts);
    synth->add_option("--out", synth_out, "Output directory");

    auto* pretrain = app.add_subcommand("pretrain", "Train the source model (cross-entropy)");
    add_common(pretrain, pre_opts);
    pretrain->add_option("--source", pre_source, "Labelled source feature CSV")->required();
    pretrain->add_option("--out", pre_out, "Output checkpoint path");

    auto* adapt = app.add_subcommand("adapt", "Adapt a source checkpoint to a target CSV");
    add_common(adapt, adapt_opts);
    adapt->add_option("--checkpoint", adapt_ckpt, "Source checkpoint")->required();
    adapt->add_option("--target", adapt_target, "Target feature CSV")->required();
    adapt->add_option("--out", adapt_out, "Output directory");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint against labelled targets");
    add_common(eval, eval_opts);
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint to evaluate")->required();
    eval->add_option("--target", eval_target, "Labelled target CSV")->required();
    eval->add_option("--out", eval_out, "Optional metrics JSON output path");

    auto* sweep = app.add_subcommand("sweep", "Run an ablation axis over several seeds");
    add_common(sweep, sweep_opts);
    sweep->add_option("--axis", sweep_axis, "combiner|f_assignment|n_private")->required();
    sweep->add_option("--checkpoint", sweep_ckpt, "Source checkpoint")->required();
    sweep->add_option("--target", sweep_target, "Target feature CSV")->required();
    sweep->add_option("--out", sweep_out, "Aggregated CSV output path");
    sweep->add_option("--seeds", sweep_seeds, "Number of seeds (>= 3)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(synth_opts, synth_out);
        if (pretrain->parsed()) return cmd_pretrain(pre_opts, pre_source, pre_out);
        if (adapt->parsed()) return cmd_adapt(adapt_opts, adapt_ckpt, adapt_target, adapt_out);
        if (eval->parsed()) return cmd_eval(eval_opts, eval_ckpt, eval_target, eval_out);
        if (sweep->parsed()) {
            return cmd_sweep(sweep_opts, sweep_axis, sweep_ckpt, sweep_target, sweep_out,
                             sweep_seeds);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const InvalidConfig& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
