#include "osda/data.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "osda/error.hpp"
#include "osda/losses.hpp"

namespace osda {

TargetInputs strip_labels(const DatasetSplit& split) {
    TargetInputs t;
    t.inputs = split.inputs;
    return t;
}

namespace {

Vec random_unit(int dim, Rng& rng) {
    Vec v(dim);
    double n = 0.0;
    while (n == 0.0) {
        for (double& x : v) x = rng.gaussian();
        n = norm(v);
    }
    for (double& x : v) x /= n;
    return v;
}

void validate(const SynthConfig& cfg) {
    if (cfg.n_shared < 2) throw InvalidConfig("synth: n_shared must be >= 2");
    if (cfg.n_private < 0) throw InvalidConfig("synth: n_private must be >= 0");
    if (cfg.input_dim < 2) throw InvalidConfig("synth: input_dim must be >= 2");
    if (cfg.samples_per_class < 1) throw InvalidConfig("synth: samples_per_class must be >= 1");
    if (!(cfg.center_scale > 0.0)) throw InvalidConfig("synth: center_scale must be > 0");
    if (cfg.within_std < 0.0) throw InvalidConfig("synth: within_std must be >= 0");
    if (cfg.jitter_lo > cfg.jitter_hi) throw InvalidConfig("synth: jitter_lo > jitter_hi");
}

}  // namespace

std::pair<DatasetSplit, DatasetSplit> generate_synthetic(const SynthConfig& cfg) {
    validate(cfg);
    Rng rng(cfg.seed, Stream::kDataGen);
    const int n_total = cfg.n_shared + cfg.n_private;

    // Class centers on the sphere of radius center_scale, kept apart by
    // rejection so no two centers collapse onto each other. The rejection
    // gives up gracefully when the dimension is too low to keep the margin.
    std::vector<Vec> centers;
    int attempts = 0;
    while (static_cast<int>(centers.size()) < n_total) {
        Vec c = random_unit(cfg.input_dim, rng);
        for (double& x : c) x *= cfg.center_scale;
        bool ok = true;
        if (attempts++ < 200 * n_total) {
            for (const auto& prev : centers) {
                if (cosine_distance(c, prev) < 0.15) {
                    ok = false;
                    break;
                }
            }
        }
        if (ok) centers.push_back(std::move(c));
    }

    // Shift transform: rotation by rotation_deg in the plane of two random
    // orthonormal directions, plus a random translation.
    Vec e1 = random_unit(cfg.input_dim, rng);
    Vec e2 = random_unit(cfg.input_dim, rng);
    const double proj = dot(e2, e1);
    for (size_t i = 0; i < e2.size(); ++i) e2[i] -= proj * e1[i];
    e2 = l2_normalize(e2);
    const double theta = cfg.rotation_deg * std::numbers::pi / 180.0;
    Vec t_vec = random_unit(cfg.input_dim, rng);
    for (double& x : t_vec) x *= cfg.translation * cfg.center_scale;
    std::vector<double> jitter(n_total);
    for (double& j : jitter) j = rng.uniform(cfg.jitter_lo, cfg.jitter_hi);

    auto rotate = [&](const Vec& v) {
        const double a = dot(v, e1);
        const double b = dot(v, e2);
        const double ra = a * std::cos(theta) - b * std::sin(theta);
        const double rb = a * std::sin(theta) + b * std::cos(theta);
        Vec out = v;
        for (size_t i = 0; i < v.size(); ++i) {
            out[i] += (ra - a) * e1[i] + (rb - b) * e2[i];
        }
        return out;
    };
    auto shift_center = [&](const Vec& c, int cls) {
        Vec scaled = c;
        for (double& x : scaled) x *= jitter[cls];
        Vec r = rotate(scaled);
        for (size_t i = 0; i < r.size(); ++i) r[i] += t_vec[i];
        return r;
    };

    DatasetSplit source, target;
    source.n_shared = cfg.n_shared;
    source.n_private = 0;
    target.n_shared = cfg.n_shared;
    target.n_private = cfg.n_private;

    for (int cls = 0; cls < cfg.n_shared; ++cls) {
        for (int s = 0; s < cfg.samples_per_class; ++s) {
            Vec x = centers[cls];
            for (double& xi : x) xi += cfg.within_std * rng.gaussian();
            source.inputs.push_back(std::move(x));
            source.labels.push_back(cls);
        }
    }
    for (int cls = 0; cls < n_total; ++cls) {
        const Vec shifted = shift_center(centers[cls], cls);
        for (int s = 0; s < cfg.samples_per_class; ++s) {
            Vec x = shifted;
            for (double& xi : x) xi += cfg.within_std * rng.gaussian();
            target.inputs.push_back(std::move(x));
            target.labels.push_back(cls);
        }
    }
    return {std::move(source), std::move(target)};
}

Vec weak_aug(const Vec& x, double sigma, Rng& rng) {
    Vec out = x;
    for (double& v : out) v += sigma * rng.gaussian();
    return out;
}

Vec strong_aug(const Vec& x, double sigma, double mask_prob, Rng& rng) {
    Vec out = x;
    for (double& v : out) {
        v += sigma * rng.gaussian();
        if (rng.bernoulli(mask_prob)) v = 0.0;
    }
    return out;
}

double input_scale(const std::vector<Vec>& inputs) {
    double sum_sq = 0.0;
    size_t count = 0;
    for (const auto& x : inputs) {
        for (double v : x) sum_sq += v * v;
        count += x.size();
    }
    return count == 0 ? 1.0 : std::sqrt(sum_sq / static_cast<double>(count));
}

double pretrain_source(Model& model, const DatasetSplit& source, int epochs, double lr,
                       double weight_decay, int batch_size, Rng& rng) {
    if (source.size() == 0) throw DataError("pretrain_source: empty source split");
    for (int y : source.labels) {
        if (y < 0 || y >= model.classifier.n_shared) {
            throw DataError("pretrain_source: label " + std::to_string(y) +
                            " outside [0, n_shared)");
        }
    }
    double mean_loss = 0.0;
    std::vector<int> order(source.size());
    for (int i = 0; i < source.size(); ++i) order[i] = i;

    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (int start = 0; start < source.size(); start += batch_size) {
            const int end = std::min(start + batch_size, source.size());
            ModelGrads grads = make_zero_grads(model);
            for (int bi = start; bi < end; ++bi) {
                const int i = order[bi];
                ForwardCache cache;
                const ForwardResult r = forward(model, source.inputs[i], &cache);
                const CeResult ce = cross_entropy_loss(r.p, source.labels[i]);
                epoch_loss += ce.loss;
                Vec dlogits = ce.dlogits;
                const double scale = 1.0 / static_cast<double>(end - start);
                for (double& d : dlogits) d *= scale;
                accumulate_backward(model, cache, &dlogits, nullptr, grads);
            }
            sgd_step(model, grads, lr, weight_decay);
        }
        mean_loss = epoch_loss / source.size();
        if (!std::isfinite(mean_loss)) {
            throw NonFiniteGradient("pretrain_source: non-finite loss at epoch " +
                                    std::to_string(e));
        }
    }
    return mean_loss;
}

DatasetSplit load_features(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("load_features: cannot open " + path);
    DatasetSplit split;
    std::string line;
    int line_no = 0;
    int dim = -1;
    while (std::getline(is, line)) {
        line_no++;
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line.rfind("label,", 0) != 0 && line != "label") {
                throw ParseError("load_features: line 1: expected header starting with 'label,'");
            }
            continue;
        }
        std::vector<double> row;
        size_t pos = 0;
        while (pos <= line.size()) {
            const size_t comma = line.find(',', pos);
            const std::string tok =
                line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            try {
                size_t used = 0;
                row.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ParseError("load_features: line " + std::to_string(line_no) +
                                 ": bad value '" + tok + "'");
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (row.size() < 2) {
            throw ParseError("load_features: line " + std::to_string(line_no) +
                             ": expected label plus at least one feature");
        }
        const double label_raw = row[0];
        const int label = static_cast<int>(label_raw);
        if (label != label_raw || label < -1) {
            throw ParseError("load_features: line " + std::to_string(line_no) +
                             ": label must be an integer >= -1");
        }
        if (dim < 0) dim = static_cast<int>(row.size()) - 1;
        if (static_cast<int>(row.size()) - 1 != dim) {
            throw ShapeError("load_features: line " + std::to_string(line_no) + ": expected " +
                             std::to_string(dim) + " features, got " +
                             std::to_string(row.size() - 1));
        }
        split.labels.push_back(label);
        split.inputs.emplace_back(row.begin() + 1, row.end());
    }
    return split;
}

void save_features(const std::string& path, const DatasetSplit& split) {
    std::ofstream os(path);
    if (!os) throw DataError("save_features: cannot open " + path);
    os << "label";
    for (int d = 0; d < split.dim(); ++d) os << ",f" << d;
    os << "\n";
    char buf[64];
    for (int i = 0; i < split.size(); ++i) {
        os << split.labels[i];
        for (double v : split.inputs[i]) {
            // %.17g round-trips doubles exactly.
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            os << ',' << buf;
        }
        os << "\n";
    }
    if (!os) throw DataError("save_features: write failed for " + path);
}

}  // namespace osda
