#include "osda/model.hpp"

#include <cmath>

#include "osda/error.hpp"

namespace osda {

namespace {

double activate(double x, Activation a) {
    switch (a) {
        case Activation::kIdentity:
            return x;
        case Activation::kTanh:
            return std::tanh(x);
    }
    return x;
}

// Derivative expressed through the pre-activation value.
double activate_grad(double pre, Activation a) {
    switch (a) {
        case Activation::kIdentity:
            return 1.0;
        case Activation::kTanh: {
            const double t = std::tanh(pre);
            return 1.0 - t * t;
        }
    }
    return 1.0;
}

DenseLayer make_layer(int in, int out, Activation act, Rng& rng) {
    DenseLayer l;
    l.act = act;
    const double a = 1.0 / std::sqrt(static_cast<double>(in));
    l.weight.assign(out, Vec(in));
    for (auto& row : l.weight) {
        for (double& w : row) w = rng.uniform(-a, a);
    }
    l.bias.assign(out, 0.0);
    return l;
}

}  // namespace

FeatureExtractor make_extractor(int input_dim, const std::vector<int>& hidden_dims,
                                int output_dim, Rng& rng) {
    if (input_dim < 1 || output_dim < 1) {
        throw InvalidConfig("make_extractor: dimensions must be positive");
    }
    FeatureExtractor fx;
    int in = input_dim;
    for (int h : hidden_dims) {
        fx.layers.push_back(make_layer(in, h, Activation::kTanh, rng));
        in = h;
    }
    fx.layers.push_back(make_layer(in, output_dim, Activation::kIdentity, rng));
    return fx;
}

Classifier make_classifier(int feature_dim, int n_shared, Rng& rng) {
    if (n_shared < 1) throw InvalidClassCount("make_classifier: n_shared must be >= 1");
    Classifier c;
    c.feature_dim = feature_dim;
    c.n_shared = n_shared;
    const double a = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    c.columns.assign(n_shared, Vec(feature_dim));
    for (auto& col : c.columns) {
        for (double& w : col) w = rng.uniform(-a, a);
    }
    return c;
}

Vec extract_features(const FeatureExtractor& fx, const Vec& x, ForwardCache* cache) {
    if (static_cast<int>(x.size()) != fx.input_dim()) {
        throw ShapeError("extract_features: input dim " + std::to_string(x.size()) +
                         " != extractor dim " + std::to_string(fx.input_dim()));
    }
    if (cache) {
        cache->input = x;
        cache->pre_act.clear();
        cache->post_act.clear();
    }
    Vec cur = x;
    for (const auto& layer : fx.layers) {
        Vec pre(layer.out_dim());
        for (int o = 0; o < layer.out_dim(); ++o) {
            pre[o] = layer.bias[o] + dot(layer.weight[o], cur);
        }
        Vec post(pre.size());
        for (size_t i = 0; i < pre.size(); ++i) post[i] = activate(pre[i], layer.act);
        if (cache) {
            cache->pre_act.push_back(pre);
            cache->post_act.push_back(post);
        }
        cur = std::move(post);
    }
    return cur;
}

ForwardResult forward(const Model& m, const Vec& x, ForwardCache* cache) {
    ForwardResult r;
    r.z = extract_features(m.extractor, x, cache);
    if (static_cast<int>(r.z.size()) != m.classifier.feature_dim) {
        throw ShapeError("forward: feature dim mismatch with classifier");
    }
    r.logits.resize(m.classifier.n_classes());
    for (int c = 0; c < m.classifier.n_classes(); ++c) {
        r.logits[c] = dot(m.classifier.columns[c], r.z);
    }
    r.p = softmax_temp(r.logits, 1.0);
    return r;
}

Classifier extend_classifier(const Classifier& c, int n_private, Rng& rng) {
    if (n_private < 1) {
        throw InvalidClassCount("extend_classifier: n_private must be >= 1");
    }
    Classifier out = c;
    const double a = 1.0 / std::sqrt(static_cast<double>(c.feature_dim));
    for (int k = 0; k < n_private; ++k) {
        Vec col(c.feature_dim);
        for (double& w : col) w = rng.uniform(-a, a);
        out.columns.push_back(std::move(col));
    }
    return out;
}

void set_private_prototypes(Classifier& c, const std::vector<Vec>& protos) {
    if (static_cast<int>(protos.size()) != c.n_private()) {
        throw ShapeError("set_private_prototypes: expected " + std::to_string(c.n_private()) +
                         " prototypes, got " + std::to_string(protos.size()));
    }
    for (const auto& p : protos) {
        if (static_cast<int>(p.size()) != c.feature_dim) {
            throw ShapeError("set_private_prototypes: prototype dim mismatch");
        }
        if (norm(p) == 0.0) throw DegenerateVector("set_private_prototypes: zero prototype");
    }
    for (size_t k = 0; k < protos.size(); ++k) {
        c.columns[c.n_shared + static_cast<int>(k)] = protos[k];
    }
}

ModelGrads make_zero_grads(const Model& m) {
    ModelGrads g;
    g.layers.resize(m.extractor.layers.size());
    for (size_t i = 0; i < m.extractor.layers.size(); ++i) {
        const auto& l = m.extractor.layers[i];
        g.layers[i].weight.assign(l.out_dim(), Vec(l.in_dim(), 0.0));
        g.layers[i].bias.assign(l.out_dim(), 0.0);
    }
    g.columns.assign(m.classifier.n_classes(), Vec(m.classifier.feature_dim, 0.0));
    return g;
}

void scale_grads(ModelGrads& g, double s) {
    for (auto& l : g.layers) {
        for (auto& row : l.weight) {
            for (double& x : row) x *= s;
        }
        for (double& x : l.bias) x *= s;
    }
    for (auto& col : g.columns) {
        for (double& x : col) x *= s;
    }
}

void add_grads(ModelGrads& dst, const ModelGrads& src, double s) {
    for (size_t i = 0; i < dst.layers.size(); ++i) {
        for (size_t o = 0; o < dst.layers[i].weight.size(); ++o) {
            for (size_t j = 0; j < dst.layers[i].weight[o].size(); ++j) {
                dst.layers[i].weight[o][j] += s * src.layers[i].weight[o][j];
            }
            dst.layers[i].bias[o] += s * src.layers[i].bias[o];
        }
    }
    for (size_t c = 0; c < dst.columns.size(); ++c) {
        for (size_t j = 0; j < dst.columns[c].size(); ++j) {
            dst.columns[c][j] += s * src.columns[c][j];
        }
    }
}

void accumulate_backward(const Model& m, const ForwardCache& cache, const Vec* dlogits,
                         const Vec* dz_extra, ModelGrads& grads) {
    const Vec& z = cache.post_act.back();
    Vec dz(z.size(), 0.0);
    if (dlogits) {
        if (dlogits->size() != static_cast<size_t>(m.classifier.n_classes())) {
            throw ShapeError("accumulate_backward: dlogits size mismatch");
        }
        // logits_c = col_c . z  =>  dcol_c += dlogit_c * z,  dz += dlogit_c * col_c
        for (int c = 0; c < m.classifier.n_classes(); ++c) {
            const double dl = (*dlogits)[c];
            if (dl == 0.0) continue;
            const Vec& col = m.classifier.columns[c];
            for (size_t j = 0; j < z.size(); ++j) {
                grads.columns[c][j] += dl * z[j];
                dz[j] += dl * col[j];
            }
        }
    }
    if (dz_extra) {
        if (dz_extra->size() != dz.size()) {
            throw ShapeError("accumulate_backward: dz_extra size mismatch");
        }
        for (size_t j = 0; j < dz.size(); ++j) dz[j] += (*dz_extra)[j];
    }

    // Walk the extractor backwards.
    Vec delta = std::move(dz);
    for (int li = static_cast<int>(m.extractor.layers.size()) - 1; li >= 0; --li) {
        const auto& layer = m.extractor.layers[li];
        const Vec& pre = cache.pre_act[li];
        const Vec& below = (li == 0) ? cache.input : cache.post_act[li - 1];
        Vec dpre(layer.out_dim());
        for (int o = 0; o < layer.out_dim(); ++o) {
            dpre[o] = delta[o] * activate_grad(pre[o], layer.act);
        }
        Vec dbelow(layer.in_dim(), 0.0);
        for (int o = 0; o < layer.out_dim(); ++o) {
            const double d = dpre[o];
            grads.layers[li].bias[o] += d;
            if (d == 0.0) continue;
            auto& wrow = grads.layers[li].weight[o];
            const auto& row = layer.weight[o];
            for (int j = 0; j < layer.in_dim(); ++j) {
                wrow[j] += d * below[j];
                dbelow[j] += d * row[j];
            }
        }
        delta = std::move(dbelow);
    }
}

void sgd_step(Model& m, const ModelGrads& g, double lr, double weight_decay) {
    const Vec flat = flatten_grads(g);
    if (!all_finite(flat)) {
        throw NonFiniteGradient("sgd_step: non-finite gradient, step aborted");
    }
    for (size_t i = 0; i < m.extractor.layers.size(); ++i) {
        auto& l = m.extractor.layers[i];
        for (int o = 0; o < l.out_dim(); ++o) {
            for (int j = 0; j < l.in_dim(); ++j) {
                l.weight[o][j] -= lr * (g.layers[i].weight[o][j] + weight_decay * l.weight[o][j]);
            }
            l.bias[o] -= lr * (g.layers[i].bias[o] + weight_decay * l.bias[o]);
        }
    }
    for (int c = 0; c < m.classifier.n_classes(); ++c) {
        for (int j = 0; j < m.classifier.feature_dim; ++j) {
            m.classifier.columns[c][j] -=
                lr * (g.columns[c][j] + weight_decay * m.classifier.columns[c][j]);
        }
    }
}

void ema_update(MomentumModel& mm, const Model& live) {
    const double m1 = mm.momentum;
    const double m2 = 1.0 - m1;
    if (mm.shadow.extractor.layers.size() != live.extractor.layers.size() ||
        mm.shadow.classifier.n_classes() != live.classifier.n_classes()) {
        throw ShapeError("ema_update: shadow/live shape mismatch");
    }
    for (size_t i = 0; i < live.extractor.layers.size(); ++i) {
        auto& s = mm.shadow.extractor.layers[i];
        const auto& l = live.extractor.layers[i];
        if (s.out_dim() != l.out_dim() || s.in_dim() != l.in_dim()) {
            throw ShapeError("ema_update: layer shape mismatch");
        }
        for (int o = 0; o < l.out_dim(); ++o) {
            for (int j = 0; j < l.in_dim(); ++j) {
                s.weight[o][j] = m1 * s.weight[o][j] + m2 * l.weight[o][j];
            }
            s.bias[o] = m1 * s.bias[o] + m2 * l.bias[o];
        }
    }
    for (int c = 0; c < live.classifier.n_classes(); ++c) {
        for (int j = 0; j < live.classifier.feature_dim; ++j) {
            mm.shadow.classifier.columns[c][j] =
                m1 * mm.shadow.classifier.columns[c][j] + m2 * live.classifier.columns[c][j];
        }
    }
}

Vec flatten_params(const Model& m) {
    Vec out;
    for (const auto& l : m.extractor.layers) {
        for (const auto& row : l.weight) out.insert(out.end(), row.begin(), row.end());
        out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
    for (const auto& col : m.classifier.columns) {
        out.insert(out.end(), col.begin(), col.end());
    }
    return out;
}

void unflatten_params(Model& m, const Vec& theta) {
    size_t k = 0;
    for (auto& l : m.extractor.layers) {
        for (auto& row : l.weight) {
            for (double& w : row) w = theta.at(k++);
        }
        for (double& b : l.bias) b = theta.at(k++);
    }
    for (auto& col : m.classifier.columns) {
        for (double& w : col) w = theta.at(k++);
    }
    if (k != theta.size()) throw ShapeError("unflatten_params: size mismatch");
}

Vec flatten_grads(const ModelGrads& g) {
    Vec out;
    for (const auto& l : g.layers) {
        for (const auto& row : l.weight) out.insert(out.end(), row.begin(), row.end());
        out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
    for (const auto& col : g.columns) {
        out.insert(out.end(), col.begin(), col.end());
    }
    return out;
}

}  // namespace osda
