#pragma once

#include <vector>

#include "osda/numerics.hpp"
#include "osda/rng.hpp"

namespace osda {

enum class Activation { kIdentity, kTanh };

// Fully connected layer, weight stored row-major: weight[out][in].
struct DenseLayer {
    std::vector<Vec> weight;
    Vec bias;
    Activation act = Activation::kTanh;

    int in_dim() const { return weight.empty() ? 0 : static_cast<int>(weight[0].size()); }
    int out_dim() const { return static_cast<int>(weight.size()); }
};

// Small dense feature extractor phi: R^in -> R^D. Architecture is fixed at
// construction; only parameter values change afterwards.
struct FeatureExtractor {
    std::vector<DenseLayer> layers;

    int input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
    int output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
};

// Builds in -> hidden x n -> out with tanh on hidden layers and identity
// output, weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero bias.
FeatureExtractor make_extractor(int input_dim, const std::vector<int>& hidden_dims,
                                int output_dim, Rng& rng);

// Linear classifier without bias. Column i is the prototype of class i; the
// first n_shared columns are the source classes, the rest the extended
// private classes.
struct Classifier {
    std::vector<Vec> columns;  // each of length feature_dim
    int n_shared = 0;
    int feature_dim = 0;

    int n_classes() const { return static_cast<int>(columns.size()); }
    int n_private() const { return n_classes() - n_shared; }
};

Classifier make_classifier(int feature_dim, int n_shared, Rng& rng);

struct Model {
    FeatureExtractor extractor;
    Classifier classifier;
};

// Per-layer pre-activations and activations kept from a forward pass so the
// backward pass can be evaluated without recomputation.
struct ForwardCache {
    Vec input;
    std::vector<Vec> pre_act;   // one per layer
    std::vector<Vec> post_act;  // one per layer; back() is the feature z
};

struct ForwardResult {
    Vec z;
    Vec logits;
    ProbVec p;
};

Vec extract_features(const FeatureExtractor& fx, const Vec& x, ForwardCache* cache = nullptr);

// z = phi(x); logits = W_T^T z; p = softmax(logits).
ForwardResult forward(const Model& m, const Vec& x, ForwardCache* cache = nullptr);

// Appends n_private columns drawn i.i.d. U(-a, a), a = 1/sqrt(D). The
// existing columns are copied bit-for-bit.
Classifier extend_classifier(const Classifier& c, int n_private, Rng& rng);

// Overwrites the private columns with the given prototypes. Shared columns
// are untouched. Zero-norm prototypes are rejected.
void set_private_prototypes(Classifier& c, const std::vector<Vec>& protos);

// Gradient accumulator with the same shapes as the model parameters.
struct LayerGrads {
    std::vector<Vec> weight;
    Vec bias;
};

struct ModelGrads {
    std::vector<LayerGrads> layers;
    std::vector<Vec> columns;
};

ModelGrads make_zero_grads(const Model& m);
void scale_grads(ModelGrads& g, double s);
void add_grads(ModelGrads& dst, const ModelGrads& src, double s = 1.0);

// Backpropagates one sample's upstream gradients into `grads`.
// `dlogits` (may be null) is dLoss/dlogits; `dz_extra` (may be null) is an
// additional dLoss/dz entering directly at the feature output, e.g. from a
// contrastive term on the embedding.
void accumulate_backward(const Model& m, const ForwardCache& cache, const Vec* dlogits,
                         const Vec* dz_extra, ModelGrads& grads);

// theta <- theta - lr * (g + weight_decay * theta).
// Throws NonFiniteGradient before touching any parameter if a gradient entry
// is not finite.
void sgd_step(Model& m, const ModelGrads& g, double lr, double weight_decay);

// EMA twin of the live model: every shadow parameter tracks
// theta' <- momentum * theta' + (1 - momentum) * theta.
struct MomentumModel {
    Model shadow;
    double momentum = 0.999;
};

void ema_update(MomentumModel& mm, const Model& live);

// Flat parameter access, used by finite-difference checks and checkpointing.
Vec flatten_params(const Model& m);
void unflatten_params(Model& m, const Vec& theta);
Vec flatten_grads(const ModelGrads& g);

}  // namespace osda
