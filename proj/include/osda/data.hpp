#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "osda/model.hpp"
#include "osda/numerics.hpp"
#include "osda/rng.hpp"

namespace osda {

// Labelled feature split. labels[i] == -1 marks a withheld label. The
// target split's ground truth is visible to evaluation only; adaptation
// consumes a label-stripped TargetInputs view.
struct DatasetSplit {
    std::vector<Vec> inputs;
    std::vector<int> labels;
    int n_shared = 0;
    int n_private = 0;

    int size() const { return static_cast<int>(inputs.size()); }
    int dim() const { return inputs.empty() ? 0 : static_cast<int>(inputs[0].size()); }
};

// Label-free view handed to the adaptation path.
struct TargetInputs {
    std::vector<Vec> inputs;

    int size() const { return static_cast<int>(inputs.size()); }
};

TargetInputs strip_labels(const DatasetSplit& split);

struct SynthConfig {
    int n_shared = 10;
    int n_private = 11;
    int input_dim = 16;
    int samples_per_class = 30;
    double center_scale = 5.0;
    double within_std = 0.75;
    // Domain shift: rotation in a random 2-plane, translation as a fraction
    // of center_scale, per-class multiplicative jitter.
    double rotation_deg = 30.0;
    double translation = 0.5;
    double jitter_lo = 0.9;
    double jitter_hi = 1.1;
    uint64_t seed = 42;
};

// Class centers on a scaled sphere; source = Gaussian clouds around the
// shared-class centers, target = clouds around all centers pushed through
// the shift transform. Deterministic per seed.
std::pair<DatasetSplit, DatasetSplit> generate_synthetic(const SynthConfig& cfg);

// Additive Gaussian noise.
Vec weak_aug(const Vec& x, double sigma, Rng& rng);

// Additive Gaussian noise plus random coordinate masking.
Vec strong_aug(const Vec& x, double sigma, double mask_prob, Rng& rng);

// RMS coordinate magnitude, used to scale the augmentation sigmas.
double input_scale(const std::vector<Vec>& inputs);

// Minibatch SGD on the mean cross-entropy; returns final mean loss.
double pretrain_source(Model& model, const DatasetSplit& source, int epochs, double lr,
                       double weight_decay, int batch_size, Rng& rng);

// Feature CSV: header "label,f0,...,f{d-1}", one row per sample, ASCII,
// '.' decimal separator, no quoting; label -1 marks an unlabelled sample.
DatasetSplit load_features(const std::string& path);
void save_features(const std::string& path, const DatasetSplit& split);

}  // namespace osda
