#pragma once

#include <utility>

#include "osda/bank.hpp"
#include "osda/model.hpp"
#include "osda/numerics.hpp"
#include "osda/rng.hpp"

namespace osda {

struct PseudoLabelRecord {
    int sample_id = -1;
    ProbVec p_bar;
    int y_bar = -1;       // argmax of p_bar, ties to the lowest class index
    double u_nc = 0.0;    // neighbours-consensus uncertainty, in [0, 1]
    double u_cs = 0.0;    // class-separation uncertainty, in [0, 0.5]
    double w_nc = 1.0;
    double w_cs = 1.0;
    bool selected = false;
};

// Soft-voting refinement: mean of the n nearest neighbours' stored
// predictions, hard label by argmax.
std::pair<ProbVec, int> refine(const MemoryBank& bank, const Vec& z_wa, int n);

// Normalized entropy of the refined distribution.
double uncertainty_nc(const ProbVec& p_bar, int n_classes);

// Relative cosine distance of z to the prototypes of the two most probable
// classes: min(d_i, d_j) / (d_i + d_j), in [0, 0.5]. 0.5 when both
// distances vanish (maximal ambiguity by convention).
double uncertainty_cs(const Vec& z, const Classifier& classifier, const ProbVec& p_bar);

enum class WeightFn { kLinear, kExponential };

// Monotonically decreasing uncertainty -> success-probability map.
// Linear: max(1 - u, 1e-6); exponential: exp(-u). Requires u in [0, 1].
double to_weight(double u, WeightFn f);

enum class Combiner { kAnd, kOr };

// Draws b1 ~ Bernoulli(w_nc) then b2 ~ Bernoulli(w_cs) from the selection
// stream and combines them with the configured logical operator.
bool select(double w_nc, double w_cs, Combiner op, Rng& rng);

}  // namespace osda
