#include "osda/pseudo.hpp"

#include <algorithm>
#include <cmath>

#include "osda/error.hpp"

namespace osda {

std::pair<ProbVec, int> refine(const MemoryBank& bank, const Vec& z_wa, int n) {
    if (n < 1) throw InvalidConfig("refine: n must be >= 1");
    const auto nbrs = neighbors(bank, z_wa, n);
    ProbVec p_bar(nbrs[0].second.size(), 0.0);
    for (const auto& [id, p] : nbrs) {
        for (size_t c = 0; c < p_bar.size(); ++c) p_bar[c] += p[c];
    }
    for (double& x : p_bar) x /= static_cast<double>(n);
    return {p_bar, argmax_index(p_bar)};
}

double uncertainty_nc(const ProbVec& p_bar, int n_classes) {
    return normalized_entropy(p_bar, n_classes);
}

double uncertainty_cs(const Vec& z, const Classifier& classifier, const ProbVec& p_bar) {
    if (p_bar.size() != static_cast<size_t>(classifier.n_classes()) || p_bar.size() < 2) {
        throw ShapeError("uncertainty_cs: p_bar/classifier size mismatch");
    }
    // Indices of the two largest refined probabilities, ties to lower index.
    int i = argmax_index(p_bar);
    int j = -1;
    for (int c = 0; c < static_cast<int>(p_bar.size()); ++c) {
        if (c == i) continue;
        if (j < 0 || p_bar[c] > p_bar[j]) j = c;
    }
    const double d_i = cosine_distance(z, classifier.columns[i]);
    const double d_j = cosine_distance(z, classifier.columns[j]);
    const double total = d_i + d_j;
    if (total == 0.0) return 0.5;
    return std::min(d_i, d_j) / total;
}

double to_weight(double u, WeightFn f) {
    if (u < 0.0 || u > 1.0 || !std::isfinite(u)) {
        throw InvalidUncertainty("to_weight: u = " + std::to_string(u) + " outside [0, 1]");
    }
    switch (f) {
        case WeightFn::kLinear:
            return std::max(1.0 - u, 1e-6);
        case WeightFn::kExponential:
            return std::exp(-u);
    }
    return 1.0;
}

bool select(double w_nc, double w_cs, Combiner op, Rng& rng) {
    const bool b1 = rng.bernoulli(w_nc);
    const bool b2 = rng.bernoulli(w_cs);
    return op == Combiner::kAnd ? (b1 && b2) : (b1 || b2);
}

}  // namespace osda
