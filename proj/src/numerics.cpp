#include "osda/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace osda {

double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot: size mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

bool all_finite(const Vec& a) {
    for (double x : a) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

double cosine_distance(const Vec& a, const Vec& b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) {
        throw DegenerateVector("cosine_distance: zero-norm input");
    }
    double c = dot(a, b) / (na * nb);
    c = std::clamp(c, -1.0, 1.0);
    return 1.0 - c;
}

Vec l2_normalize(const Vec& a) {
    const double n = norm(a);
    if (n == 0.0) throw DegenerateVector("l2_normalize: zero-norm input");
    Vec out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] / n;
    return out;
}

ProbVec softmax_temp(const Vec& v, double tau) {
    if (v.empty()) throw ShapeError("softmax_temp: empty input");
    if (!(tau > 0.0)) throw InvalidConfig("softmax_temp: tau must be > 0");
    const double m = *std::max_element(v.begin(), v.end());
    ProbVec p(v.size());
    double sum = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
        p[i] = std::exp((v[i] - m) / tau);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

double normalized_entropy(const ProbVec& p, int n_classes) {
    if (n_classes < 2) {
        throw InvalidClassCount("normalized_entropy: need at least 2 classes");
    }
    double h = 0.0;
    for (double x : p) {
        if (x > 0.0) h -= x * std::log2(x);
    }
    return h / std::log2(static_cast<double>(n_classes));
}

int argmax_index(const std::vector<double>& v) {
    if (v.empty()) throw ShapeError("argmax_index: empty input");
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

}  // namespace osda
