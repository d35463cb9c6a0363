#pragma once

#include <vector>

#include "osda/error.hpp"

namespace osda {

// Dense feature vector in R^D.
using Vec = std::vector<double>;

// Probability vector over the (extended) class space: entries >= 0, sum == 1.
using ProbVec = std::vector<double>;

double dot(const Vec& a, const Vec& b);
double norm(const Vec& a);
bool all_finite(const Vec& a);

// 1 - cos(a, b), in [0, 2]. Throws DegenerateVector on a zero-norm input.
double cosine_distance(const Vec& a, const Vec& b);

// a / ||a||. Throws DegenerateVector on a zero-norm input.
Vec l2_normalize(const Vec& a);

// Tempered softmax sigma(v / tau), stabilized by max-subtraction.
ProbVec softmax_temp(const Vec& v, double tau);

// Shannon entropy in bits divided by log2(n_classes), in [0, 1].
// Uses the 0*log(0) := 0 convention. Throws InvalidClassCount for n_classes < 2.
double normalized_entropy(const ProbVec& p, int n_classes);

// Index of the largest entry; ties broken by lowest index.
int argmax_index(const std::vector<double>& v);

}  // namespace osda
