#pragma once

// Small synthetic regression problems shared by the explain tests and the
// acceptance binary.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "yieldcast/core/feature_matrix.hpp"
#include "yieldcast/models/spec.hpp"

namespace fixture {

inline std::vector<std::string> names(std::size_t m) {
    std::vector<std::string> n;
    for (std::size_t j = 0; j < m; ++j) n.push_back("x" + std::to_string(j));
    return n;
}

inline yieldcast::FeatureMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    yieldcast::FeatureMatrix X(names(cols), rows);
    for (std::size_t i = 0; i < rows; ++i)
        for (auto& v : X.row(i)) v = nd(gen);
    return X;
}

/// Nonlinear target touching the first three columns, plus noise.
inline std::vector<double> target(const yieldcast::FeatureMatrix& X, double noise, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, noise);
    std::vector<double> y(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const auto x = X.row(i);
        y[i] = 2.0 + 1.5 * x[0] + (x[1] > 0 ? 1.0 : -1.0) + 0.5 * x[0] * x[2] + nd(gen);
    }
    return y;
}

/// Small ensembles keep exhaustive attribution cheap.
inline yieldcast::models::ModelSpec small_spec(yieldcast::models::Family f, std::uint64_t seed = 7) {
    using yieldcast::models::Family;
    yieldcast::models::ModelSpec s;
    s.family = f;
    s.seed = seed;
    if (f == Family::forest || f == Family::extra_trees) s.n_trees = 20;
    if (f == Family::gbm) s.n_trees = 40;
    if (f == Family::omp) s.n_nonzero = 4;
    return s;
}

} // namespace fixture
