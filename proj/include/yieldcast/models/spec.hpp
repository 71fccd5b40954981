#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "yieldcast/core/error.hpp"
#include "yieldcast/core/text.hpp"

namespace yieldcast::models {

enum class Family { dummy, linear, ridge, omp, knn, tree, forest, extra_trees, gbm };

inline constexpr Family all_families[] = {Family::dummy, Family::linear, Family::ridge,       Family::omp, Family::knn,
                                          Family::tree,  Family::forest, Family::extra_trees, Family::gbm};

inline std::string_view family_name(Family f) {
    switch (f) {
    case Family::dummy: return "dummy";
    case Family::linear: return "linear";
    case Family::ridge: return "ridge";
    case Family::omp: return "omp";
    case Family::knn: return "knn";
    case Family::tree: return "tree";
    case Family::forest: return "forest";
    case Family::extra_trees: return "extra_trees";
    case Family::gbm: return "gbm";
    }
    return "?";
}

inline Family parse_family(std::string_view s) {
    for (Family f : all_families)
        if (family_name(f) == s) return f;
    throw ConfigError("unknown model family '" + std::string(s) + "'");
}

inline bool is_tree_family(Family f) {
    return f == Family::tree || f == Family::forest || f == Family::extra_trees || f == Family::gbm;
}

/// Model family plus hyperparameters. Unset optionals take the family default
/// (see `resolved()`):
///
///   forest, extra_trees: 200 trees, min_samples_leaf 2, ceil(M/3) features per split,
///                        bootstrap on for forest and off for extra_trees
///   gbm:                 300 trees, depth 3, learning_rate 0.1, min_samples_leaf 1
///   tree:                unlimited depth, min_samples_leaf 1, all features
///   knn: k = 5    ridge: alpha = 1.0    omp: n_nonzero = 10
struct ModelSpec {
    std::string name; ///< leaderboard label; defaults to the family name
    Family family = Family::dummy;

    double alpha = 1.0;
    std::size_t n_nonzero = 10;
    std::size_t k = 5;
    std::optional<std::size_t> n_trees;
    std::optional<std::size_t> max_depth; ///< 0 = unlimited
    std::optional<std::size_t> min_samples_leaf;
    std::optional<std::size_t> max_features; ///< 0 = all features
    std::optional<bool> bootstrap;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
    std::size_t threads = 0; ///< 0 = hardware concurrency; does not affect results

    std::string label() const { return name.empty() ? std::string(family_name(family)) : name; }

    /// Hyperparameters as one `key value` line; unset optionals print as 0.
    std::string params_line() const {
        return "alpha " + format_double(alpha) + " n_nonzero " + std::to_string(n_nonzero) + " k " + std::to_string(k) +
               " n_trees " + std::to_string(n_trees.value_or(0)) + " max_depth " + std::to_string(max_depth.value_or(0)) +
               " min_samples_leaf " + std::to_string(min_samples_leaf.value_or(0)) + " max_features " +
               std::to_string(max_features.value_or(0)) + " bootstrap " + (bootstrap.value_or(false) ? "1" : "0") +
               " learning_rate " + format_double(learning_rate);
    }

    /// Copy with every optional filled in for `n_features` inputs.
    ModelSpec resolved(std::size_t n_features) const {
        ModelSpec s = *this;
        const bool ensemble = family == Family::forest || family == Family::extra_trees;
        if (!s.n_trees) s.n_trees = family == Family::gbm ? 300 : ensemble ? 200 : 1;
        if (!s.max_depth) s.max_depth = family == Family::gbm ? 3 : 0;
        if (!s.min_samples_leaf) s.min_samples_leaf = ensemble ? 2 : 1;
        if (!s.max_features) s.max_features = ensemble ? (n_features + 2) / 3 : 0;
        if (!s.bootstrap) s.bootstrap = family == Family::forest;
        return s;
    }

    void validate() const {
        if (!(alpha >= 0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
        if (k < 1) throw ConfigError("k must be >= 1");
        if (n_nonzero < 1) throw ConfigError("n_nonzero must be >= 1");
        if (n_trees && *n_trees < 1) throw ConfigError("n_trees must be >= 1");
        if (min_samples_leaf && *min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
        if (!(learning_rate > 0 && learning_rate <= 1)) throw ConfigError("learning_rate must be in (0, 1]");
    }
};

} // namespace yieldcast::models
