#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "yieldcast/core/feature_matrix.hpp"
#include "yieldcast/core/parallel.hpp"
#include "yieldcast/core/rng.hpp"
#include "yieldcast/models/regressor.hpp"
#include "yieldcast/models/tree.hpp"

namespace yieldcast::models {

/// Stream ids for derive_seed, so each consumer of the root seed is independent.
namespace seed_stream {
inline constexpr std::uint64_t tree = 1;
inline constexpr std::uint64_t forest_tree = 2;
inline constexpr std::uint64_t shap_permutation = 3;
inline constexpr std::uint64_t background = 4;
} // namespace seed_stream

/// Average of independently grown trees. Covers random forests (bootstrap rows,
/// random feature subset per split) and extra trees (all rows, random feature
/// subset and random thresholds).
class ForestRegressor final : public Regressor {
public:
    ForestRegressor(Family family, std::vector<RegressionTree> trees) : family_(family), trees_(std::move(trees)) {}

    /// Tree t uses its own generator seeded with derive_seed(seed, forest_tree, t),
    /// so the forest is identical whatever the thread count.
    static ForestRegressor fit(Family family, const FeatureMatrix& X, std::span<const double> y, std::size_t n_trees,
                               const TreeParams& params, bool bootstrap, std::uint64_t seed, std::size_t threads) {
        const TrainingData data(X);
        std::vector<RegressionTree> trees(n_trees);
        parallel_for(
            n_trees,
            [&](std::size_t t) {
                Rng rng(derive_seed(seed, seed_stream::forest_tree, t));
                std::vector<std::uint32_t> samples(X.rows());
                if (bootstrap)
                    for (auto& s : samples) s = static_cast<std::uint32_t>(rng.below(X.rows()));
                else
                    samples = all_samples(X.rows());
                trees[t] = grow_tree(data, y, samples, params, rng);
            },
            threads);
        return ForestRegressor(family, std::move(trees));
    }

    Family family() const override { return family_; }

    double predict_row(std::span<const double> x) const override {
        double s = 0.0;
        for (const auto& t : trees_) s += t.predict(x);
        return s / static_cast<double>(trees_.size());
    }

    const std::vector<RegressionTree>& trees() const noexcept { return trees_; }

    void save(std::ostream& out) const override {
        out << "trees " << trees_.size() << '\n';
        for (const auto& t : trees_) t.save(out);
    }

    static ForestRegressor load(Family family, io::Reader& in) {
        in.expect("trees");
        const auto n = in.count();
        std::vector<RegressionTree> trees;
        trees.reserve(n);
        for (std::size_t i = 0; i < n; ++i) trees.push_back(RegressionTree::load(in));
        return ForestRegressor(family, std::move(trees));
    }

private:
    Family family_;
    std::vector<RegressionTree> trees_;
};

/// Stagewise squared-loss boosting: F0 = mean(y), then each tree is fitted to
/// the current residuals y − F and added with shrinkage `learning_rate`.
class GbmRegressor final : public Regressor {
public:
    GbmRegressor(double base, double learning_rate, std::vector<RegressionTree> trees)
        : base_(base), learning_rate_(learning_rate), trees_(std::move(trees)) {}

    static GbmRegressor fit(const FeatureMatrix& X, std::span<const double> y, std::size_t n_trees,
                            const TreeParams& params, double learning_rate, std::uint64_t seed) {
        const std::size_t n = X.rows();
        double sum = 0.0;
        for (double v : y) sum += v;
        const double base = sum / static_cast<double>(n);
        const TrainingData data(X);
        const auto samples = all_samples(n);
        std::vector<double> f(n, base), residual(n);
        std::vector<RegressionTree> trees;
        trees.reserve(n_trees);
        std::vector<double> history;
        history.reserve(n_trees + 1);
        auto mse = [&] {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += (y[i] - f[i]) * (y[i] - f[i]);
            return s / static_cast<double>(n);
        };
        history.push_back(mse());
        Rng rng(derive_seed(seed, seed_stream::tree, 0));
        for (std::size_t t = 0; t < n_trees; ++t) {
            for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - f[i];
            trees.push_back(grow_tree(data, residual, samples, params, rng));
            for (std::size_t i = 0; i < n; ++i) f[i] += learning_rate * trees.back().predict(X.row(i));
            history.push_back(mse());
        }
        GbmRegressor g(base, learning_rate, std::move(trees));
        g.train_mse_ = std::move(history);
        return g;
    }

    Family family() const override { return Family::gbm; }

    double predict_row(std::span<const double> x) const override {
        double s = 0.0;
        for (const auto& t : trees_) s += t.predict(x);
        return base_ + learning_rate_ * s;
    }

    double base() const noexcept { return base_; }
    double learning_rate() const noexcept { return learning_rate_; }
    const std::vector<RegressionTree>& trees() const noexcept { return trees_; }

    /// Training MSE before any tree and after each one. Only set by fit().
    const std::vector<double>& train_mse() const noexcept { return train_mse_; }

    void save(std::ostream& out) const override {
        out << "base " << format_double(base_) << "\nlearning_rate " << format_double(learning_rate_) << "\ntrees "
            << trees_.size() << '\n';
        for (const auto& t : trees_) t.save(out);
    }

    static GbmRegressor load(io::Reader& in) {
        in.expect("base");
        const double base = in.number();
        in.expect("learning_rate");
        const double lr = in.number();
        in.expect("trees");
        const auto n = in.count();
        std::vector<RegressionTree> trees;
        trees.reserve(n);
        for (std::size_t i = 0; i < n; ++i) trees.push_back(RegressionTree::load(in));
        return GbmRegressor(base, lr, std::move(trees));
    }

private:
    double base_;
    double learning_rate_;
    std::vector<RegressionTree> trees_;
    std::vector<double> train_mse_;
};

} // namespace yieldcast::models
