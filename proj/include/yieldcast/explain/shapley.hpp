#pragma once

#include <algorithm>
#include <bit>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "yieldcast/core/feature_matrix.hpp"
#include "yieldcast/core/parallel.hpp"
#include "yieldcast/core/rng.hpp"
#include "yieldcast/models/ensemble.hpp"

namespace yieldcast::explain {

/// Anything with `double predict_row(std::span<const double>) const`.
template <class M>
concept RowModel = requires(const M& m, std::span<const double> x) {
    { m.predict_row(x) } -> std::convertible_to<double>;
};

inline constexpr std::size_t max_exact_features = 20;

enum class Method { exact, sampled };

/// Attribution of one row. `phi` has one entry per model feature; features
/// outside the explained set hold 0. baseline + sum(phi) reproduces the
/// prediction (exactly for the exact method, up to rounding for sampling).
struct Attribution {
    std::vector<double> phi;
    double baseline = 0.0;   ///< value of the empty coalition
    double prediction = 0.0; ///< f(x)
};

struct AttributionSet {
    std::vector<std::string> feature_names;
    std::vector<Attribution> rows;
    FeatureMatrix background;
    Method method = Method::exact;
    std::size_t permutations = 0; ///< sampled only
    std::uint64_t seed = 0;       ///< sampled only
};

/// Interventional value of coalition `in_coalition` (one flag per feature):
/// mean over background rows of f on the row that takes flagged features from
/// x and the rest from the background row.
template <RowModel M>
double value_function(const M& model, std::span<const double> x, const std::vector<bool>& in_coalition,
                      const FeatureMatrix& background) {
    if (background.rows() == 0) throw std::invalid_argument("value function needs a non-empty background");
    if (x.size() != background.cols() || in_coalition.size() != x.size())
        throw std::invalid_argument("row, coalition and background widths differ");
    std::vector<double> h(x.size());
    double sum = 0.0;
    for (std::size_t b = 0; b < background.rows(); ++b) {
        const auto bg = background.row(b);
        for (std::size_t j = 0; j < h.size(); ++j) h[j] = in_coalition[j] ? x[j] : bg[j];
        sum += model.predict_row(h);
    }
    return sum / static_cast<double>(background.rows());
}

namespace detail {

inline void check_indices(std::span<const std::size_t> idx, std::size_t width) {
    std::vector<bool> seen(width, false);
    for (std::size_t j : idx) {
        if (j >= width) throw std::invalid_argument("feature index " + std::to_string(j) + " out of range");
        if (seen[j]) throw std::invalid_argument("feature index " + std::to_string(j) + " repeated");
        seen[j] = true;
    }
}

inline std::vector<std::size_t> all_indices(std::size_t m) {
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

} // namespace detail

/// Shapley values by enumerating every coalition of `features`. Features not
/// listed stay at x's values in every evaluation and get no attribution.
/// Cost: 2^|features| · |background| predictions.
template <RowModel M>
Attribution exact_shapley(const M& model, std::span<const double> x, const FeatureMatrix& background,
                          std::span<const std::size_t> features) {
    const std::size_t m = features.size();
    if (m > max_exact_features)
        throw std::invalid_argument("exact Shapley enumeration is limited to " + std::to_string(max_exact_features) +
                                    " features, got " + std::to_string(m));
    detail::check_indices(features, x.size());

    std::vector<bool> base(x.size(), true);
    for (std::size_t j : features) base[j] = false;

    const std::size_t masks = std::size_t{1} << m;
    std::vector<double> v(masks);
    std::vector<bool> coalition;
    for (std::size_t mask = 0; mask < masks; ++mask) {
        coalition = base;
        for (std::size_t k = 0; k < m; ++k)
            if (mask >> k & 1U) coalition[features[k]] = true;
        v[mask] = value_function(model, x, coalition, background);
    }

    // weight of a coalition of size s that excludes the feature: 1 / (m · C(m−1, s))
    std::vector<double> weight(m);
    for (std::size_t s = 0; s < m; ++s) {
        double c = 1.0;
        for (std::size_t i = 1; i <= s; ++i) c = c * static_cast<double>(m - i) / static_cast<double>(i);
        weight[s] = 1.0 / (static_cast<double>(m) * c);
    }

    Attribution a;
    a.phi.assign(x.size(), 0.0);
    a.baseline = v[0];
    a.prediction = model.predict_row(x);
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t bit = std::size_t{1} << k;
        double phi = 0.0;
        for (std::size_t mask = 0; mask < masks; ++mask) {
            if (mask & bit) continue;
            phi += weight[static_cast<std::size_t>(std::popcount(mask))] * (v[mask | bit] - v[mask]);
        }
        a.phi[features[k]] = phi;
    }
    return a;
}

template <RowModel M>
Attribution exact_shapley(const M& model, std::span<const double> x, const FeatureMatrix& background) {
    const auto idx = detail::all_indices(x.size());
    return exact_shapley(model, x, background, idx);
}

/// Permutation-sampling estimate. Each permutation adds the features of
/// `features` one at a time, in random order, to a coalition that starts
/// empty; the change in the value function is credited to the added feature.
/// Cost: n_permutations · |features| · |background| predictions.
template <RowModel M>
Attribution sampled_shapley(const M& model, std::span<const double> x, const FeatureMatrix& background,
                            std::size_t n_permutations, std::uint64_t seed, std::span<const std::size_t> features) {
    if (n_permutations == 0) throw std::invalid_argument("sampled Shapley needs at least one permutation");
    if (background.rows() == 0) throw std::invalid_argument("sampled Shapley needs a non-empty background");
    if (x.size() != background.cols()) throw std::invalid_argument("row and background widths differ");
    detail::check_indices(features, x.size());

    std::vector<bool> frozen(x.size(), true);
    for (std::size_t j : features) frozen[j] = false;

    const std::size_t nb = background.rows();
    const std::size_t width = x.size();
    std::vector<double> start(nb * width);
    for (std::size_t b = 0; b < nb; ++b) {
        const auto bg = background.row(b);
        for (std::size_t j = 0; j < width; ++j) start[b * width + j] = frozen[j] ? x[j] : bg[j];
    }
    auto mean_prediction = [&](const std::vector<double>& rows) {
        double sum = 0.0;
        for (std::size_t b = 0; b < nb; ++b) sum += model.predict_row(std::span<const double>(rows.data() + b * width, width));
        return sum / static_cast<double>(nb);
    };

    Attribution a;
    a.phi.assign(width, 0.0);
    a.prediction = model.predict_row(x);
    a.baseline = mean_prediction(start);

    Rng rng(seed);
    std::vector<std::size_t> order(features.begin(), features.end());
    std::vector<double> hybrid;
    for (std::size_t p = 0; p < n_permutations; ++p) {
        rng.shuffle(std::span<std::size_t>(order));
        hybrid = start;
        double prev = a.baseline;
        for (std::size_t j : order) {
            for (std::size_t b = 0; b < nb; ++b) hybrid[b * width + j] = x[j];
            const double cur = mean_prediction(hybrid);
            a.phi[j] += cur - prev;
            prev = cur;
        }
    }
    for (double& p : a.phi) p /= static_cast<double>(n_permutations);
    return a;
}

template <RowModel M>
Attribution sampled_shapley(const M& model, std::span<const double> x, const FeatureMatrix& background,
                            std::size_t n_permutations, std::uint64_t seed) {
    const auto idx = detail::all_indices(x.size());
    return sampled_shapley(model, x, background, n_permutations, seed, idx);
}

/// The first `size` training rows after a seeded shuffle.
inline FeatureMatrix select_background(const FeatureMatrix& train, std::size_t size, std::uint64_t seed) {
    if (train.rows() == 0) throw std::invalid_argument("cannot draw a background from an empty table");
    auto idx = detail::all_indices(train.rows());
    Rng rng(derive_seed(seed, models::seed_stream::background, 0));
    rng.shuffle(std::span<std::size_t>(idx));
    idx.resize(std::min(size, idx.size()));
    return train.select_rows(idx);
}

/// Sampled attributions for every row of X. Row i uses the permutation stream
/// derive_seed(seed, shap_permutation, i), so results do not depend on the
/// thread count.
template <RowModel M>
AttributionSet explain_rows(const M& model, const FeatureMatrix& X, FeatureMatrix background,
                            std::size_t n_permutations, std::uint64_t seed, std::size_t threads = 0) {
    AttributionSet set;
    set.feature_names = X.names();
    set.method = Method::sampled;
    set.permutations = n_permutations;
    set.seed = seed;
    set.rows.resize(X.rows());
    parallel_for(
        X.rows(),
        [&](std::size_t i) {
            set.rows[i] = sampled_shapley(model, X.row(i), background, n_permutations,
                                          derive_seed(seed, models::seed_stream::shap_permutation, i));
        },
        threads);
    set.background = std::move(background);
    return set;
}

/// Exact attributions for every row of X over the given feature subset.
template <RowModel M>
AttributionSet explain_rows_exact(const M& model, const FeatureMatrix& X, FeatureMatrix background,
                                  std::span<const std::size_t> features, std::size_t threads = 0) {
    AttributionSet set;
    set.feature_names = X.names();
    set.method = Method::exact;
    set.rows.resize(X.rows());
    parallel_for(
        X.rows(), [&](std::size_t i) { set.rows[i] = exact_shapley(model, X.row(i), background, features); }, threads);
    set.background = std::move(background);
    return set;
}

} // namespace yieldcast::explain
