#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "yieldcast/core/csv.hpp"
#include "yieldcast/core/feature_matrix.hpp"
#include "yieldcast/core/text.hpp"
#include "yieldcast/explain/shapley.hpp"

namespace yieldcast::explain {

struct FeatureImportance {
    std::string feature;
    std::size_t index = 0;
    std::size_t rank = 0; ///< 1 = most important
    double mean_abs_phi = 0.0;
};

/// Mean |phi| per feature, most important first. Ties keep column order.
inline std::vector<FeatureImportance> importance(const AttributionSet& set) {
    if (set.rows.empty()) throw std::invalid_argument("importance of an empty attribution set");
    const std::size_t m = set.feature_names.size();
    std::vector<FeatureImportance> out(m);
    for (std::size_t j = 0; j < m; ++j) {
        out[j].feature = set.feature_names[j];
        out[j].index = j;
        for (const auto& r : set.rows) out[j].mean_abs_phi += std::abs(r.phi[j]);
        out[j].mean_abs_phi /= static_cast<double>(set.rows.size());
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const FeatureImportance& a, const FeatureImportance& b) { return a.mean_abs_phi > b.mean_abs_phi; });
    for (std::size_t i = 0; i < m; ++i) out[i].rank = i + 1;
    return out;
}

inline std::size_t feature_index(const AttributionSet& set, const std::string& name) {
    const auto it = std::find(set.feature_names.begin(), set.feature_names.end(), name);
    if (it == set.feature_names.end()) throw std::invalid_argument("unknown feature '" + name + "'");
    return static_cast<std::size_t>(it - set.feature_names.begin());
}

/// feature, rank, mean_abs_phi
inline std::string write_shap_summary_csv(const AttributionSet& set) {
    csv::Writer w;
    w.comment("baseline_mean=" + format_double(std::accumulate(set.rows.begin(), set.rows.end(), 0.0,
                                                                   [](double s, const Attribution& a) { return s + a.baseline; }) /
                                                   static_cast<double>(set.rows.size())) +
              " rows=" + std::to_string(set.rows.size()) + " background=" + std::to_string(set.background.rows()) +
              (set.method == Method::sampled ? " permutations=" + std::to_string(set.permutations) : " method=exact"));
    w.row({"feature", "rank", "mean_abs_phi"});
    for (const auto& f : importance(set)) w.row({f.feature, std::to_string(f.rank), format_double(f.mean_abs_phi)});
    return w.str();
}

/// row, feature, feature_value, phi; one line per (row, feature), features in
/// importance order.
inline std::string write_shap_points_csv(const AttributionSet& set, const FeatureMatrix& X) {
    if (X.rows() != set.rows.size()) throw std::invalid_argument("attribution and feature rows differ");
    csv::Writer w;
    w.row({"row", "feature", "feature_value", "phi"});
    for (const auto& f : importance(set))
        for (std::size_t i = 0; i < X.rows(); ++i)
            w.row({std::to_string(i), f.feature, format_double(X(i, f.index)), format_double(set.rows[i].phi[f.index])});
    return w.str();
}

/// feature_value, phi, color_value for one feature, in row order.
inline std::string write_shap_dependence_csv(const AttributionSet& set, const FeatureMatrix& X, const std::string& feature,
                                             const std::string& color_feature) {
    if (X.rows() != set.rows.size()) throw std::invalid_argument("attribution and feature rows differ");
    const std::size_t j = feature_index(set, feature);
    const std::size_t c = feature_index(set, color_feature);
    csv::Writer w;
    w.comment("feature=" + feature + " color=" + color_feature);
    w.row({"feature_value", "phi", "color_value"});
    for (std::size_t i = 0; i < X.rows(); ++i)
        w.row({format_double(X(i, j)), format_double(set.rows[i].phi[j]), format_double(X(i, c))});
    return w.str();
}

} // namespace yieldcast::explain
