#pragma once

#include <algorithm>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "yieldcast/core/csv.hpp"
#include "yieldcast/core/feature_matrix.hpp"
#include "yieldcast/core/log.hpp"
#include "yieldcast/evaluation/metrics.hpp"
#include "yieldcast/models/model.hpp"

namespace yieldcast::models {

struct LeaderboardRow {
    ModelSpec spec;
    std::optional<FittedModel> model;      ///< empty when fitting failed
    std::optional<eval::MetricsReport> test;
    std::vector<double> predictions;       ///< on the test rows
    std::string error;
};

/// MAPE ascending, then R2 descending, errored rows last. Rows without a MAPE
/// sort after rows with one.
inline bool leaderboard_before(const LeaderboardRow& a, const LeaderboardRow& b) {
    if (a.test.has_value() != b.test.has_value()) return a.test.has_value();
    if (!a.test) return false;
    const auto& ma = *a.test;
    const auto& mb = *b.test;
    if (ma.mape.has_value() != mb.mape.has_value()) return ma.mape.has_value();
    if (ma.mape && *ma.mape != *mb.mape) return *ma.mape < *mb.mape;
    return ma.r2 > mb.r2;
}

/// Fits every spec on the training rows and scores it on the test rows. A
/// failing spec yields a row carrying its error message; the sweep continues.
inline std::vector<LeaderboardRow> train_all(std::span<const ModelSpec> specs, const FeatureMatrix& X_train,
                                             std::span<const double> y_train, const FeatureMatrix& X_test,
                                             std::span<const double> y_test) {
    if (specs.empty()) throw std::invalid_argument("train_all needs at least one model spec");
    std::vector<LeaderboardRow> rows;
    rows.reserve(specs.size());
    for (const auto& spec : specs) {
        LeaderboardRow row;
        row.spec = spec;
        try {
            log::StageTimer timer("fit:" + spec.label());
            auto m = fit(spec, X_train, y_train);
            row.predictions = m.predict(X_test);
            row.test = eval::compute_metrics(y_test, row.predictions);
            row.spec = m.spec();
            row.model = std::move(m);
        } catch (const std::exception& e) {
            row.error = e.what();
            log::warn("event=fit_failed model=" + spec.label() + " error=\"" + row.error + "\"");
        }
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), leaderboard_before);
    return rows;
}

inline std::string write_leaderboard_csv(std::span<const LeaderboardRow> rows) {
    csv::Writer w;
    w.row({"model", "family", "MAE", "RMSE", "R2", "MAPE", "MSE", "RMSLE", "n", "error"});
    for (const auto& r : rows) {
        const std::string name = r.spec.label();
        const std::string family(family_name(r.spec.family));
        if (!r.test) {
            w.row({name, family, "", "", "", "", "", "", "", r.error});
            continue;
        }
        const auto& m = *r.test;
        w.row({name, family, format_double(m.mae), format_double(m.rmse), format_double(m.r2),
               eval::optional_field(m.mape), format_double(m.mse), eval::optional_field(m.rmsle), std::to_string(m.n),
               ""});
    }
    return w.str();
}

} // namespace yieldcast::models
