#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "yieldcast/core/csv.hpp"
#include "yieldcast/core/text.hpp"

namespace yieldcast::eval {

/// Regression metrics on one evaluation set. MAPE is a fraction, not percent.
/// `mape` is empty when any truth value is zero; `rmsle` is empty when any
/// truth value is negative.
struct MetricsReport {
    double r2 = 0.0;
    double mae = 0.0;
    double mse = 0.0;
    double rmse = 0.0;
    std::optional<double> mape;
    std::optional<double> rmsle;
    std::size_t n = 0;
};

inline MetricsReport compute_metrics(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size()) throw std::invalid_argument("metric inputs differ in length");
    if (y_true.empty()) throw std::invalid_argument("metrics need at least one value");
    const std::size_t n = y_true.size();
    const double dn = static_cast<double>(n);

    double mean = 0.0;
    for (double v : y_true) mean += v;
    mean /= dn;

    double abs_sum = 0.0, sq_sum = 0.0, tot = 0.0, ape = 0.0, sle = 0.0;
    bool zero_truth = false, negative_truth = false;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y_true[i] - y_pred[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
        tot += (y_true[i] - mean) * (y_true[i] - mean);
        if (y_true[i] == 0.0)
            zero_truth = true;
        else
            ape += std::abs(e) / std::abs(y_true[i]);
        if (y_true[i] < 0.0)
            negative_truth = true;
        else {
            const double d = std::log1p(std::max(y_pred[i], 0.0)) - std::log1p(y_true[i]);
            sle += d * d;
        }
    }

    MetricsReport m;
    m.n = n;
    m.mae = abs_sum / dn;
    m.mse = sq_sum / dn;
    m.rmse = std::sqrt(m.mse);
    if (tot > 0.0)
        m.r2 = 1.0 - sq_sum / tot;
    else
        m.r2 = sq_sum == 0.0 ? 1.0 : 0.0;
    if (!zero_truth) m.mape = ape / dn;
    if (!negative_truth) m.rmsle = std::sqrt(sle / dn);
    return m;
}

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::size_t> counts;

    double bin_width() const noexcept { return counts.empty() ? 0.0 : (hi - lo) / static_cast<double>(counts.size()); }
};

/// ceil(sqrt(n)) equal-width bins over [min, max]; the maximum lands in the
/// last bin. All-equal input gives one bin.
inline Histogram histogram(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("histogram of an empty series");
    Histogram h;
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    h.lo = *mn;
    h.hi = *mx;
    if (h.lo == h.hi) {
        h.counts.assign(1, v.size());
        return h;
    }
    const auto bins = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(v.size()))));
    h.counts.assign(bins, 0);
    const double w = (h.hi - h.lo) / static_cast<double>(bins);
    for (double x : v) {
        auto b = static_cast<std::size_t>((x - h.lo) / w);
        ++h.counts[std::min(b, bins - 1)];
    }
    return h;
}

/// Adjusted Fisher–Pearson sample skewness G1. Zero for n < 3 or zero variance.
inline double skewness(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n < 3) return 0.0;
    const double dn = static_cast<double>(n);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= dn;
    double m2 = 0.0, m3 = 0.0;
    for (double x : v) {
        const double d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= dn;
    m3 /= dn;
    if (m2 == 0.0) return 0.0;
    const double g1 = m3 / std::pow(m2, 1.5);
    return g1 * std::sqrt(dn * (dn - 1.0)) / (dn - 2.0);
}

struct ResidualSummary {
    std::vector<double> residuals; ///< y_true − y_pred
    Histogram histogram;
    double mean = 0.0;
    double skewness = 0.0;
};

inline ResidualSummary residual_summary(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size()) throw std::invalid_argument("residual inputs differ in length");
    if (y_true.size() < 2) throw std::invalid_argument("residual summary needs at least two values");
    ResidualSummary s;
    s.residuals.resize(y_true.size());
    for (std::size_t i = 0; i < y_true.size(); ++i) s.residuals[i] = y_true[i] - y_pred[i];
    for (double r : s.residuals) s.mean += r;
    s.mean /= static_cast<double>(s.residuals.size());
    s.histogram = histogram(s.residuals);
    s.skewness = skewness(s.residuals);
    return s;
}

struct RegionRow {
    std::string state;
    std::string district;
    double actual = 0.0;
    double predicted = 0.0;
};

struct DistrictError {
    std::string state;
    std::string district;
    double ape_percent = 0.0; ///< mean over the district's rows
    std::size_t rows = 0;
};

struct StateError {
    std::string state;
    double mean_ape_percent = 0.0; ///< unweighted mean over districts
    std::size_t districts = 0;
};

/// Absolute percentage errors in percent, grouped by district then state.
struct RegionErrorSummary {
    std::vector<DistrictError> districts; ///< sorted by (state, district)
    std::vector<StateError> states;       ///< sorted by state
    std::size_t excluded = 0;             ///< rows with non-positive actual
};

inline RegionErrorSummary region_error(std::span<const RegionRow> rows) {
    RegionErrorSummary out;
    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> acc;
    for (const auto& r : rows) {
        if (!(r.actual > 0.0)) {
            ++out.excluded;
            continue;
        }
        auto& a = acc[{r.state, r.district}];
        a.first += std::abs(r.actual - r.predicted) / r.actual;
        ++a.second;
    }
    std::map<std::string, std::pair<double, std::size_t>> states;
    for (const auto& [key, a] : acc) {
        const double ape = 100.0 * a.first / static_cast<double>(a.second);
        out.districts.push_back({key.first, key.second, ape, a.second});
        auto& s = states[key.first];
        s.first += ape;
        ++s.second;
    }
    for (const auto& [state, s] : states) out.states.push_back({state, s.first / static_cast<double>(s.second), s.second});
    return out;
}

inline std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline std::string write_metrics_csv(const MetricsReport& m) {
    csv::Writer w;
    w.row({"n", "r2", "mae", "mse", "rmse", "mape", "rmsle"});
    w.row({std::to_string(m.n), format_double(m.r2), format_double(m.mae), format_double(m.mse), format_double(m.rmse),
           optional_field(m.mape), optional_field(m.rmsle)});
    return w.str();
}

/// One line per residual plus the actual/predicted pair it came from.
inline std::string write_residuals_csv(std::span<const double> y_true, std::span<const double> y_pred) {
    csv::Writer w;
    w.row({"actual", "predicted", "residual"});
    for (std::size_t i = 0; i < y_true.size(); ++i)
        w.row({format_double(y_true[i]), format_double(y_pred[i]), format_double(y_true[i] - y_pred[i])});
    return w.str();
}

inline std::string write_histogram_csv(const ResidualSummary& s) {
    csv::Writer w;
    w.comment("mean=" + format_double(s.mean) + " skewness=" + format_double(s.skewness));
    w.row({"bin", "lo", "hi", "count"});
    const auto& h = s.histogram;
    const double width = h.bin_width();
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        const double lo = h.lo + width * static_cast<double>(b);
        const double hi = b + 1 == h.counts.size() ? h.hi : h.lo + width * static_cast<double>(b + 1);
        w.row({std::to_string(b), format_double(lo), format_double(hi), std::to_string(h.counts[b])});
    }
    return w.str();
}

inline std::string write_region_error_csv(const RegionErrorSummary& s) {
    csv::Writer w;
    w.comment("excluded_rows=" + std::to_string(s.excluded));
    w.row({"level", "state", "district", "ape_percent", "count"});
    for (const auto& st : s.states)
        w.row({"state", st.state, "", format_double(st.mean_ape_percent), std::to_string(st.districts)});
    for (const auto& d : s.districts)
        w.row({"district", d.state, d.district, format_double(d.ape_percent), std::to_string(d.rows)});
    return w.str();
}

} // namespace yieldcast::eval
