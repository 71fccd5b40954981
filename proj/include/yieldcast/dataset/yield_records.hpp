#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "yieldcast/core/csv.hpp"
#include "yieldcast/core/error.hpp"
#include "yieldcast/core/text.hpp"

namespace yieldcast::data {

struct YieldRecord {
    std::string state;
    std::string district;
    std::string season; ///< normalized (lowercase, trimmed)
    int year = 0;       ///< harvest year
    double area = 0.0;       ///< ha
    double production = 0.0; ///< t
    double yield = 0.0;      ///< t/ha

    friend bool operator==(const YieldRecord&, const YieldRecord&) = default;
};

/// Header names for each logical column of the yield table.
struct YieldColumns {
    std::string state = "State";
    std::string district = "District";
    std::string crop = "Crop";
    std::string season = "Season";
    std::string year = "Year";
    std::string area = "Area";
    std::string production = "Production";
    std::string yield = "Yield";
};

struct YieldParseOptions {
    YieldColumns columns;
    std::string season = "kharif"; ///< empty keeps every season
    std::string crop;               ///< empty keeps every crop
    int min_year = 1995;
    int max_year = 2021;
};

struct YieldParseResult {
    std::vector<YieldRecord> records;
    std::size_t skipped = 0;  ///< malformed or out-of-range rows
    std::size_t filtered = 0; ///< well-formed rows of another season or crop
};

/// Parse the yield table. Mandatory columns: state, district, season, year, area
/// and yield; crop and production are optional. Malformed rows (non-numeric or
/// non-positive yield or area, year out of bounds) are counted and skipped.
inline YieldParseResult parse_yield_csv(std::string_view text, const YieldParseOptions& opt = {}) {
    const auto rows = csv::parse(text);
    if (rows.empty()) throw ParseError("yield table is empty", 1);
    const csv::Header header(rows[0]);
    const auto& c = opt.columns;
    const std::size_t i_state = header.require(c.state), i_district = header.require(c.district),
                      i_season = header.require(c.season), i_year = header.require(c.year),
                      i_area = header.require(c.area), i_yield = header.require(c.yield);
    const auto i_crop = header.find(c.crop);
    const auto i_prod = header.find(c.production);
    const std::string want_season = normalize_name(opt.season);
    const std::string want_crop = normalize_name(opt.crop);

    YieldParseResult out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r].fields;
        auto field = [&](std::size_t i) -> std::string_view { return i < f.size() ? std::string_view(f[i]) : ""; };
        const std::size_t needed = std::max({i_state, i_district, i_season, i_year, i_area, i_yield}) + 1;
        if (f.size() < needed) {
            ++out.skipped;
            continue;
        }
        const std::string season = normalize_name(field(i_season));
        if (!want_season.empty() && season != want_season) {
            ++out.filtered;
            continue;
        }
        if (i_crop && !want_crop.empty() && normalize_name(field(*i_crop)) != want_crop) {
            ++out.filtered;
            continue;
        }
        const auto year = parse_int(field(i_year));
        const auto area = parse_double(field(i_area));
        const auto yld = parse_double(field(i_yield));
        const auto prod = i_prod ? parse_double(field(*i_prod)) : std::optional<double>(0.0);
        const bool ok = year && area && yld && std::isfinite(*area) && std::isfinite(*yld) && *area > 0 && *yld > 0 &&
                        *year >= opt.min_year && *year <= opt.max_year && !trim(field(i_state)).empty() &&
                        !trim(field(i_district)).empty();
        if (!ok) {
            ++out.skipped;
            continue;
        }
        out.records.push_back(YieldRecord{std::string(trim(field(i_state))), std::string(trim(field(i_district))),
                                          season, static_cast<int>(*year), *area, prod.value_or(0.0), *yld});
    }
    if (out.records.empty()) throw ParseError("no parsable yield rows");
    return out;
}

enum class OutlierScope { global, per_district };

struct OutlierResult {
    std::vector<YieldRecord> kept;
    std::vector<YieldRecord> removed;
};

namespace detail {
struct MeanSd {
    double mean = 0.0, sd = 0.0;
};
inline MeanSd population_mean_sd(const std::vector<const YieldRecord*>& recs) {
    double sum = 0.0;
    for (auto* r : recs) sum += r->yield;
    const double mean = sum / static_cast<double>(recs.size());
    double ss = 0.0;
    for (auto* r : recs) ss += (r->yield - mean) * (r->yield - mean);
    return {mean, std::sqrt(ss / static_cast<double>(recs.size()))};
}
} // namespace detail

/// Drop records with |yield − mean| > k·σ, mean and population σ computed once
/// over the scope (all records, or each district's records). k = +inf disables
/// the filter. Record order is preserved.
inline OutlierResult remove_yield_outliers(const std::vector<YieldRecord>& records, double k = 3.0,
                                           OutlierScope scope = OutlierScope::global) {
    if (records.size() < 2) throw std::invalid_argument("outlier filter needs at least 2 records");
    if (!(k >= 0)) throw std::invalid_argument("outlier multiplier must be non-negative");
    OutlierResult out;
    if (std::isinf(k)) {
        out.kept = records;
        return out;
    }
    std::map<std::pair<std::string, std::string>, std::vector<const YieldRecord*>> groups;
    for (const auto& r : records) {
        const auto key = scope == OutlierScope::global ? std::pair<std::string, std::string>{}
                                                       : std::pair{normalize_name(r.state), normalize_name(r.district)};
        groups[key].push_back(&r);
    }
    std::map<const YieldRecord*, bool> drop;
    for (const auto& [_, recs] : groups) {
        const auto ms = detail::population_mean_sd(recs);
        for (auto* r : recs) drop[r] = std::abs(r->yield - ms.mean) > k * ms.sd;
    }
    for (const auto& r : records) (drop[&r] ? out.removed : out.kept).push_back(r);
    return out;
}

struct Date {
    int year = 0;
    int month = 0; ///< 1..12
    int day = 0;   ///< 1..31
};

struct DatedValue {
    Date date;
    double value = 0.0;
};

/// Mean of finite values dated in (year, month); nullopt when there are none.
inline std::optional<double> monthly_mean(const std::vector<DatedValue>& series, int month, int year) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : series) {
        if (v.date.year != year || v.date.month != month || !std::isfinite(v.value)) continue;
        sum += v.value;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

} // namespace yieldcast::data
