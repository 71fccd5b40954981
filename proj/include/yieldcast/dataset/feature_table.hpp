#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "yieldcast/core/csv.hpp"
#include "yieldcast/core/error.hpp"
#include "yieldcast/core/feature_matrix.hpp"
#include "yieldcast/core/log.hpp"
#include "yieldcast/core/text.hpp"
#include "yieldcast/dataset/yield_records.hpp"
#include "yieldcast/matching/fuzzy_join.hpp"

namespace yieldcast::data {

inline const std::vector<std::string>& default_variables() {
    static const std::vector<std::string> v{"pev", "t2m", "tp", "lai", "sp", "swvl1", "ndvi"};
    return v;
}

/// May through November.
inline const std::vector<int>& default_months() {
    static const std::vector<int> m{5, 6, 7, 8, 9, 10, 11};
    return m;
}

inline std::string month_abbrev(int month) {
    static constexpr const char* names[] = {"jan", "feb", "mar", "apr", "may", "jun",
                                            "jul", "aug", "sep", "oct", "nov", "dec"};
    if (month < 1 || month > 12) throw std::invalid_argument("month out of range: " + std::to_string(month));
    return names[month - 1];
}

/// Which EO variables and months make up the feature set. Feature columns are
/// variable-major: <var>_<mon> for each variable in order, months in order.
struct EoSchema {
    std::vector<std::string> variables = default_variables();
    std::vector<int> months = default_months();

    std::vector<std::string> feature_names() const {
        std::vector<std::string> out;
        for (const auto& v : variables)
            for (int m : months) out.push_back(v + "_" + month_abbrev(m));
        return out;
    }
    std::size_t feature_count() const noexcept { return variables.size() * months.size(); }
};

/// Dense store of district-level monthly aggregates, NaN meaning missing.
class ZonalCube {
public:
    ZonalCube(std::size_t districts, EoSchema schema, int first_year, int last_year)
        : schema_(std::move(schema)), districts_(districts), first_year_(first_year), last_year_(last_year),
          values_(districts * schema_.variables.size() * years() * schema_.months.size(), std::nan("")) {
        if (last_year < first_year) throw std::invalid_argument("zonal cube year range is empty");
    }

    const EoSchema& schema() const noexcept { return schema_; }
    std::size_t districts() const noexcept { return districts_; }
    int first_year() const noexcept { return first_year_; }
    int last_year() const noexcept { return last_year_; }
    std::size_t years() const noexcept { return static_cast<std::size_t>(last_year_ - first_year_ + 1); }

    bool has_year(int y) const noexcept { return y >= first_year_ && y <= last_year_; }

    double get(std::size_t district, std::size_t var, int year, std::size_t month_idx) const {
        return values_[index(district, var, year, month_idx)];
    }
    void set(std::size_t district, std::size_t var, int year, std::size_t month_idx, std::optional<double> v) {
        values_[index(district, var, year, month_idx)] = v.value_or(std::nan(""));
    }

private:
    std::size_t index(std::size_t d, std::size_t v, int y, std::size_t m) const {
        if (d >= districts_ || v >= schema_.variables.size() || !has_year(y) || m >= schema_.months.size())
            throw std::out_of_range("zonal cube index out of range");
        const std::size_t yi = static_cast<std::size_t>(y - first_year_);
        return ((d * schema_.variables.size() + v) * years() + yi) * schema_.months.size() + m;
    }

    EoSchema schema_;
    std::size_t districts_;
    int first_year_, last_year_;
    std::vector<double> values_;
};

struct FeatureRow {
    int district_id = 0;
    std::string state;    ///< polygon-side names
    std::string district;
    int year = 0;
    std::vector<double> eo;
    double target = 0.0; ///< t/ha

    friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

/// One row per (district_id, year), sorted by that key.
///
/// Column order: district_id, state, district, year, EO features (variable-major),
/// yield. Model inputs are `year, district_id, <EO...>` when identifiers are
/// included, otherwise the EO columns alone.
struct FeatureTable {
    std::vector<std::string> eo_names;
    std::vector<FeatureRow> rows;
    bool include_ids = true;

    std::vector<std::string> input_names() const {
        std::vector<std::string> out;
        if (include_ids) out = {"year", "district_id"};
        out.insert(out.end(), eo_names.begin(), eo_names.end());
        return out;
    }

    std::vector<std::string> all_columns() const {
        std::vector<std::string> out{"district_id", "state", "district", "year"};
        out.insert(out.end(), eo_names.begin(), eo_names.end());
        out.push_back("yield");
        return out;
    }

    std::uint64_t schema_hash() const { return yieldcast::schema_hash(input_names()); }

    FeatureMatrix inputs() const {
        FeatureMatrix m(input_names(), rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            auto out = m.row(r);
            std::size_t c = 0;
            if (include_ids) {
                out[c++] = rows[r].year;
                out[c++] = rows[r].district_id;
            }
            for (double v : rows[r].eo) out[c++] = v;
        }
        return m;
    }

    std::vector<double> targets() const {
        std::vector<double> y;
        y.reserve(rows.size());
        for (const auto& r : rows) y.push_back(r.target);
        return y;
    }

    /// Same rows, identifiers toggled in or out of the model inputs.
    FeatureTable with_ids(bool on) const {
        FeatureTable t = *this;
        t.include_ids = on;
        return t;
    }
};

struct BuildOptions {
    bool include_year_district = true;
    /// Features for harvest year Y are taken from calendar year Y − offset.
    int sowing_year_offset = 0;
};

struct BuildResult {
    FeatureTable table;
    std::size_t excluded_missing = 0;   ///< joined rows dropped for a missing EO value
    std::size_t unmatched_records = 0;  ///< yield records with no polygon match
    std::size_t duplicate_records = 0;  ///< repeated (district, year) keys, smallest yield kept
    std::size_t out_of_range_years = 0; ///< records whose feature year has no rasters
};

/// Inner join of yield records with zonal aggregates through the district match.
/// district_id is the rank of the polygon's (state, district) among joined districts.
inline BuildResult build_feature_table(const ZonalCube& cube, const std::vector<match::NamedUnit>& shapes,
                                       const std::vector<YieldRecord>& yields,
                                       const std::map<match::NamedUnit, std::size_t>& mapping,
                                       const BuildOptions& opt = {}) {
    if (shapes.size() != cube.districts()) throw SchemaError("zonal cube and district list sizes differ");
    BuildResult res;
    const auto& schema = cube.schema();

    struct Joined {
        std::size_t shape;
        int year;
        double target;
    };
    std::map<std::pair<std::size_t, int>, Joined> joined;
    for (const auto& rec : yields) {
        const auto it = mapping.find({rec.state, rec.district});
        if (it == mapping.end()) {
            ++res.unmatched_records;
            continue;
        }
        if (!cube.has_year(rec.year - opt.sowing_year_offset)) {
            ++res.out_of_range_years;
            continue;
        }
        const auto key = std::pair{it->second, rec.year};
        if (joined.count(key)) {
            ++res.duplicate_records;
            // keep the smaller yield
            joined[key].target = std::min(joined[key].target, rec.yield);
            continue;
        }
        joined.emplace(key, Joined{it->second, rec.year, rec.yield});
    }

    std::map<match::NamedUnit, int> ids;
    for (const auto& [key, _] : joined) ids.emplace(shapes[key.first], 0);
    int next = 0;
    for (auto& [_, id] : ids) id = next++;

    FeatureTable& t = res.table;
    t.eo_names = schema.feature_names();
    t.include_ids = opt.include_year_district;
    for (const auto& [key, j] : joined) {
        FeatureRow row;
        row.district_id = ids.at(shapes[j.shape]);
        row.state = shapes[j.shape].state;
        row.district = shapes[j.shape].district;
        row.year = j.year;
        row.target = j.target;
        row.eo.reserve(schema.feature_count());
        bool missing = false;
        for (std::size_t v = 0; v < schema.variables.size() && !missing; ++v)
            for (std::size_t m = 0; m < schema.months.size(); ++m) {
                const double x = cube.get(j.shape, v, j.year - opt.sowing_year_offset, m);
                if (!std::isfinite(x)) {
                    missing = true;
                    break;
                }
                row.eo.push_back(x);
            }
        if (missing) {
            ++res.excluded_missing;
            continue;
        }
        t.rows.push_back(std::move(row));
    }
    std::sort(t.rows.begin(), t.rows.end(),
              [](const FeatureRow& a, const FeatureRow& b) { return std::tie(a.district_id, a.year) < std::tie(b.district_id, b.year); });
    if (t.rows.empty()) throw InvariantError("feature table join produced no rows");
    if (res.excluded_missing > 0)
        log::info("event=rows_excluded reason=missing_feature count=" + std::to_string(res.excluded_missing));
    return res;
}

/// CSV with a leading `# schema_hash=<hex>` comment line.
inline std::string write_feature_table_csv(const FeatureTable& t) {
    csv::Writer w;
    w.comment("schema_hash=" + to_hex(t.schema_hash()) + " inputs=" + std::to_string(t.input_names().size()));
    w.row(t.all_columns());
    for (const auto& r : t.rows) {
        std::vector<std::string> f{std::to_string(r.district_id), r.state, r.district, std::to_string(r.year)};
        for (double v : r.eo) f.push_back(format_double(v));
        f.push_back(format_double(r.target));
        w.row(f);
    }
    return w.str();
}

/// Train = rows with year <= last_train_year, test = the rest. Order preserved.
inline std::pair<FeatureTable, FeatureTable> chronological_split(const FeatureTable& table, int last_train_year) {
    if (table.rows.empty()) throw std::invalid_argument("cannot split an empty table");
    FeatureTable train{table.eo_names, {}, table.include_ids}, test{table.eo_names, {}, table.include_ids};
    for (const auto& r : table.rows) (r.year <= last_train_year ? train : test).rows.push_back(r);
    if (train.rows.empty()) throw InvariantError("chronological split leaves the training set empty");
    if (test.rows.empty()) throw InvariantError("chronological split leaves the test set empty");
    return {std::move(train), std::move(test)};
}

} // namespace yieldcast::data
