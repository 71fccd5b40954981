#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "yieldcast/core/error.hpp"
#include "yieldcast/core/text.hpp"
#include "yieldcast/geodata/districts.hpp"

namespace yieldcast::dashboard {

inline constexpr int schema_version = 1;

struct Metadata {
    std::string run_id;
    std::string model;        ///< leaderboard label of the model behind the predictions
    std::string model_family;
    std::string experiment;
    std::vector<int> test_years;

    friend bool operator==(const Metadata&, const Metadata&) = default;
};

/// One (district, year) prediction. Yields in t/ha, errors and changes in percent.
struct DistrictRecord {
    std::string state;
    std::string district;
    int year = 0;
    std::optional<std::size_t> geometry_id; ///< index into the embedded features; empty when the polygon is missing
    double predicted = 0.0;
    std::optional<double> previous_actual;
    std::optional<double> percent_change; ///< 100·(predicted − previous_actual)/previous_actual
    std::optional<double> actual;
    std::optional<double> ape_percent; ///< 100·|actual − predicted|/actual

    friend bool operator==(const DistrictRecord&, const DistrictRecord&) = default;
};

/// Means over the district records of one (state, year). Each mean skips
/// records where its input is null and is itself null when nothing remains.
struct StateAggregate {
    std::string state;
    int year = 0;
    std::size_t districts = 0;
    std::optional<double> mean_percent_change;
    std::optional<double> mean_ape_percent;

    friend bool operator==(const StateAggregate&, const StateAggregate&) = default;
};

struct YearPoint {
    int year = 0;
    std::size_t records = 0;
    double mean_predicted = 0.0;
    std::optional<double> mean_actual; ///< over records with a known actual

    friend bool operator==(const YearPoint&, const YearPoint&) = default;
};

struct Issue {
    std::string kind; ///< "missing_geometry"
    std::string state;
    std::string district;
    int year = 0;

    friend bool operator==(const Issue&, const Issue&) = default;
};

/// Everything the dashboard renders. Serialized field names match the member
/// names; geometry is a GeoJSON FeatureCollection whose feature i carries
/// properties {id: i, state, district}.
struct DashboardBundle {
    Metadata metadata;
    std::vector<DistrictRecord> records; ///< sorted by (state, district, year)
    std::vector<StateAggregate> states;  ///< sorted by (state, year)
    std::vector<YearPoint> years;        ///< sorted by year
    std::vector<Issue> issues;
    nlohmann::ordered_json geometry;

    friend bool operator==(const DashboardBundle&, const DashboardBundle&) = default;
};

struct Prediction {
    std::string state;
    std::string district;
    int year = 0;
    double predicted = 0.0;
};

/// Observed yields keyed by (state, district, year), covering at least the
/// years before each predicted year.
using ActualTable = std::map<std::tuple<std::string, std::string, int>, double>;

inline std::optional<double> percent_change(double predicted, std::optional<double> previous) {
    if (!previous || !(*previous > 0.0)) return std::nullopt;
    return 100.0 * (predicted - *previous) / *previous;
}

inline DashboardBundle build_bundle(Metadata meta, const std::vector<Prediction>& predictions, const ActualTable& actuals,
                                    const geo::DistrictSet& geometry) {
    DashboardBundle b;
    b.metadata = std::move(meta);

    std::map<std::pair<std::string, std::string>, std::size_t> geo_index;
    b.geometry = nlohmann::ordered_json::object();
    b.geometry["type"] = "FeatureCollection";
    b.geometry["features"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < geometry.size(); ++i) {
        const auto& d = geometry[i];
        geo_index.emplace(std::pair{normalize_name(d.state), normalize_name(d.name)}, i);
        nlohmann::ordered_json f;
        f["type"] = "Feature";
        f["properties"]["id"] = i;
        f["properties"]["state"] = d.state;
        f["properties"]["district"] = d.name;
        f["geometry"] = geo::district_geometry_json(d);
        b.geometry["features"].push_back(std::move(f));
    }

    auto lookup = [&](const std::string& s, const std::string& d, int y) -> std::optional<double> {
        const auto it = actuals.find({s, d, y});
        if (it == actuals.end()) return std::nullopt;
        return it->second;
    };
    std::set<int> years;
    for (const auto& p : predictions) {
        DistrictRecord r;
        r.state = p.state;
        r.district = p.district;
        r.year = p.year;
        r.predicted = p.predicted;
        const auto g = geo_index.find({normalize_name(p.state), normalize_name(p.district)});
        if (g != geo_index.end())
            r.geometry_id = g->second;
        else
            b.issues.push_back({"missing_geometry", p.state, p.district, p.year});
        r.previous_actual = lookup(p.state, p.district, p.year - 1);
        r.percent_change = percent_change(p.predicted, r.previous_actual);
        r.actual = lookup(p.state, p.district, p.year);
        if (r.actual && *r.actual > 0.0) r.ape_percent = 100.0 * std::abs(*r.actual - p.predicted) / *r.actual;
        b.records.push_back(std::move(r));
        years.insert(p.year);
    }
    std::sort(b.records.begin(), b.records.end(), [](const DistrictRecord& x, const DistrictRecord& y) {
        return std::tie(x.state, x.district, x.year) < std::tie(y.state, y.district, y.year);
    });
    for (std::size_t i = 1; i < b.records.size(); ++i) {
        const auto& a = b.records[i - 1];
        const auto& c = b.records[i];
        if (a.state == c.state && a.district == c.district && a.year == c.year)
            throw InvariantError("duplicate prediction for " + c.district + " (" + c.state + ") " + std::to_string(c.year));
    }
    if (b.metadata.test_years.empty()) b.metadata.test_years.assign(years.begin(), years.end());

    struct Acc {
        std::size_t n = 0, n_change = 0, n_ape = 0;
        double change = 0.0, ape = 0.0;
    };
    std::map<std::pair<std::string, int>, Acc> by_state;
    struct YearAcc {
        std::size_t n = 0, n_actual = 0;
        double pred = 0.0, actual = 0.0;
    };
    std::map<int, YearAcc> by_year;
    for (const auto& r : b.records) {
        auto& a = by_state[{r.state, r.year}];
        ++a.n;
        if (r.percent_change) {
            a.change += *r.percent_change;
            ++a.n_change;
        }
        if (r.ape_percent) {
            a.ape += *r.ape_percent;
            ++a.n_ape;
        }
        auto& y = by_year[r.year];
        ++y.n;
        y.pred += r.predicted;
        if (r.actual) {
            y.actual += *r.actual;
            ++y.n_actual;
        }
    }
    for (const auto& [key, a] : by_state) {
        StateAggregate s{key.first, key.second, a.n, std::nullopt, std::nullopt};
        if (a.n_change) s.mean_percent_change = a.change / static_cast<double>(a.n_change);
        if (a.n_ape) s.mean_ape_percent = a.ape / static_cast<double>(a.n_ape);
        b.states.push_back(std::move(s));
    }
    for (const auto& [year, y] : by_year) {
        YearPoint p{year, y.n, y.pred / static_cast<double>(y.n), std::nullopt};
        if (y.n_actual) p.mean_actual = y.actual / static_cast<double>(y.n_actual);
        b.years.push_back(p);
    }
    return b;
}

namespace detail {

inline nlohmann::ordered_json opt(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline std::optional<double> opt_double(const nlohmann::ordered_json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

} // namespace detail

inline nlohmann::ordered_json to_json(const DashboardBundle& b) {
    using J = nlohmann::ordered_json;
    J doc;
    doc["schema_version"] = schema_version;
    J meta;
    meta["run_id"] = b.metadata.run_id;
    meta["model"] = b.metadata.model;
    meta["model_family"] = b.metadata.model_family;
    meta["experiment"] = b.metadata.experiment;
    meta["test_years"] = b.metadata.test_years;
    doc["metadata"] = std::move(meta);
    doc["records"] = J::array();
    for (const auto& r : b.records) {
        J j;
        j["state"] = r.state;
        j["district"] = r.district;
        j["year"] = r.year;
        j["geometry_id"] = r.geometry_id ? J(*r.geometry_id) : J(nullptr);
        j["predicted"] = r.predicted;
        j["previous_actual"] = detail::opt(r.previous_actual);
        j["percent_change"] = detail::opt(r.percent_change);
        j["actual"] = detail::opt(r.actual);
        j["ape_percent"] = detail::opt(r.ape_percent);
        doc["records"].push_back(std::move(j));
    }
    doc["states"] = J::array();
    for (const auto& s : b.states) {
        J j;
        j["state"] = s.state;
        j["year"] = s.year;
        j["districts"] = s.districts;
        j["mean_percent_change"] = detail::opt(s.mean_percent_change);
        j["mean_ape_percent"] = detail::opt(s.mean_ape_percent);
        doc["states"].push_back(std::move(j));
    }
    doc["years"] = J::array();
    for (const auto& y : b.years) {
        J j;
        j["year"] = y.year;
        j["records"] = y.records;
        j["mean_predicted"] = y.mean_predicted;
        j["mean_actual"] = detail::opt(y.mean_actual);
        doc["years"].push_back(std::move(j));
    }
    doc["issues"] = J::array();
    for (const auto& i : b.issues) {
        J j;
        j["kind"] = i.kind;
        j["state"] = i.state;
        j["district"] = i.district;
        j["year"] = i.year;
        doc["issues"].push_back(std::move(j));
    }
    doc["geometry"] = b.geometry;
    return doc;
}

inline std::string serialize(const DashboardBundle& b) { return to_json(b).dump(1) + "\n"; }

inline DashboardBundle from_json(const nlohmann::ordered_json& doc) {
    try {
        if (!doc.is_object() || !doc.contains("schema_version")) throw SchemaError("dashboard file has no schema_version");
        const int v = doc.at("schema_version").get<int>();
        if (v != schema_version)
            throw SchemaError("dashboard schema_version " + std::to_string(v) + " is not supported (expected " +
                              std::to_string(schema_version) + ")");
        DashboardBundle b;
        const auto& m = doc.at("metadata");
        b.metadata.run_id = m.at("run_id").get<std::string>();
        b.metadata.model = m.at("model").get<std::string>();
        b.metadata.model_family = m.at("model_family").get<std::string>();
        b.metadata.experiment = m.at("experiment").get<std::string>();
        b.metadata.test_years = m.at("test_years").get<std::vector<int>>();
        for (const auto& j : doc.at("records")) {
            DistrictRecord r;
            r.state = j.at("state").get<std::string>();
            r.district = j.at("district").get<std::string>();
            r.year = j.at("year").get<int>();
            if (!j.at("geometry_id").is_null()) r.geometry_id = j.at("geometry_id").get<std::size_t>();
            r.predicted = j.at("predicted").get<double>();
            r.previous_actual = detail::opt_double(j, "previous_actual");
            r.percent_change = detail::opt_double(j, "percent_change");
            r.actual = detail::opt_double(j, "actual");
            r.ape_percent = detail::opt_double(j, "ape_percent");
            b.records.push_back(std::move(r));
        }
        for (const auto& j : doc.at("states"))
            b.states.push_back({j.at("state").get<std::string>(), j.at("year").get<int>(), j.at("districts").get<std::size_t>(),
                                detail::opt_double(j, "mean_percent_change"), detail::opt_double(j, "mean_ape_percent")});
        for (const auto& j : doc.at("years"))
            b.years.push_back({j.at("year").get<int>(), j.at("records").get<std::size_t>(), j.at("mean_predicted").get<double>(),
                               detail::opt_double(j, "mean_actual")});
        for (const auto& j : doc.at("issues"))
            b.issues.push_back({j.at("kind").get<std::string>(), j.at("state").get<std::string>(),
                                j.at("district").get<std::string>(), j.at("year").get<int>()});
        b.geometry = doc.at("geometry");
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed dashboard file: ") + e.what());
    }
}

inline DashboardBundle parse(std::string_view text) {
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("dashboard file is not valid JSON: ") + e.what());
    }
    return from_json(doc);
}

} // namespace yieldcast::dashboard
