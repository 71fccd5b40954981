#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "yieldcast/core/error.hpp"
#include "yieldcast/core/text.hpp"
#include "yieldcast/geodata/raster.hpp"

namespace yieldcast::geo {

/// Closed ring: first vertex equals last, at least 4 vertices.
using Ring = std::vector<LonLat>;

struct BoundingBox {
    double min_lon = std::numeric_limits<double>::infinity();
    double min_lat = std::numeric_limits<double>::infinity();
    double max_lon = -std::numeric_limits<double>::infinity();
    double max_lat = -std::numeric_limits<double>::infinity();

    void extend(const LonLat& p) {
        min_lon = std::min(min_lon, p.lon);
        max_lon = std::max(max_lon, p.lon);
        min_lat = std::min(min_lat, p.lat);
        max_lat = std::max(max_lat, p.lat);
    }
};

/// One administrative unit. Rings are combined with the even-odd rule, so outer
/// rings, holes and the parts of a multipolygon all live in one flat list.
struct District {
    std::string name;
    std::string state;
    std::vector<Ring> rings;

    BoundingBox bounds() const {
        BoundingBox b;
        for (const auto& r : rings)
            for (const auto& p : r) b.extend(p);
        return b;
    }

    friend bool operator==(const District&, const District&) = default;
};

inline void validate_ring(const Ring& ring, std::string_view owner) {
    if (ring.size() < 4) throw InvariantError("ring of '" + std::string(owner) + "' has fewer than 4 vertices");
    if (!(ring.front() == ring.back())) throw InvariantError("ring of '" + std::string(owner) + "' is not closed");
}

class DistrictSet {
public:
    DistrictSet() = default;

    explicit DistrictSet(std::vector<District> districts) : districts_(std::move(districts)) {
        std::set<std::pair<std::string, std::string>> seen;
        for (const auto& d : districts_) {
            if (d.rings.empty()) throw InvariantError("district '" + d.name + "' has no geometry");
            for (const auto& r : d.rings) validate_ring(r, d.name);
            if (!seen.emplace(normalize_name(d.state), normalize_name(d.name)).second)
                throw InvariantError("duplicate district '" + d.name + "' in state '" + d.state + "'");
        }
    }

    std::size_t size() const noexcept { return districts_.size(); }
    bool empty() const noexcept { return districts_.empty(); }
    const District& operator[](std::size_t i) const { return districts_[i]; }
    auto begin() const noexcept { return districts_.begin(); }
    auto end() const noexcept { return districts_.end(); }

private:
    std::vector<District> districts_;
};

/// Property keys that carry district and state names (GADM ADM2 defaults).
struct GeoJsonKeys {
    std::string district = "NAME_2";
    std::string state = "NAME_1";
};

namespace detail {

inline Ring parse_ring(const nlohmann::json& coords, const std::string& owner) {
    if (!coords.is_array()) throw ParseError("ring of '" + owner + "' is not an array");
    Ring ring;
    ring.reserve(coords.size());
    for (const auto& pos : coords) {
        if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
            throw ParseError("invalid position in ring of '" + owner + "'");
        ring.push_back({pos[0].get<double>(), pos[1].get<double>()});
    }
    validate_ring(ring, owner);
    return ring;
}

inline void append_polygon(const nlohmann::json& polygon, const std::string& owner, std::vector<Ring>& rings) {
    if (!polygon.is_array() || polygon.empty()) throw ParseError("empty polygon in '" + owner + "'");
    for (const auto& r : polygon) rings.push_back(parse_ring(r, owner));
}

} // namespace detail

/// Parse a GeoJSON FeatureCollection of Polygon / MultiPolygon features.
inline DistrictSet parse_geojson_districts(std::string_view text, const GeoJsonKeys& keys = {}) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
        !doc["features"].is_array())
        throw ParseError("expected a GeoJSON FeatureCollection");

    std::vector<District> out;
    std::size_t index = 0;
    for (const auto& f : doc["features"]) {
        const auto& props = f.contains("properties") ? f["properties"] : nlohmann::json();
        auto name_of = [&](const std::string& key) {
            if (!props.is_object() || !props.contains(key) || !props[key].is_string())
                throw ParseError("feature " + std::to_string(index) + " is missing string property '" + key + "'");
            return props[key].get<std::string>();
        };
        District d;
        d.name = name_of(keys.district);
        d.state = name_of(keys.state);
        if (!f.contains("geometry") || !f["geometry"].is_object())
            throw ParseError("feature '" + d.name + "' has no geometry");
        const auto& g = f["geometry"];
        const std::string type = g.value("type", "");
        const auto& coords = g.contains("coordinates") ? g["coordinates"] : nlohmann::json();
        if (type == "Polygon") {
            detail::append_polygon(coords, d.name, d.rings);
        } else if (type == "MultiPolygon") {
            if (!coords.is_array()) throw ParseError("invalid MultiPolygon in '" + d.name + "'");
            for (const auto& poly : coords) detail::append_polygon(poly, d.name, d.rings);
        } else {
            throw ParseError("unsupported geometry type '" + type + "' in '" + d.name + "'");
        }
        out.push_back(std::move(d));
        ++index;
    }
    return DistrictSet(std::move(out));
}

/// Geometry of one district as a GeoJSON geometry object. A single ring becomes a
/// Polygon; several rings become a MultiPolygon of one ring each, which keeps the
/// even-odd semantics on round trip.
inline nlohmann::ordered_json district_geometry_json(const District& d) {
    auto ring_json = [](const Ring& r) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& p : r) arr.push_back({p.lon, p.lat});
        return arr;
    };
    nlohmann::ordered_json g;
    if (d.rings.size() == 1) {
        g["type"] = "Polygon";
        g["coordinates"] = nlohmann::ordered_json::array({ring_json(d.rings[0])});
    } else {
        g["type"] = "MultiPolygon";
        auto polys = nlohmann::ordered_json::array();
        for (const auto& r : d.rings) polys.push_back(nlohmann::ordered_json::array({ring_json(r)}));
        g["coordinates"] = std::move(polys);
    }
    return g;
}

inline std::string write_geojson_districts(const DistrictSet& set, const GeoJsonKeys& keys = {}) {
    nlohmann::ordered_json doc;
    doc["type"] = "FeatureCollection";
    doc["features"] = nlohmann::ordered_json::array();
    for (const auto& d : set) {
        nlohmann::ordered_json f;
        f["type"] = "Feature";
        f["properties"][keys.state] = d.state;
        f["properties"][keys.district] = d.name;
        f["geometry"] = district_geometry_json(d);
        doc["features"].push_back(std::move(f));
    }
    return doc.dump(1);
}

/// Longitude where edge (a, b) crosses the parallel `lat`. Only meaningful when
/// the edge straddles `lat` under the half-open rule of `edge_straddles`.
inline double edge_crossing_lon(const LonLat& a, const LonLat& b, double lat) noexcept {
    return a.lon + (lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
}

/// Half-open straddle test: lat in [min(a.lat, b.lat), max(a.lat, b.lat)).
/// Horizontal edges never straddle.
inline bool edge_straddles(const LonLat& a, const LonLat& b, double lat) noexcept {
    return (a.lat > lat) != (b.lat > lat);
}

/// Even-odd membership with a ray cast towards +lon. A point exactly on an edge
/// crossing is not counted as a crossing (strict `<`), which makes the result
/// reproducible bit for bit.
inline bool point_in_polygon(const LonLat& pt, const std::vector<Ring>& rings) noexcept {
    bool inside = false;
    for (const auto& ring : rings) {
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
            const LonLat& a = ring[i];
            const LonLat& b = ring[i + 1];
            if (edge_straddles(a, b, pt.lat) && pt.lon < edge_crossing_lon(a, b, pt.lat)) inside = !inside;
        }
    }
    return inside;
}

} // namespace yieldcast::geo
