#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "yieldcast/core/error.hpp"
#include "yieldcast/core/log.hpp"
#include "yieldcast/geodata/districts.hpp"
#include "yieldcast/geodata/raster.hpp"

namespace yieldcast::geo {

/// Per-cell district index, precomputed once so every zonal pass is one scan.
struct LabelGrid {
    static constexpr std::int32_t unassigned = -1;

    RasterHeader header;
    std::vector<std::int32_t> labels;
    std::size_t overlap_cells = 0; ///< cells whose center fell in more than one district

    std::int32_t at(std::size_t row, std::size_t col) const { return labels[row * header.ncols + col]; }
};

/// Label each cell with the first district (input order) containing its center.
///
/// Works row by row: the crossings of every district edge with the row's center
/// parallel are collected once, and a cell is inside when an odd number of them
/// lie strictly east of its center. This is the same ray test as
/// point_in_polygon, evaluated for a whole row at a time.
inline LabelGrid rasterize_districts(const RasterHeader& header, const DistrictSet& districts) {
    header.validate();
    LabelGrid out{header, std::vector<std::int32_t>(header.size(), LabelGrid::unassigned), 0};

    std::vector<BoundingBox> boxes;
    boxes.reserve(districts.size());
    for (const auto& d : districts) boxes.push_back(d.bounds());

    std::vector<double> crossings;
    for (std::size_t r = 0; r < header.nrows; ++r) {
        const double lat = header.cell_center(r, 0).lat;
        for (std::size_t di = 0; di < districts.size(); ++di) {
            const auto& box = boxes[di];
            if (lat < box.min_lat || lat > box.max_lat) continue;
            crossings.clear();
            for (const auto& ring : districts[di].rings)
                for (std::size_t i = 0; i + 1 < ring.size(); ++i)
                    if (edge_straddles(ring[i], ring[i + 1], lat))
                        crossings.push_back(edge_crossing_lon(ring[i], ring[i + 1], lat));
            if (crossings.empty()) continue;
            std::sort(crossings.begin(), crossings.end());

            for (std::size_t c = 0; c < header.ncols; ++c) {
                const double lon = header.cell_center(r, c).lon;
                if (lon < box.min_lon || lon > box.max_lon) continue;
                const auto east = crossings.end() - std::upper_bound(crossings.begin(), crossings.end(), lon);
                if (east % 2 == 0) continue;
                auto& label = out.labels[r * header.ncols + c];
                if (label == LabelGrid::unassigned)
                    label = static_cast<std::int32_t>(di);
                else
                    ++out.overlap_cells;
            }
        }
    }
    if (out.overlap_cells > 0)
        log::warn("event=district_overlap cells=" + std::to_string(out.overlap_cells) + " rule=first_in_input_order");
    return out;
}

/// Mean of the non-nodata cells labelled `district_index`; nullopt when there are none.
inline std::optional<double> zonal_mean(const RasterGrid& grid, const LabelGrid& labels, std::size_t district_index) {
    if (!grid.header().same_geometry(labels.header)) throw SchemaError("label grid does not match raster header");
    const auto want = static_cast<std::int32_t>(district_index);
    double sum = 0.0;
    std::size_t n = 0;
    const auto& v = grid.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (labels.labels[i] != want || grid.is_nodata(v[i])) continue;
        sum += v[i];
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

/// zonal_mean for every district in one scan. Accumulation order is row-major,
/// identical to zonal_mean, so results agree exactly.
inline std::vector<std::optional<double>> zonal_means(const RasterGrid& grid, const LabelGrid& labels,
                                                      std::size_t district_count) {
    if (!grid.header().same_geometry(labels.header)) throw SchemaError("label grid does not match raster header");
    std::vector<double> sum(district_count, 0.0);
    std::vector<std::size_t> n(district_count, 0);
    const auto& v = grid.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto l = labels.labels[i];
        if (l < 0 || static_cast<std::size_t>(l) >= district_count || grid.is_nodata(v[i])) continue;
        sum[static_cast<std::size_t>(l)] += v[i];
        ++n[static_cast<std::size_t>(l)];
    }
    std::vector<std::optional<double>> out(district_count);
    for (std::size_t d = 0; d < district_count; ++d)
        if (n[d] > 0) out[d] = sum[d] / static_cast<double>(n[d]);
    return out;
}

} // namespace yieldcast::geo
