#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "yieldcast/core/error.hpp"
#include "yieldcast/core/text.hpp"

namespace yieldcast::geo {

struct LonLat {
    double lon = 0.0;
    double lat = 0.0;
    friend bool operator==(const LonLat&, const LonLat&) = default;
};

/// Georeferencing of an ESRI ASCII grid. Rows are stored top row first.
struct RasterHeader {
    std::size_t ncols = 0;
    std::size_t nrows = 0;
    double xll = 0.0; ///< longitude of the lower-left corner
    double yll = 0.0; ///< latitude of the lower-left corner
    double cellsize = 0.0;
    double nodata = -9999.0;

    std::size_t size() const noexcept { return ncols * nrows; }

    /// Center of cell (row, col); row 0 is the northernmost row.
    LonLat cell_center(std::size_t row, std::size_t col) const noexcept {
        return {xll + (static_cast<double>(col) + 0.5) * cellsize,
                yll + (static_cast<double>(nrows - row) - 0.5) * cellsize};
    }

    /// Same grid geometry; nodata sentinels may differ.
    bool same_geometry(const RasterHeader& o) const noexcept {
        return ncols == o.ncols && nrows == o.nrows && xll == o.xll && yll == o.yll && cellsize == o.cellsize;
    }

    void validate() const {
        if (ncols < 1 || nrows < 1) throw InvariantError("raster must have at least one row and column");
        if (!(cellsize > 0.0)) throw InvariantError("raster cellsize must be positive");
    }

    friend bool operator==(const RasterHeader&, const RasterHeader&) = default;
};

class RasterGrid {
public:
    RasterGrid() = default;

    RasterGrid(RasterHeader header, std::vector<double> values) : header_(header), values_(std::move(values)) {
        header_.validate();
        if (values_.size() != header_.size())
            throw InvariantError("raster has " + std::to_string(values_.size()) + " values, header implies " +
                                 std::to_string(header_.size()));
    }

    /// Grid filled with one value.
    static RasterGrid filled(const RasterHeader& header, double value) {
        return RasterGrid(header, std::vector<double>(header.size(), value));
    }

    const RasterHeader& header() const noexcept { return header_; }
    const std::vector<double>& values() const noexcept { return values_; }

    double at(std::size_t row, std::size_t col) const { return values_[row * header_.ncols + col]; }
    double& at(std::size_t row, std::size_t col) { return values_[row * header_.ncols + col]; }

    bool is_nodata(double v) const noexcept { return v == header_.nodata || std::isnan(v); }
    bool is_nodata(std::size_t row, std::size_t col) const { return is_nodata(at(row, col)); }

    friend bool operator==(const RasterGrid& a, const RasterGrid& b) {
        if (!(a.header_ == b.header_) || a.values_.size() != b.values_.size()) return false;
        for (std::size_t i = 0; i < a.values_.size(); ++i) {
            const bool na = a.is_nodata(a.values_[i]), nb = b.is_nodata(b.values_[i]);
            if (na != nb || (!na && a.values_[i] != b.values_[i])) return false;
        }
        return true;
    }

private:
    RasterHeader header_;
    std::vector<double> values_;
};

namespace detail {

inline std::vector<std::pair<std::size_t, std::string_view>> numbered_lines(std::string_view text) {
    std::vector<std::pair<std::size_t, std::string_view>> out;
    std::size_t line = 1, start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '\n') {
            std::string_view l = text.substr(start, i - start);
            if (!trim(l).empty()) out.emplace_back(line, l);
            ++line;
            start = i + 1;
        }
    }
    return out;
}

} // namespace detail

/// Parse ESRI ASCII grid text. The six header keys must appear in the order
/// ncols, nrows, xllcorner, yllcorner, cellsize, NODATA_value (keys are
/// case-insensitive), followed by exactly nrows rows of ncols values.
inline RasterGrid parse_ascii_grid(std::string_view text) {
    static constexpr std::string_view keys[] = {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"};
    const auto lines = detail::numbered_lines(text);
    if (lines.size() < 6) throw ParseError("truncated header: expected 6 header lines", lines.empty() ? 1 : lines.back().first);

    double header_vals[6];
    for (std::size_t k = 0; k < 6; ++k) {
        const auto& [lineno, line] = lines[k];
        const auto tok = split_ws(line);
        if (tok.size() != 2 || to_lower(tok[0]) != keys[k])
            throw ParseError("expected header key '" + std::string(keys[k]) + " <value>'", lineno);
        const auto v = parse_double(tok[1]);
        if (!v) throw ParseError("non-numeric header value '" + std::string(tok[1]) + "'", lineno);
        header_vals[k] = *v;
    }

    auto as_count = [&](std::size_t k) {
        const double v = header_vals[k];
        if (v < 1 || v != std::floor(v)) throw ParseError(std::string(keys[k]) + " must be a positive integer", lines[k].first);
        return static_cast<std::size_t>(v);
    };
    RasterHeader h;
    h.ncols = as_count(0);
    h.nrows = as_count(1);
    h.xll = header_vals[2];
    h.yll = header_vals[3];
    h.cellsize = header_vals[4];
    h.nodata = header_vals[5];
    if (!(h.cellsize > 0)) throw ParseError("cellsize must be positive", lines[4].first);

    if (lines.size() - 6 != h.nrows)
        throw ParseError("expected " + std::to_string(h.nrows) + " data rows, found " + std::to_string(lines.size() - 6),
                         lines.back().first);

    std::vector<double> values;
    values.reserve(h.size());
    for (std::size_t r = 0; r < h.nrows; ++r) {
        const auto& [lineno, line] = lines[6 + r];
        const auto tok = split_ws(line);
        if (tok.size() != h.ncols)
            throw ParseError("row " + std::to_string(r) + " has " + std::to_string(tok.size()) + " values, expected " +
                                 std::to_string(h.ncols),
                             lineno);
        for (auto t : tok) {
            const auto v = parse_double(t);
            if (!v) throw ParseError("non-numeric value '" + std::string(t) + "'", lineno);
            values.push_back(*v);
        }
    }
    return RasterGrid(h, std::move(values));
}

inline std::string write_ascii_grid(const RasterGrid& grid) {
    const auto& h = grid.header();
    std::string out;
    out.reserve(h.size() * 8 + 128);
    out += "ncols " + std::to_string(h.ncols) + "\n";
    out += "nrows " + std::to_string(h.nrows) + "\n";
    out += "xllcorner " + format_double(h.xll) + "\n";
    out += "yllcorner " + format_double(h.yll) + "\n";
    out += "cellsize " + format_double(h.cellsize) + "\n";
    out += "NODATA_value " + format_double(h.nodata) + "\n";
    for (std::size_t r = 0; r < h.nrows; ++r) {
        for (std::size_t c = 0; c < h.ncols; ++c) {
            if (c) out.push_back(' ');
            const double v = grid.at(r, c);
            out += grid.is_nodata(v) ? format_double(h.nodata) : format_double(v);
        }
        out.push_back('\n');
    }
    return out;
}

/// Cells whose mask value is nodata or <= min_area become nodata.
inline RasterGrid apply_crop_mask(const RasterGrid& grid, const RasterGrid& mask, double min_area) {
    if (!grid.header().same_geometry(mask.header())) throw SchemaError("crop mask header does not match raster header");
    std::vector<double> out = grid.values();
    const double nodata = grid.header().nodata;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double m = mask.values()[i];
        if (mask.is_nodata(m) || m <= min_area) out[i] = nodata;
    }
    return RasterGrid(grid.header(), std::move(out));
}

} // namespace yieldcast::geo
