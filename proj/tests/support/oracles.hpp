#pragma once

// Independent reference implementations used as test oracles. None of these
// call into the library code they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "yieldcast/geodata/districts.hpp"
#include "yieldcast/geodata/raster.hpp"

namespace oracle {

/// Edit distance by memoized recursion on prefix lengths.
class LevenshteinMemo {
public:
    LevenshteinMemo(std::string a, std::string b) : a_(std::move(a)), b_(std::move(b)) {}

    std::size_t operator()() { return d(a_.size(), b_.size()); }

private:
    std::size_t d(std::size_t i, std::size_t j) {
        if (i == 0) return j;
        if (j == 0) return i;
        const auto key = std::pair{i, j};
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        const std::size_t cost = a_[i - 1] == b_[j - 1] ? 0 : 1;
        const std::size_t v = std::min({d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + cost});
        memo_.emplace(key, v);
        return v;
    }

    std::string a_, b_;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo_;
};

inline std::size_t levenshtein(const std::string& a, const std::string& b) { return LevenshteinMemo(a, b)(); }

/// Classic even-odd ray casting (vertex pairs i, i−1, ray towards +lon).
inline bool inside_ring(double x, double y, const yieldcast::geo::Ring& ring) {
    bool in = false;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        const auto& pi = ring[i];
        const auto& pj = ring[j];
        if ((pi.lat > y) != (pj.lat > y) && x < (pj.lon - pi.lon) * (y - pi.lat) / (pj.lat - pi.lat) + pi.lon) in = !in;
    }
    return in;
}

inline bool inside(double x, double y, const yieldcast::geo::District& d) {
    bool in = false;
    for (const auto& r : d.rings)
        if (inside_ring(x, y, r)) in = !in;
    return in;
}

/// Zonal mean by scanning every cell, computing its center from the header and
/// testing each district in input order.
inline std::optional<double> zonal_mean(const yieldcast::geo::RasterGrid& g, const yieldcast::geo::DistrictSet& set,
                                        std::size_t district) {
    const auto& h = g.header();
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < h.nrows; ++r)
        for (std::size_t c = 0; c < h.ncols; ++c) {
            const double x = h.xll + h.cellsize * (static_cast<double>(c) + 0.5);
            const double y = h.yll + h.cellsize * (static_cast<double>(h.nrows - r) - 0.5);
            std::optional<std::size_t> owner;
            for (std::size_t k = 0; k < set.size() && !owner; ++k)
                if (inside(x, y, set[k])) owner = k;
            if (owner != district) continue;
            const double v = g.at(r, c);
            if (v == h.nodata || std::isnan(v)) continue;
            sum += v;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

/// Star-shaped ring around (cx, cy), closed.
inline yieldcast::geo::Ring star_ring(std::mt19937_64& gen, double cx, double cy, double rmin, double rmax) {
    std::uniform_int_distribution<int> nv(3, 9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = nv(gen);
    std::vector<double> angles(static_cast<std::size_t>(n));
    for (auto& a : angles) a = u(gen) * 2.0 * 3.141592653589793;
    std::sort(angles.begin(), angles.end());
    yieldcast::geo::Ring ring;
    for (double a : angles) {
        const double r = rmin + (rmax - rmin) * u(gen);
        ring.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    ring.push_back(ring.front());
    return ring;
}

/// Random grid with roughly 10% nodata cells and 1–5 random districts, some
/// with a hole or a second part. Districts may overlap.
struct ZonalCase {
    yieldcast::geo::RasterGrid grid;
    yieldcast::geo::DistrictSet districts;
};

inline ZonalCase random_zonal_case(std::uint64_t seed) {
    using namespace yieldcast::geo;
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<std::size_t> dim(1, 30);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RasterHeader h;
    h.ncols = dim(gen);
    h.nrows = dim(gen);
    h.cellsize = 0.01 + u(gen);
    h.xll = -50.0 + 100.0 * u(gen);
    h.yll = -50.0 + 100.0 * u(gen);
    h.nodata = -9999.0;
    std::vector<double> vals(h.size());
    for (auto& v : vals) v = u(gen) < 0.1 ? h.nodata : std::round((u(gen) * 200.0 - 100.0) * 1000.0) / 1000.0;
    RasterGrid grid(h, std::move(vals));

    const double w = h.cellsize * static_cast<double>(h.ncols);
    const double ht = h.cellsize * static_cast<double>(h.nrows);
    const double span = std::max(w, ht);
    std::uniform_int_distribution<int> nd(1, 5);
    const int n = nd(gen);
    std::vector<District> ds;
    for (int k = 0; k < n; ++k) {
        District d;
        d.name = "d" + std::to_string(k);
        d.state = "s";
        const double cx = h.xll + w * (u(gen) * 1.2 - 0.1);
        const double cy = h.yll + ht * (u(gen) * 1.2 - 0.1);
        const double rmax = span * (0.15 + 0.6 * u(gen));
        d.rings.push_back(star_ring(gen, cx, cy, rmax * 0.4, rmax));
        const double pick = u(gen);
        if (pick < 0.3)
            d.rings.push_back(star_ring(gen, cx, cy, rmax * 0.05, rmax * 0.3));
        else if (pick < 0.5)
            d.rings.push_back(star_ring(gen, cx + span * 0.5, cy - span * 0.3, rmax * 0.1, rmax * 0.4));
        ds.push_back(std::move(d));
    }
    return {std::move(grid), DistrictSet(std::move(ds))};
}

/// Shapley values as the average marginal contribution over every ordering
/// of `features` (m! orderings, so keep m small). `f` maps a full row to a
/// prediction; absent features are filled from each background row in turn.
template <class F>
std::vector<double> shapley_by_orderings(const F& f, const std::vector<double>& x,
                                         const std::vector<std::vector<double>>& background,
                                         std::vector<std::size_t> features) {
    auto value = [&](const std::vector<bool>& present) {
        long double sum = 0;
        for (const auto& b : background) {
            std::vector<double> h(x.size());
            for (std::size_t j = 0; j < x.size(); ++j) h[j] = present[j] ? x[j] : b[j];
            sum += f(h);
        }
        return static_cast<double>(sum / static_cast<long double>(background.size()));
    };
    std::vector<bool> base(x.size(), true);
    for (std::size_t j : features) base[j] = false;
    std::vector<long double> phi(x.size(), 0);
    std::sort(features.begin(), features.end());
    std::size_t orderings = 0;
    do {
        auto present = base;
        double prev = value(present);
        for (std::size_t j : features) {
            present[j] = true;
            const double cur = value(present);
            phi[j] += cur - prev;
            prev = cur;
        }
        ++orderings;
    } while (std::next_permutation(features.begin(), features.end()));
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = static_cast<double>(phi[j] / static_cast<long double>(orderings));
    return out;
}

} // namespace oracle
