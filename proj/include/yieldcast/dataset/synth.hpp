#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "yieldcast/core/csv.hpp"
#include "yieldcast/core/error.hpp"
#include "yieldcast/core/rng.hpp"
#include "yieldcast/core/text.hpp"
#include "yieldcast/dataset/feature_table.hpp"
#include "yieldcast/geodata/districts.hpp"
#include "yieldcast/geodata/raster.hpp"
#include "yieldcast/matching/levenshtein.hpp"

namespace yieldcast::data {

struct SynthOptions {
    std::uint64_t seed = 42;
    std::size_t n_districts = 250;
    int first_year = 2001;
    int last_year = 2020;
    double noise_sigma = 0.3;
    double region_sigma = 0.12; ///< sd of the per-state yield offset
};

/// Per-variable marginal of the generated EO fields.
struct SynthVariable {
    const char* name;
    double mean;
    double sd;
    double quantum; ///< cell values are rounded to a multiple of this
};

inline const std::array<SynthVariable, 7>& synth_variables() {
    static const std::array<SynthVariable, 7> v{{
        {"pev", -0.004, 0.001, 1e-6},
        {"t2m", 300.0, 1.5, 1e-3},
        {"tp", 0.005, 0.0, 1e-6}, // log-normal, see eo_value
        {"lai", 2.5, 0.6, 1e-3},
        {"sp", 97000.0, 500.0, 0.1},
        {"swvl1", 0.3, 0.05, 1e-4},
        {"ndvi", 0.5, 0.1, 1e-4},
    }};
    return v;
}

/// Ground truth for one (district, year) of the generated world. Names are the
/// polygon-side names.
struct SynthTruth {
    std::string state;
    std::string district;
    int year = 0;
    double truth = 0.0;    ///< noiseless yield surface
    double observed = 0.0; ///< value written to the yield table
};

/// A generated input bundle held in memory. Rasters are indexed
/// [variable][year − first_year][month − 5] for months May..November.
struct SynthWorld {
    SynthOptions options;
    geo::RasterHeader header;
    geo::DistrictSet districts;
    geo::RasterGrid crop_mask;
    std::vector<std::vector<std::vector<geo::RasterGrid>>> rasters;
    std::string yields_csv;
    std::vector<SynthTruth> truth;
    std::vector<std::string> aliases_applied; ///< yield-side names that differ from their polygon by one edit
    std::vector<std::string> unmatched_names; ///< yield-side districts with no polygon
};

namespace synth_detail {

namespace stream {
inline constexpr std::uint64_t names = 101;
inline constexpr std::uint64_t spatial = 102;
inline constexpr std::uint64_t year_shock = 103;
inline constexpr std::uint64_t monthly = 104;
inline constexpr std::uint64_t mask = 105;
inline constexpr std::uint64_t cell_pattern = 106;
inline constexpr std::uint64_t noise = 107;
inline constexpr std::uint64_t region = 108;
inline constexpr std::uint64_t table = 109;
} // namespace stream

inline constexpr int first_month = 5;
inline constexpr std::size_t n_months = 7;
inline constexpr double cellsize = 0.05;
inline constexpr std::size_t block = 3; ///< districts are block × block cells
inline constexpr double w_spatial = 0.3;
inline constexpr double w_year = 0.3;
inline constexpr double month_rho = 0.3;

inline std::string make_name(Rng& rng) {
    static constexpr std::array<const char*, 24> syl{"ka", "ra", "pur", "na", "gar", "dha", "li", "sa", "bad", "gan", "ja", "ko",
                                                     "ri", "mo", "ta", "vel", "shi", "an", "da", "ur", "bel", "tho", "me", "vi"};
    std::string s;
    while (s.size() < 7 || rng.below(3) != 0) {
        s += syl[rng.below(syl.size())];
        if (s.size() > 12) break;
    }
    s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

inline std::string to_upper(std::string s) {
    for (char& c : s)
        if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    return s;
}

/// One substitution, insertion or deletion after the first character.
inline std::string one_edit(const std::string& s, Rng& rng) {
    const std::size_t pos = 1 + rng.below(s.size() - 1);
    const char letter = static_cast<char>('a' + rng.below(26));
    std::string out = s;
    switch (rng.below(3)) {
    case 0:
        if (out[pos] == letter) return one_edit(s, rng);
        out[pos] = letter;
        break;
    case 1: out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), letter); break;
    default: out.erase(pos, 1); break;
    }
    return out;
}

inline double round_to(double v, double q) { return std::round(v / q) * q; }

inline double population_sd(const std::vector<double>& v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size()));
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace synth_detail

/// Deterministic synthetic world: a grid of square districts grouped into
/// contiguous states, monthly EO rasters for May..November, a crop mask and a
/// yield table whose kharif yields follow
///
///   2.0 + 0.8·z(t2m_aug) + 0.5·z(swvl1_aug) + 0.4·z(lai_aug)·z(t2m_aug)
///       + 0.3·z(ndvi_sep) + r(state) + N(0, noise_sigma)
///
/// where z standardizes a district feature over all generated (district, year)
/// pairs and r(state) ~ N(0, region_sigma) is a fixed offset shared by the
/// districts of a state. The features are the crop-masked (ndvi only) district
/// means of the written rasters, so the pipeline sees exactly the inputs of the
/// surface.
///
/// EO fields are mean + sd·L with L = 0.3·P(district) + 0.3·Y(year) +
/// 0.906·A(month), where P is a smooth spatial field, Y a yearly shock and A an
/// AR(1) process over months; tp uses 0.005·exp(0.5·L). Each cell adds a fixed
/// small per-cell pattern before rounding.
///
/// The yield table also carries the kinds of noise found in real APY extracts:
/// polygon names with one-letter misspellings, upper-case state names, rabi
/// rows, "NA" yields, districts with no polygon, non-positive yields (skipped
/// by the parser) and three extreme outliers in early years.
inline SynthWorld synth_generate(const SynthOptions& opt) {
    using namespace synth_detail;
    if (opt.n_districts < 2) throw std::invalid_argument("synthetic world needs at least 2 districts");
    if (opt.last_year - opt.first_year + 1 < 4) throw std::invalid_argument("synthetic world needs at least 4 years");
    if (!(opt.noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be non-negative");

    SynthWorld w;
    w.options = opt;
    const std::size_t n = opt.n_districts;
    const auto gcols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    const std::size_t grows = (n + gcols - 1) / gcols;
    const std::size_t n_states = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(static_cast<double>(n) / 25.0)));
    const std::size_t n_years = static_cast<std::size_t>(opt.last_year - opt.first_year + 1);
    const auto& vars = synth_variables();

    w.header = geo::RasterHeader{gcols * block, grows * block, 70.0, 8.0, cellsize, -9999.0};
    const auto& h = w.header;

    // names
    Rng name_rng(derive_seed(opt.seed, stream::names, 0));
    std::vector<std::string> state_names;
    std::set<std::string> used;
    while (state_names.size() < n_states) {
        auto s = make_name(name_rng);
        if (used.insert(normalize_name(s)).second) state_names.push_back(s);
    }
    std::vector<std::size_t> state_of(n);
    std::vector<std::string> district_names(n);
    for (std::size_t d = 0; d < n; ++d) {
        state_of[d] = d * n_states / n;
        for (;;) {
            auto s = make_name(name_rng);
            if (used.insert(normalize_name(s)).second) {
                district_names[d] = s;
                break;
            }
        }
    }

    // geometry
    std::vector<geo::District> ds;
    auto edge_lon = [&](std::size_t c) { return h.xll + static_cast<double>(c) * cellsize; };
    auto edge_lat = [&](std::size_t r) { return h.yll + static_cast<double>(h.nrows - r) * cellsize; };
    for (std::size_t d = 0; d < n; ++d) {
        const std::size_t r0 = (d / gcols) * block, c0 = (d % gcols) * block;
        const double west = edge_lon(c0), east = edge_lon(c0 + block);
        const double north = edge_lat(r0), south = edge_lat(r0 + block);
        geo::Ring ring{{west, south}, {east, south}, {east, north}, {west, north}, {west, south}};
        ds.push_back({district_names[d], state_names[state_of[d]], {ring}});
    }
    w.districts = geo::DistrictSet(std::move(ds));
    auto cell_index = [&](std::size_t d, std::size_t k) {
        const std::size_t r = (d / gcols) * block + k / block, c = (d % gcols) * block + k % block;
        return r * h.ncols + c;
    };

    // crop mask: ~20% zero, ~2% nodata, district centers always cropped
    {
        Rng rng(derive_seed(opt.seed, stream::mask, 0));
        std::vector<double> mask(h.size(), h.nodata);
        for (std::size_t d = 0; d < n; ++d)
            for (std::size_t k = 0; k < block * block; ++k) {
                const double u = rng.uniform();
                const double area = round_to(rng.uniform(1.0, 100.0), 0.01);
                double v = u < 0.2 ? 0.0 : u < 0.22 ? h.nodata : area;
                if (k == block * block / 2) v = round_to(50.0 + area / 2.0, 0.01);
                mask[cell_index(d, k)] = v;
            }
        w.crop_mask = geo::RasterGrid(h, std::move(mask));
    }

    // latent EO process
    std::vector<std::vector<double>> spatial(vars.size(), std::vector<double>(n));
    for (std::size_t v = 0; v < vars.size(); ++v) {
        Rng rng(derive_seed(opt.seed, stream::spatial, v));
        std::array<std::array<double, 4>, 4> waves{};
        for (auto& wv : waves) wv = {rng.uniform(0.3, 1.5), rng.uniform(0.3, 1.5), rng.uniform(0.0, 2.0 * std::numbers::pi), rng.normal()};
        for (std::size_t d = 0; d < n; ++d) {
            const double x = static_cast<double>(d % gcols) / static_cast<double>(gcols);
            const double y = static_cast<double>(d / gcols) / static_cast<double>(grows);
            double s = 0.0;
            for (const auto& wv : waves) s += wv[3] * std::sin(2.0 * std::numbers::pi * (wv[0] * x + wv[1] * y) + wv[2]);
            spatial[v][d] = s;
        }
        const double m = mean_of(spatial[v]);
        const double sd = population_sd(spatial[v], m);
        for (double& s : spatial[v]) s = sd > 0.0 ? (s - m) / sd : 0.0;
    }
    std::vector<std::vector<double>> shock(vars.size(), std::vector<double>(n_years));
    for (std::size_t v = 0; v < vars.size(); ++v) {
        Rng rng(derive_seed(opt.seed, stream::year_shock, v));
        for (auto& s : shock[v]) s = rng.normal();
    }
    const double w_month = std::sqrt(1.0 - w_spatial * w_spatial - w_year * w_year);
    auto eo_value = [&](std::size_t v, double latent) {
        if (std::string_view(vars[v].name) == "tp") return vars[v].mean * std::exp(0.5 * latent);
        return vars[v].mean + vars[v].sd * latent;
    };
    std::vector<std::vector<double>> pattern(vars.size(), std::vector<double>(h.size(), 0.0));
    for (std::size_t v = 0; v < vars.size(); ++v) {
        Rng rng(derive_seed(opt.seed, stream::cell_pattern, v));
        for (auto& p : pattern[v]) p = 0.1 * rng.normal();
    }

    // rasters
    w.rasters.assign(vars.size(), std::vector<std::vector<geo::RasterGrid>>(n_years));
    for (std::size_t v = 0; v < vars.size(); ++v) {
        const double cell_scale = std::string_view(vars[v].name) == "tp" ? vars[v].mean * 0.5 : vars[v].sd;
        std::vector<std::vector<double>> values(n_years * n_months, std::vector<double>(h.size(), h.nodata));
        for (std::size_t d = 0; d < n; ++d) {
            Rng rng(derive_seed(opt.seed, stream::monthly, v * n + d));
            for (std::size_t yi = 0; yi < n_years; ++yi) {
                double a = rng.normal();
                for (std::size_t mi = 0; mi < n_months; ++mi) {
                    if (mi > 0) a = month_rho * a + std::sqrt(1.0 - month_rho * month_rho) * rng.normal();
                    const double latent = w_spatial * spatial[v][d] + w_year * shock[v][yi] + w_month * a;
                    const double base = eo_value(v, latent);
                    auto& grid = values[yi * n_months + mi];
                    for (std::size_t k = 0; k < block * block; ++k) {
                        const std::size_t c = cell_index(d, k);
                        grid[c] = round_to(base + cell_scale * pattern[v][c], vars[v].quantum);
                    }
                }
            }
        }
        for (std::size_t yi = 0; yi < n_years; ++yi)
            for (std::size_t mi = 0; mi < n_months; ++mi)
                w.rasters[v][yi].emplace_back(h, std::move(values[yi * n_months + mi]));
    }
    // one district loses its July 2005 NDVI entirely
    if (opt.first_year <= 2005 && opt.last_year >= 2005) {
        const std::size_t d = n / 3;
        auto& g = w.rasters[6][static_cast<std::size_t>(2005 - opt.first_year)][7 - first_month];
        std::vector<double> vals = g.values();
        for (std::size_t k = 0; k < block * block; ++k) vals[cell_index(d, k)] = h.nodata;
        g = geo::RasterGrid(h, std::move(vals));
    }

    // district features entering the yield surface, averaged like the pipeline does
    auto district_mean = [&](std::size_t v, std::size_t yi, int month, std::size_t d, bool masked) {
        const auto& g = w.rasters[v][yi][static_cast<std::size_t>(month - first_month)];
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t k = 0; k < block * block; ++k) {
            const std::size_t c = cell_index(d, k);
            const double x = g.values()[c];
            if (g.is_nodata(x)) continue;
            if (masked) {
                const double m = w.crop_mask.values()[c];
                if (w.crop_mask.is_nodata(m) || m <= 0.0) continue;
            }
            sum += x;
            ++cnt;
        }
        return sum / static_cast<double>(cnt);
    };
    struct Term {
        std::size_t var;
        int month;
        bool masked;
    };
    const std::array<Term, 4> terms{{{1, 8, false}, {5, 8, false}, {3, 8, false}, {6, 9, true}}}; // t2m, swvl1, lai aug; ndvi sep
    std::array<std::vector<double>, 4> feat;
    for (std::size_t t = 0; t < terms.size(); ++t) {
        feat[t].resize(n * n_years);
        for (std::size_t d = 0; d < n; ++d)
            for (std::size_t yi = 0; yi < n_years; ++yi)
                feat[t][d * n_years + yi] = district_mean(terms[t].var, yi, terms[t].month, d, terms[t].masked);
        const double m = mean_of(feat[t]);
        const double sd = population_sd(feat[t], m);
        for (double& x : feat[t]) x = (x - m) / sd;
    }
    std::vector<double> region(n_states);
    {
        Rng rng(derive_seed(opt.seed, stream::region, 0));
        for (double& r : region) r = rng.normal(0.0, opt.region_sigma);
    }
    Rng noise(derive_seed(opt.seed, stream::noise, 0));
    for (std::size_t d = 0; d < n; ++d)
        for (std::size_t yi = 0; yi < n_years; ++yi) {
            const std::size_t i = d * n_years + yi;
            const double zt = feat[0][i], zs = feat[1][i], zl = feat[2][i], zn = feat[3][i];
            const double truth = 2.0 + 0.8 * zt + 0.5 * zs + 0.4 * zl * zt + 0.3 * zn + region[state_of[d]];
            const double eps = noise.normal(0.0, opt.noise_sigma);
            w.truth.push_back({state_names[state_of[d]], district_names[d], opt.first_year + static_cast<int>(yi), truth,
                               truth + eps});
        }
    {
        std::vector<double> obs;
        for (const auto& t : w.truth) obs.push_back(t.observed);
        const double m = mean_of(obs);
        const double sd = population_sd(obs, m);
        for (std::size_t k = 0; k < 3; ++k) {
            const std::size_t d = (k * 7 + 1) * n / 23 % n;
            w.truth[d * n_years + k].observed = m + 10.0 * sd;
        }
    }

    // yield-side names
    Rng trng(derive_seed(opt.seed, stream::table, 0));
    std::vector<std::string> yield_names = district_names;
    for (std::size_t d = 0; d < n; ++d) {
        if (trng.uniform() >= 0.15) continue;
        const std::string variant = one_edit(district_names[d], trng);
        const int own = match::similarity(variant, district_names[d]);
        bool closest = own >= 85;
        for (std::size_t e = 0; e < n && closest; ++e)
            if (e != d && state_of[e] == state_of[d] && match::similarity(variant, district_names[e]) >= own) closest = false;
        if (!closest) continue;
        yield_names[d] = variant;
        w.aliases_applied.push_back(variant);
    }
    std::vector<std::pair<std::size_t, std::string>> extra;
    while (extra.size() < 5) {
        const std::size_t s = trng.below(n_states);
        auto name = make_name(trng);
        bool far = !used.count(normalize_name(name));
        for (std::size_t d = 0; d < n && far; ++d)
            if (state_of[d] == s && match::similarity(name, district_names[d]) >= 70) far = false;
        if (!far) continue;
        used.insert(normalize_name(name));
        extra.emplace_back(s, name);
        w.unmatched_names.push_back(name);
    }

    csv::Writer out;
    out.row({"State", "District", "Crop", "Season", "Year", "Area", "Production", "Yield"});
    auto emit = [&](const std::string& state, const std::string& district, const char* season, int year, double area,
                    std::optional<double> yld) {
        out.row({to_upper(state), district, "Rice", season, std::to_string(year), format_fixed(area, 0),
                 yld ? format_double(*yld * area) : "NA", yld ? format_double(*yld) : "NA"});
    };
    for (std::size_t d = 0; d < n; ++d)
        for (std::size_t yi = 0; yi < n_years; ++yi) {
            const auto& t = w.truth[d * n_years + yi];
            const double area = std::round(trng.uniform(2000.0, 60000.0));
            const bool na = trng.uniform() < 0.004;
            emit(t.state, yield_names[d], trng.below(4) == 0 ? "Kharif     " : "Kharif", t.year, area,
                 na ? std::nullopt : std::optional<double>(t.observed));
            if (trng.uniform() < 0.05)
                emit(t.state, yield_names[d], "Rabi", t.year, std::round(trng.uniform(500.0, 5000.0)), trng.uniform(1.0, 3.0));
        }
    for (const auto& [s, name] : extra)
        for (std::size_t yi = 0; yi < n_years; ++yi)
            emit(state_names[s], name, "Kharif", opt.first_year + static_cast<int>(yi), std::round(trng.uniform(2000.0, 60000.0)),
                 trng.uniform(1.0, 3.0));
    w.yields_csv = out.str();
    return w;
}

inline std::string write_truth_csv(const SynthWorld& w) {
    csv::Writer out;
    out.row({"state", "district", "year", "truth", "observed"});
    for (const auto& t : w.truth)
        out.row({t.state, t.district, std::to_string(t.year), format_double(t.truth), format_double(t.observed)});
    return out.str();
}

inline void write_text_file(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + p.string());
    f << text;
    if (!f) throw Error("failed writing " + p.string());
}

inline std::string month_file(int month) { return (month < 10 ? "0" : "") + std::to_string(month) + ".asc"; }

/// Writes rasters/<var>/<year>/<MM>.asc, cropmask.asc, districts.geojson,
/// yields.csv and truth.csv under `dir`. Returns the files written, relative
/// to `dir`, in write order.
inline std::vector<std::string> write_synth_bundle(const SynthWorld& w, const std::filesystem::path& dir) {
    std::vector<std::string> files;
    auto put = [&](const std::string& rel, const std::string& text) {
        write_text_file(dir / rel, text);
        files.push_back(rel);
    };
    const auto& vars = synth_variables();
    for (std::size_t v = 0; v < vars.size(); ++v)
        for (std::size_t yi = 0; yi < w.rasters[v].size(); ++yi)
            for (std::size_t mi = 0; mi < w.rasters[v][yi].size(); ++mi) {
                const int year = w.options.first_year + static_cast<int>(yi);
                put(std::string("rasters/") + vars[v].name + "/" + std::to_string(year) + "/" +
                        month_file(synth_detail::first_month + static_cast<int>(mi)),
                    geo::write_ascii_grid(w.rasters[v][yi][mi]));
            }
    put("cropmask.asc", geo::write_ascii_grid(w.crop_mask));
    put("districts.geojson", geo::write_geojson_districts(w.districts));
    put("yields.csv", w.yields_csv);
    put("truth.csv", write_truth_csv(w));
    return files;
}

} // namespace yieldcast::data
