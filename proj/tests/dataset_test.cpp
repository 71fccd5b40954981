#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "yieldcast/dataset/feature_table.hpp"
#include "yieldcast/dataset/synth.hpp"
#include "yieldcast/dataset/yield_records.hpp"
#include "yieldcast/geodata/zonal.hpp"

using namespace yieldcast;
using namespace yieldcast::data;

namespace {

const std::string header = "State,District,Crop,Season,Year,Area,Production,Yield\n";

YieldRecord rec(std::string district, int year, double y, std::string state = "S") {
    return YieldRecord{std::move(state), std::move(district), "kharif", year, 100.0, 100.0 * y, y};
}

/// Cube where every value is a function of its coordinates, so rows are traceable.
ZonalCube traceable_cube(std::size_t districts, int first, int last) {
    ZonalCube cube(districts, EoSchema{}, first, last);
    const auto& s = cube.schema();
    for (std::size_t d = 0; d < districts; ++d)
        for (std::size_t v = 0; v < s.variables.size(); ++v)
            for (int y = first; y <= last; ++y)
                for (std::size_t m = 0; m < s.months.size(); ++m)
                    cube.set(d, v, y, m, 1000.0 * static_cast<double>(d) + 100.0 * static_cast<double>(v) + (y - 2000) + 0.01 * static_cast<double>(m));
    return cube;
}

} // namespace

TEST(ParseYields, OneWellFormedRow) {
    const auto r = parse_yield_csv(header + "Gujarat,Kheda,Rice,Kharif,2019,1000,2500,2.5\n");
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0], (YieldRecord{"Gujarat", "Kheda", "kharif", 2019, 1000, 2500, 2.5}));
    EXPECT_EQ(r.skipped, 0u);
}

TEST(ParseYields, NaYieldIsSkippedAndCounted) {
    const auto r = parse_yield_csv(header + "G,A,Rice,Kharif,2019,1000,2500,2.5\nG,B,Rice,Kharif,2019,1000,NA,NA\n");
    EXPECT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.skipped, 1u);
}

TEST(ParseYields, SeasonFilterKeepsKharifOnly) {
    const auto r = parse_yield_csv(header +
                                   "G,A,Rice,Kharif     ,2019,1,1,1\nG,A,Rice,Rabi,2019,1,1,1\nG,B,Rice,KHARIF,2019,1,1,1\n"
                                   "G,C,Rice,Whole Year,2019,1,1,1\n");
    EXPECT_EQ(r.records.size(), 2u);
    EXPECT_EQ(r.filtered, 2u);
    for (const auto& x : r.records) EXPECT_EQ(x.season, "kharif");
}

TEST(ParseYields, RejectsBadRowsAndMissingColumns) {
    const auto r = parse_yield_csv(header + "G,A,Rice,Kharif,2019,1,1,1\nG,A,Rice,Kharif,1900,1,1,1\nG,A,Rice,Kharif,2019,0,1,1\n"
                                            "G,A,Rice,Kharif,2019,1,1,-2\nG,A,Rice,Kharif\n,A,Rice,Kharif,2019,1,1,1\n");
    EXPECT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.skipped, 5u);
    EXPECT_THROW(parse_yield_csv("State,District,Year\nA,B,2019\n"), ParseError);
    EXPECT_THROW(parse_yield_csv(""), ParseError);
    EXPECT_THROW(parse_yield_csv(header + "G,A,Rice,Kharif,2019,1,1,NA\n"), ParseError);
}

TEST(ParseYields, CustomColumnNamesAndCropFilter) {
    YieldParseOptions opt;
    opt.columns.state = "st";
    opt.columns.district = "dist";
    opt.columns.yield = "y";
    opt.crop = "rice";
    const auto r = parse_yield_csv("st,dist,Crop,Season,Year,Area,y\nG,A,Rice,Kharif,2019,1,2\nG,A,Maize,Kharif,2019,1,3\n", opt);
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0].yield, 2.0);
}

TEST(Outliers, FiftyAmongTwosIsRemoved) {
    std::vector<YieldRecord> recs;
    for (int i = 0; i < 100; ++i) recs.push_back(rec("d" + std::to_string(i), 2010, 2.0));
    recs.push_back(rec("x", 2010, 50.0));
    const auto out = remove_yield_outliers(recs, 3.0);
    EXPECT_EQ(out.kept.size(), 100u);
    ASSERT_EQ(out.removed.size(), 1u);
    EXPECT_EQ(out.removed[0].yield, 50.0);
}

TEST(Outliers, IdenticalYieldsKeepEverything) {
    std::vector<YieldRecord> recs(20, rec("d", 2010, 1.7));
    EXPECT_EQ(remove_yield_outliers(recs).kept.size(), 20u);
}

TEST(Outliers, InfiniteMultiplierDisablesFilter) {
    std::vector<YieldRecord> recs{rec("a", 1, 1), rec("b", 1, 1000)};
    const auto out = remove_yield_outliers(recs, std::numeric_limits<double>::infinity());
    EXPECT_EQ(out.kept, recs);
    EXPECT_THROW(remove_yield_outliers({rec("a", 1, 1)}), std::invalid_argument);
}

TEST(Outliers, PerDistrictScopeUsesEachDistrictsOwnSpread) {
    std::vector<YieldRecord> recs;
    for (int i = 0; i < 30; ++i) recs.push_back(rec("low", 2000 + i, 1.0 + 0.01 * (i % 3)));
    for (int i = 0; i < 30; ++i) recs.push_back(rec("high", 2000 + i, 5.0 + 0.01 * (i % 3)));
    recs.push_back(rec("low", 2040, 1.5));
    EXPECT_TRUE(remove_yield_outliers(recs, 3.0, OutlierScope::global).removed.empty());
    const auto per = remove_yield_outliers(recs, 3.0, OutlierScope::per_district);
    ASSERT_EQ(per.removed.size(), 1u);
    EXPECT_EQ(per.removed[0].year, 2040);
}

TEST(Outliers, InjectedTenSigmaRecordOnRandomData) {
    std::mt19937_64 gen(123);
    for (int t = 0; t < 50; ++t) {
        std::uniform_int_distribution<int> size(20, 300);
        std::uniform_real_distribution<double> base(0.5, 4.0);
        const int n = size(gen);
        std::vector<YieldRecord> recs;
        double sum = 0, ss = 0;
        for (int i = 0; i < n; ++i) {
            recs.push_back(rec("d" + std::to_string(i), 2001, base(gen)));
            sum += recs.back().yield;
        }
        const double mean = sum / n;
        for (const auto& r : recs) ss += (r.yield - mean) * (r.yield - mean);
        recs.insert(recs.begin() + n / 2, rec("spike", 2001, mean + 10.0 * std::sqrt(ss / n)));
        const auto out = remove_yield_outliers(recs);
        ASSERT_EQ(out.removed.size(), 1u);
        EXPECT_EQ(out.removed[0].district, "spike");
        EXPECT_EQ(out.kept.size(), static_cast<std::size_t>(n));
    }
}

TEST(MonthlyMean, Examples) {
    std::vector<DatedValue> constant, ramp;
    for (int d = 1; d <= 30; ++d) {
        constant.push_back({{2010, 6, d}, 300.0});
        ramp.push_back({{2010, 6, d}, static_cast<double>(d)});
    }
    EXPECT_EQ(*monthly_mean(constant, 6, 2010), 300.0);
    EXPECT_EQ(*monthly_mean(ramp, 6, 2010), 15.5);
    EXPECT_FALSE(monthly_mean(ramp, 7, 2010));
    EXPECT_FALSE(monthly_mean(ramp, 6, 2011));
}

TEST(MonthlyMean, SkipsNonFiniteValues) {
    std::vector<DatedValue> s{{{2010, 6, 1}, 1.0}, {{2010, 6, 2}, std::nan("")}, {{2010, 6, 3}, 3.0}};
    EXPECT_EQ(*monthly_mean(s, 6, 2010), 2.0);
}

TEST(FeatureTable, SchemaHas49VariableMajorColumns) {
    const EoSchema s;
    const auto names = s.feature_names();
    ASSERT_EQ(names.size(), 49u);
    EXPECT_EQ(names.front(), "pev_may");
    EXPECT_EQ(names[1], "pev_jun");
    EXPECT_EQ(names.back(), "ndvi_nov");
    EXPECT_EQ(std::count(names.begin(), names.end(), "t2m_aug"), 1);
}

TEST(FeatureTable, TwoDistrictsThreeYearsComplete) {
    const auto cube = traceable_cube(2, 2001, 2003);
    const std::vector<match::NamedUnit> shapes{{"S", "A"}, {"S", "B"}};
    std::vector<YieldRecord> yields;
    for (int y = 2001; y <= 2003; ++y) {
        yields.push_back(rec("B", y, 2.0 + y - 2001, "s"));
        yields.push_back(rec("A", y, 1.0, "s"));
    }
    const std::map<match::NamedUnit, std::size_t> mapping{{{"s", "A"}, 0}, {{"s", "B"}, 1}};
    const auto res = build_feature_table(cube, shapes, yields, mapping);
    const auto& t = res.table;
    ASSERT_EQ(t.rows.size(), 6u);
    EXPECT_EQ(t.eo_names.size(), 49u);
    EXPECT_EQ(t.all_columns().size(), 49u + 5u);
    EXPECT_EQ(t.input_names().size(), 51u);
    EXPECT_EQ(t.rows[0].district, "A");
    EXPECT_EQ(t.rows[3].district, "B");
    EXPECT_EQ(t.rows[4].year, 2002);
    EXPECT_EQ(t.rows[4].target, 3.0);
    // ndvi (v=6) jul (m=2) of district B, 2002
    EXPECT_EQ(t.rows[4].eo[6 * 7 + 2], 1000.0 + 600.0 + 2 + 0.02);
    const auto X = t.inputs();
    EXPECT_EQ(X.names()[0], "year");
    EXPECT_EQ(X(4, 0), 2002);
    EXPECT_EQ(X(4, 1), 1);
}

TEST(FeatureTable, MissingNdviJulyExcludesOnlyThatRow) {
    auto cube = traceable_cube(2, 2004, 2006);
    cube.set(1, 6, 2005, 2, std::nullopt);
    const std::vector<match::NamedUnit> shapes{{"S", "A"}, {"S", "B"}};
    std::vector<YieldRecord> yields;
    for (int y = 2004; y <= 2006; ++y)
        for (const char* d : {"A", "B"}) yields.push_back(rec(d, y, 2.0));
    const std::map<match::NamedUnit, std::size_t> mapping{{{"S", "A"}, 0}, {{"S", "B"}, 1}};
    std::vector<std::string> logs;
    auto prev = log::set_sink([&](log::Level, std::string_view m) { logs.emplace_back(m); });
    const auto res = build_feature_table(cube, shapes, yields, mapping);
    log::set_sink(prev);
    EXPECT_EQ(res.table.rows.size(), 5u);
    EXPECT_EQ(res.excluded_missing, 1u);
    for (const auto& r : res.table.rows) EXPECT_FALSE(r.district == "B" && r.year == 2005);
    EXPECT_NE(std::find(logs.begin(), logs.end(), "event=rows_excluded reason=missing_feature count=1"), logs.end());
}

TEST(FeatureTable, IdentifierToggleChangesInputWidth) {
    const auto cube = traceable_cube(1, 2001, 2002);
    const std::vector<match::NamedUnit> shapes{{"S", "A"}};
    const std::map<match::NamedUnit, std::size_t> mapping{{{"S", "A"}, 0}};
    const std::vector<YieldRecord> yields{rec("A", 2001, 1), rec("A", 2002, 2)};
    const auto with = build_feature_table(cube, shapes, yields, mapping, {true, 0}).table;
    const auto without = build_feature_table(cube, shapes, yields, mapping, {false, 0}).table;
    EXPECT_EQ(with.inputs().cols(), 51u);
    EXPECT_EQ(without.inputs().cols(), 49u);
    EXPECT_NE(with.schema_hash(), without.schema_hash());
    EXPECT_EQ(with.with_ids(false).schema_hash(), without.schema_hash());
}

TEST(FeatureTable, DuplicatesUnmatchedAndYearOffset) {
    const auto cube = traceable_cube(1, 2001, 2003);
    const std::vector<match::NamedUnit> shapes{{"S", "A"}};
    const std::map<match::NamedUnit, std::size_t> mapping{{{"S", "A"}, 0}};
    const std::vector<YieldRecord> yields{rec("A", 2002, 3.0), rec("A", 2002, 2.0), rec("Z", 2002, 1.0), rec("A", 2001, 1.0)};
    const auto res = build_feature_table(cube, shapes, yields, mapping, {true, 1});
    EXPECT_EQ(res.duplicate_records, 1u);
    EXPECT_EQ(res.unmatched_records, 1u);
    EXPECT_EQ(res.out_of_range_years, 1u); // 2001 needs 2000 features
    ASSERT_EQ(res.table.rows.size(), 1u);
    EXPECT_EQ(res.table.rows[0].target, 2.0);
    EXPECT_EQ(res.table.rows[0].eo[0], 1.0); // features from 2001
}

TEST(FeatureTable, CsvCarriesSchemaHash) {
    const auto cube = traceable_cube(1, 2001, 2001);
    const auto t = build_feature_table(cube, {{"S", "A"}}, {rec("A", 2001, 1.25)}, {{{"S", "A"}, 0}}).table;
    const auto text = write_feature_table_csv(t);
    EXPECT_EQ(text.rfind("# schema_hash=" + to_hex(t.schema_hash()), 0), 0u);
    const auto rows = csv::parse(text);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].fields.size(), 54u);
    EXPECT_EQ(rows[1].fields.back(), "1.25");
}

TEST(Split, LastTwoYearsAreTest) {
    const auto cube = traceable_cube(3, 2001, 2020);
    std::vector<YieldRecord> yields;
    for (const char* d : {"A", "B", "C"})
        for (int y = 2001; y <= 2020; ++y) yields.push_back(rec(d, y, 2.0));
    const std::vector<match::NamedUnit> shapes{{"S", "A"}, {"S", "B"}, {"S", "C"}};
    const std::map<match::NamedUnit, std::size_t> mapping{{{"S", "A"}, 0}, {{"S", "B"}, 1}, {{"S", "C"}, 2}};
    const auto t = build_feature_table(cube, shapes, yields, mapping).table;
    const auto [train, test] = chronological_split(t, 2018);
    EXPECT_EQ(train.rows.size(), 54u);
    EXPECT_EQ(test.rows.size(), 6u);
    for (const auto& r : train.rows) EXPECT_LE(r.year, 2018);
    for (const auto& r : test.rows) EXPECT_TRUE(r.year == 2019 || r.year == 2020);
    EXPECT_THROW(chronological_split(t, 2020), InvariantError);
    EXPECT_THROW(chronological_split(t, 2000), InvariantError);
}

TEST(Synth, SameSeedIsByteIdentical) {
    SynthOptions o;
    o.n_districts = 30;
    o.first_year = 2003;
    o.last_year = 2008;
    const auto a = synth_generate(o), b = synth_generate(o);
    EXPECT_EQ(a.yields_csv, b.yields_csv);
    EXPECT_EQ(write_truth_csv(a), write_truth_csv(b));
    EXPECT_EQ(geo::write_geojson_districts(a.districts), geo::write_geojson_districts(b.districts));
    for (std::size_t v = 0; v < a.rasters.size(); ++v)
        for (std::size_t y = 0; y < a.rasters[v].size(); ++y)
            for (std::size_t m = 0; m < a.rasters[v][y].size(); ++m)
                ASSERT_EQ(geo::write_ascii_grid(a.rasters[v][y][m]), geo::write_ascii_grid(b.rasters[v][y][m]));
    o.seed = 43;
    EXPECT_NE(synth_generate(o).yields_csv, a.yields_csv);
}

TEST(Synth, ZeroNoiseYieldsLieOnTheSurface) {
    SynthOptions o;
    o.n_districts = 40;
    o.noise_sigma = 0.0;
    o.first_year = 2001;
    o.last_year = 2006;
    const auto w = synth_generate(o);
    std::size_t off = 0;
    for (const auto& t : w.truth)
        if (t.observed != t.truth) ++off;
    EXPECT_EQ(off, 3u); // the three injected outliers

    // every parsed kharif row of a polygon-named district carries the observed value
    std::map<std::tuple<std::string, std::string, int>, double> observed;
    for (const auto& t : w.truth) observed[{normalize_name(t.state), t.district, t.year}] = t.observed;
    YieldParseOptions opt;
    opt.min_year = o.first_year;
    opt.max_year = o.last_year;
    const auto parsed = parse_yield_csv(w.yields_csv, opt);
    std::size_t checked = 0;
    for (const auto& r : parsed.records) {
        const auto it = observed.find({normalize_name(r.state), r.district, r.year});
        if (it == observed.end()) continue;
        EXPECT_EQ(r.yield, it->second);
        ++checked;
    }
    EXPECT_GT(checked, w.truth.size() / 2);
}

TEST(Synth, SurfaceIsReproducedFromWrittenRasters) {
    SynthOptions o;
    o.n_districts = 25;
    o.first_year = 2010;
    o.last_year = 2014;
    o.noise_sigma = 0.0;
    o.region_sigma = 0.0;
    const auto w = synth_generate(o);
    const auto labels = geo::rasterize_districts(w.header, w.districts);
    const auto masked = [&](const geo::RasterGrid& g) { return geo::apply_crop_mask(g, w.crop_mask, 0.0); };
    // z-scored feature columns t2m_aug, swvl1_aug, lai_aug, ndvi_sep computed through the zonal path
    const std::size_t n = w.districts.size(), years = 5;
    std::vector<std::vector<double>> f(4, std::vector<double>(n * years));
    const std::pair<std::size_t, int> terms[] = {{1, 8}, {5, 8}, {3, 8}, {6, 9}};
    for (std::size_t t = 0; t < 4; ++t) {
        for (std::size_t y = 0; y < years; ++y) {
            const auto& raw = w.rasters[terms[t].first][y][static_cast<std::size_t>(terms[t].second - 5)];
            const auto means = geo::zonal_means(t == 3 ? masked(raw) : raw, labels, n);
            for (std::size_t d = 0; d < n; ++d) f[t][d * years + y] = *means[d];
        }
        double m = 0, s = 0;
        for (double x : f[t]) m += x;
        m /= static_cast<double>(f[t].size());
        for (double x : f[t]) s += (x - m) * (x - m);
        s = std::sqrt(s / static_cast<double>(f[t].size()));
        for (double& x : f[t]) x = (x - m) / s;
    }
    for (std::size_t i = 0; i < w.truth.size(); ++i) {
        const double want = 2.0 + 0.8 * f[0][i] + 0.5 * f[1][i] + 0.4 * f[2][i] * f[0][i] + 0.3 * f[3][i];
        EXPECT_NEAR(w.truth[i].truth, want, 1e-9);
    }
}

TEST(Synth, InjectedDataProblems) {
    const auto w = synth_generate(SynthOptions{});
    EXPECT_EQ(w.districts.size(), 250u);
    EXPECT_EQ(w.unmatched_names.size(), 5u);
    EXPECT_GT(w.aliases_applied.size(), 15u);
    EXPECT_LT(w.aliases_applied.size(), 60u);
    // July 2005 NDVI missing for district n/3
    const auto labels = geo::rasterize_districts(w.header, w.districts);
    const auto means = geo::zonal_means(w.rasters[6][4][2], labels, w.districts.size());
    EXPECT_FALSE(means[250 / 3]);
    EXPECT_EQ(std::count_if(means.begin(), means.end(), [](const auto& m) { return !m; }), 1);
    std::set<std::string> states;
    for (const auto& d : w.districts) states.insert(d.state);
    EXPECT_EQ(states.size(), 10u);
    const auto parsed = parse_yield_csv(w.yields_csv);
    EXPECT_GT(parsed.filtered, 0u);
    EXPECT_GT(parsed.skipped, 0u);
}

TEST(Synth, RejectsDegenerateOptions) {
    SynthOptions o;
    o.n_districts = 1;
    EXPECT_THROW(synth_generate(o), std::invalid_argument);
    o = {};
    o.last_year = o.first_year + 1;
    EXPECT_THROW(synth_generate(o), std::invalid_argument);
}
