#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "yieldcast/geodata/districts.hpp"
#include "yieldcast/geodata/raster.hpp"
#include "yieldcast/geodata/zonal.hpp"

using namespace yieldcast;
using namespace yieldcast::geo;

namespace {

Ring rect(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}; }

District district(std::string name, std::vector<Ring> rings, std::string state = "S") {
    return District{std::move(name), std::move(state), std::move(rings)};
}

RasterGrid two_by_two() { return parse_ascii_grid("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n3 4\n"); }

std::string feature(const std::string& district, const std::string& state, const std::string& geometry) {
    return R"({"type":"Feature","properties":{"NAME_2":")" + district + R"(","NAME_1":")" + state +
           R"("},"geometry":)" + geometry + "}";
}

std::string collection(const std::vector<std::string>& features) {
    std::string s = R"({"type":"FeatureCollection","features":[)";
    for (std::size_t i = 0; i < features.size(); ++i) s += (i ? "," : "") + features[i];
    return s + "]}";
}

const std::string unit_square = R"({"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]})";

} // namespace

TEST(AsciiGrid, TopLeftCellAndCenter) {
    const auto g = two_by_two();
    EXPECT_EQ(g.at(0, 0), 1);
    EXPECT_EQ(g.at(1, 1), 4);
    EXPECT_EQ(g.header().cell_center(0, 0), (LonLat{0.5, 1.5}));
}

TEST(AsciiGrid, ShortRowReportsItsLine) {
    try {
        parse_ascii_grid("ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2 3\n4 5\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 8u);
    }
}

TEST(AsciiGrid, HeaderErrors) {
    EXPECT_THROW(parse_ascii_grid("ncols 2\nnrows 1\n"), ParseError);
    EXPECT_THROW(parse_ascii_grid("nrows 1\nncols 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -1\n1 2\n"), ParseError);
    EXPECT_THROW(parse_ascii_grid("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 0\nNODATA_value -1\n1 2\n"), ParseError);
    EXPECT_THROW(parse_ascii_grid("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -1\n1 2\n"), ParseError);
    EXPECT_THROW(parse_ascii_grid("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -1\n1 x\n"), ParseError);
}

TEST(AsciiGrid, AllNodataGridIsValidAndHasNoZonalMean) {
    const auto g = parse_ascii_grid("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n-9999 -9999\n");
    const DistrictSet set({district("a", {rect(0, 0, 2, 1)})});
    const auto labels = rasterize_districts(g.header(), set);
    EXPECT_FALSE(zonal_mean(g, labels, 0));
}

TEST(AsciiGrid, WriteParseRoundTrip) {
    RasterHeader h{3, 2, 10.25, -4.5, 0.05, -1};
    const RasterGrid g(h, {0.1, -1, 2.5e-7, 300.125, 97000.5, -0.004});
    EXPECT_EQ(parse_ascii_grid(write_ascii_grid(g)), g);
}

TEST(GeoJson, MinimalFeature) {
    const auto set = parse_geojson_districts(collection({feature("Kheda", "Gujarat", unit_square)}));
    ASSERT_EQ(set.size(), 1u);
    EXPECT_EQ(set[0].name, "Kheda");
    EXPECT_EQ(set[0].state, "Gujarat");
    EXPECT_EQ(set[0].rings.size(), 1u);
}

TEST(GeoJson, DuplicateNormalizedNameRejected) {
    EXPECT_THROW(parse_geojson_districts(collection({feature("Kheda", "Gujarat", unit_square),
                                                     feature(" KHEDA", "gujarat ", unit_square)})),
                 InvariantError);
}

TEST(GeoJson, MultiPolygonKeepsEveryRing) {
    const std::string mp =
        R"({"type":"MultiPolygon","coordinates":[[[[0,0],[1,0],[1,1],[0,1],[0,0]]],[[[2,0],[3,0],[3,1],[2,1],[2,0]]]]})";
    const auto set = parse_geojson_districts(collection({feature("Korba", "Chhattisgarh", mp)}));
    ASSERT_EQ(set.size(), 1u);
    EXPECT_EQ(set[0].rings.size(), 2u);
}

TEST(GeoJson, MalformedInputs) {
    EXPECT_THROW(parse_geojson_districts("{"), ParseError);
    EXPECT_THROW(parse_geojson_districts(R"({"type":"Feature"})"), ParseError);
    EXPECT_THROW(parse_geojson_districts(collection({feature("a", "b", R"({"type":"Point","coordinates":[0,0]})")})),
                 ParseError);
    EXPECT_THROW(parse_geojson_districts(
                     collection({feature("a", "b", R"({"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0.5]]]})")})),
                 InvariantError);
    const std::string no_name = R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{"NAME_1":"x"},)"
                                R"("geometry":)" + unit_square + "}]}";
    EXPECT_THROW(parse_geojson_districts(no_name), ParseError);
}

TEST(GeoJson, CustomPropertyKeys) {
    const std::string doc = R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{"dist":"A","st":"B"},)"
                            R"("geometry":)" + unit_square + "}]}";
    const auto set = parse_geojson_districts(doc, GeoJsonKeys{"dist", "st"});
    EXPECT_EQ(set[0].name, "A");
}

TEST(GeoJson, WriteParseRoundTrip) {
    const DistrictSet set({district("a", {rect(0, 0, 1, 1)}), district("b", {rect(1, 0, 2, 1), rect(3, 0, 4, 1)})});
    const auto back = parse_geojson_districts(write_geojson_districts(set));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], set[0]);
    EXPECT_EQ(back[1], set[1]);
}

TEST(PointInPolygon, InteriorExteriorAndHole) {
    const std::vector<Ring> square{rect(0, 0, 1, 1)};
    EXPECT_TRUE(point_in_polygon({0.5, 0.5}, square));
    EXPECT_FALSE(point_in_polygon({2, 2}, square));
    const std::vector<Ring> holed{rect(0, 0, 1, 1), rect(0.25, 0.25, 0.75, 0.75)};
    EXPECT_FALSE(point_in_polygon({0.5, 0.5}, holed));
    EXPECT_TRUE(point_in_polygon({0.1, 0.5}, holed));
}

TEST(PointInPolygon, AgreesWithOracleOnRandomPoints) {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int k = 0; k < 50; ++k) {
        const District d{"x", "y", {oracle::star_ring(gen, 0, 0, 0.5, 1.5), oracle::star_ring(gen, 0, 0, 0.05, 0.4)}};
        for (int i = 0; i < 200; ++i) {
            const double x = u(gen), y = u(gen);
            EXPECT_EQ(point_in_polygon({x, y}, d.rings), oracle::inside(x, y, d));
        }
    }
}

TEST(CropMask, IdentityFullMaskAndCheckerboard) {
    const auto g = two_by_two();
    EXPECT_EQ(apply_crop_mask(g, RasterGrid::filled(g.header(), 0.7), 0.0), g);

    const auto none = apply_crop_mask(g, RasterGrid::filled(g.header(), 0.0), 0.0);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 2; ++c) EXPECT_TRUE(none.is_nodata(r, c));

    const RasterGrid checker(g.header(), {1, 0, 0, 1});
    const auto half = apply_crop_mask(g, checker, 0.0);
    EXPECT_EQ(half.at(0, 0), 1);
    EXPECT_TRUE(half.is_nodata(0, 1));
    EXPECT_TRUE(half.is_nodata(1, 0));
    EXPECT_EQ(half.at(1, 1), 4);
}

TEST(CropMask, MinAreaAndNodataMaskAndHeaderMismatch) {
    const auto g = two_by_two();
    const RasterGrid mask(g.header(), {0.2, 0.5, -9999, 0.9});
    const auto out = apply_crop_mask(g, mask, 0.5);
    EXPECT_TRUE(out.is_nodata(0, 0));
    EXPECT_TRUE(out.is_nodata(0, 1));
    EXPECT_TRUE(out.is_nodata(1, 0));
    EXPECT_EQ(out.at(1, 1), 4);
    RasterHeader other = g.header();
    other.cellsize = 2;
    EXPECT_THROW(apply_crop_mask(g, RasterGrid::filled(other, 1), 0), SchemaError);
}

TEST(Rasterize, FullCoverHalvesAndEmpty) {
    const RasterHeader h{4, 3, 0, 0, 1, -9999};
    const auto full = rasterize_districts(h, DistrictSet({district("a", {rect(-1, -1, 5, 4)})}));
    for (auto l : full.labels) EXPECT_EQ(l, 0);

    const auto halves =
        rasterize_districts(h, DistrictSet({district("l", {rect(-1, -1, 2, 4)}), district("r", {rect(2, -1, 5, 4)})}));
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(halves.at(r, c), c < 2 ? 0 : 1);

    const auto empty = rasterize_districts(h, DistrictSet{});
    for (auto l : empty.labels) EXPECT_EQ(l, LabelGrid::unassigned);
}

TEST(Rasterize, OverlapGoesToFirstDistrict) {
    const RasterHeader h{2, 1, 0, 0, 1, -9999};
    const auto labels =
        rasterize_districts(h, DistrictSet({district("a", {rect(0, 0, 2, 1)}), district("b", {rect(0, 0, 1, 1)})}));
    EXPECT_EQ(labels.at(0, 0), 0);
    EXPECT_EQ(labels.at(0, 1), 0);
    EXPECT_EQ(labels.overlap_cells, 1u);
}

TEST(Zonal, WholeGridAndLeftColumn) {
    const auto g = two_by_two();
    const auto all = rasterize_districts(g.header(), DistrictSet({district("a", {rect(0, 0, 2, 2)})}));
    EXPECT_DOUBLE_EQ(*zonal_mean(g, all, 0), 2.5);
    const auto left = rasterize_districts(g.header(), DistrictSet({district("a", {rect(0, 0, 1, 2)})}));
    EXPECT_DOUBLE_EQ(*zonal_mean(g, left, 0), 2.0);
}

TEST(Zonal, HeaderMismatchIsSchemaError) {
    const auto g = two_by_two();
    RasterHeader h = g.header();
    h.ncols = 3;
    const auto labels = rasterize_districts(h, DistrictSet{});
    EXPECT_THROW(zonal_mean(g, labels, 0), SchemaError);
}

TEST(Zonal, MatchesBruteForceOracleOnRandomCases) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto c = oracle::random_zonal_case(seed);
        const auto labels = rasterize_districts(c.grid.header(), c.districts);
        const auto all = zonal_means(c.grid, labels, c.districts.size());
        for (std::size_t d = 0; d < c.districts.size(); ++d) {
            const auto want = oracle::zonal_mean(c.grid, c.districts, d);
            const auto got = zonal_mean(c.grid, labels, d);
            ASSERT_EQ(want.has_value(), got.has_value()) << "seed " << seed << " district " << d;
            if (want) {
                EXPECT_EQ(*got, *want) << "seed " << seed << " district " << d;
                EXPECT_EQ(*all[d], *want);
            } else {
                EXPECT_FALSE(all[d]);
            }
        }
    }
}
