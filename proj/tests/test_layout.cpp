#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "etchsim/layout.hpp"
#include "etchsim/rng.hpp"

using namespace etchsim;

namespace {

Polygon rect(double x0, double y0, double x1, double y1) {
    return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

std::string temp_path(const char* name) {
    return std::string("/tmp/etchsim_test_") + name;
}

}  // namespace

TEST_CASE("point-in-polygon agrees with direct bounds checks on rectangles") {
    const Polygon r = rect(2.0, 3.0, 7.0, 9.0);
    for (int xi = 0; xi < 20; ++xi)
        for (int yi = 0; yi < 20; ++yi) {
            const Point2 p{xi * 0.5 + 0.25, yi * 0.7 + 0.35};
            const bool want = p.x > 2.0 && p.x < 7.0 && p.y > 3.0 && p.y < 9.0;
            CHECK(point_in_polygon(r, p) == want);
        }
}

TEST_CASE("point-in-polygon handles concave outlines") {
    // L-shape: the notch in the upper right is outside.
    const Polygon ell = {{0, 0}, {10, 0}, {10, 5}, {5, 5}, {5, 10}, {0, 10}};
    CHECK(point_in_polygon(ell, {2.5, 2.5}));
    CHECK(point_in_polygon(ell, {7.5, 2.5}));
    CHECK(point_in_polygon(ell, {2.5, 7.5}));
    CHECK(point_in_polygon(ell, {7.5, 7.5}) == false);  // the notch
    CHECK(point_in_polygon(ell, {-1.0, 5.0}) == false);
}

TEST_CASE("transform rotates about the given center then translates") {
    const Polygon r = rect(0.0, 0.0, 4.0, 2.0);
    const Polygon rotated = transform(r, 90.0, {0.0, 0.0}, {0.0, 0.0});
    // (4, 0) -> (0, 4); (4, 2) -> (-2, 4).
    CHECK(rotated[1].x == doctest::Approx(0.0));
    CHECK(rotated[1].y == doctest::Approx(4.0));
    CHECK(rotated[2].x == doctest::Approx(-2.0));
    CHECK(rotated[2].y == doctest::Approx(4.0));

    const Polygon moved = transform(r, 0.0, {1.5, -2.5}, {0.0, 0.0});
    CHECK(moved[0].x == doctest::Approx(1.5));
    CHECK(moved[0].y == doctest::Approx(-2.5));

    // Rotating about the rectangle center is a symmetry for 180 degrees.
    const Polygon spun = transform(r, 180.0, {0.0, 0.0}, {2.0, 1.0});
    CHECK(spun[0].x == doctest::Approx(4.0));
    CHECK(spun[0].y == doctest::Approx(2.0));
}

TEST_CASE("rasterization marks exactly the covered pixel centers") {
    const MaskBitmap mask = rasterize({rect(4.0, 4.0, 12.0, 12.0)}, 16, 16, 1.0);
    CHECK(mask.protected_count() == 64);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const bool want = x >= 4 && x < 12 && y >= 4 && y < 12;
            CHECK(mask.is_protected(x, y) == want);
        }
}

TEST_CASE("rasterization applies the even-odd rule across polygons") {
    // Two overlapping squares: the overlap cancels out.
    const MaskBitmap mask =
        rasterize({rect(0.0, 0.0, 8.0, 8.0), rect(4.0, 4.0, 12.0, 12.0)}, 16, 16, 1.0);
    CHECK(mask.is_protected(2, 2));
    CHECK(mask.is_protected(10, 10));
    CHECK(mask.is_protected(6, 6) == false);  // covered twice
    CHECK(mask.is_protected(14, 14) == false);
}

TEST_CASE("rasterization rotation spins the mask about the bitmap center") {
    // Off-center square, quarter turn about the center (8, 8).
    const MaskBitmap mask = rasterize({rect(10.0, 6.0, 14.0, 10.0)}, 16, 16, 1.0, 90.0);
    // (x, y) -> (8 - (y - 8), 8 + (x - 8)): the square lands at [6,10)x[10,14).
    const MaskBitmap expect = rasterize({rect(6.0, 10.0, 10.0, 14.0)}, 16, 16, 1.0);
    CHECK(mask == expect);
}

TEST_CASE("rasterize validates its input") {
    CHECK_THROWS_AS(rasterize({rect(0, 0, 1, 1)}, 4, 4, 0.0), ConfigError);
    CHECK_THROWS_AS(rasterize({Polygon{{0, 0}, {1, 1}}}, 4, 4, 1.0), ConfigError);
}

TEST_CASE("mask bitmap basics") {
    const MaskBitmap none;
    CHECK(none.empty());
    CHECK(none.open(123, -5));  // absent mask is open everywhere

    MaskBitmap m(4, 3, true);
    CHECK(m.protected_count() == 12);
    CHECK(m.open(0, 0) == false);
    m.set_protected(2, 1, false);
    CHECK(m.open(2, 1));
    CHECK_THROWS_AS(m.is_protected(4, 0), ConfigError);
    CHECK_THROWS_AS(m.is_protected(0, 3), ConfigError);
    CHECK_THROWS_AS(MaskBitmap(0, 4), ConfigError);
}

TEST_CASE("pgm images round-trip the mask") {
    MaskBitmap m(9, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 9; ++x)
            m.set_protected(x, y, rng::draw(3, x, y) < 0.4);

    const std::string path = temp_path("mask.pgm");
    write_pgm(path, m);
    const MaskBitmap back = read_pgm(path);
    CHECK(back == m);
    std::remove(path.c_str());
}

TEST_CASE("pgm reader thresholds at half intensity and validates headers") {
    const std::string path = temp_path("gray.pgm");
    {
        std::ofstream out(path, std::ios::binary);
        out << "P5\n# comment line\n3 1\n255\n";
        const unsigned char px[3] = {127, 128, 255};
        out.write(reinterpret_cast<const char*>(px), 3);
    }
    const MaskBitmap m = read_pgm(path);
    CHECK(m.is_protected(0, 0) == false);
    CHECK(m.is_protected(1, 0));
    CHECK(m.is_protected(2, 0));
    std::remove(path.c_str());

    const std::string bad = temp_path("bad.pgm");
    {
        std::ofstream out(bad, std::ios::binary);
        out << "P2\n3 1\n255\n1 2 3\n";
    }
    CHECK_THROWS_AS(read_pgm(bad), ConfigError);
    {
        std::ofstream out(bad, std::ios::binary);
        out << "P5\n3 1\n255\n";
        out.put(0);  // two bytes short
    }
    CHECK_THROWS_AS(read_pgm(bad), ConfigError);
    std::remove(bad.c_str());
    CHECK_THROWS_AS(read_pgm("/does/not/exist.pgm"), ConfigError);
}

TEST_CASE("rectangle decomposition inverts rasterization exactly") {
    // Random bitmaps: decompose to polygons, rasterize again, expect the
    // identical bitmap. Pixel pitch chosen odd to catch unit slips.
    for (std::uint64_t trial = 0; trial < 6; ++trial) {
        MaskBitmap m(11, 7);
        for (int y = 0; y < 7; ++y)
            for (int x = 0; x < 11; ++x)
                m.set_protected(x, y, rng::draw(trial, x, y) < 0.45);

        const double pitch = 0.135775;
        const auto polys = bitmap_to_polygons(m, pitch);
        const MaskBitmap back = rasterize(polys, 11, 7, pitch);
        CHECK(back == m);
    }
}

TEST_CASE("rectangle decomposition merges full blocks greedily") {
    MaskBitmap m(8, 8);
    for (int y = 2; y < 6; ++y)
        for (int x = 1; x < 7; ++x) m.set_protected(x, y, true);
    const auto polys = bitmap_to_polygons(m, 1.0);
    REQUIRE(polys.size() == 1);  // one solid rectangle
    CHECK(polys[0].size() == 4);

    const MaskBitmap empty_mask(4, 4);
    CHECK(bitmap_to_polygons(empty_mask, 1.0).empty());
    CHECK(bitmap_to_polygons(MaskBitmap(), 1.0).empty());
}

TEST_CASE("layout documents parse and serialize") {
    const char* doc = R"({
        "units": "um",
        "rotation_deg": 45.0,
        "layers": [
            {"name": "top", "polygons": [[[0, 0], [10, 0], [10, 10], [0, 10]]]},
            {"name": "bottom", "polygons": [[[1, 1], [2, 1], [2, 2]]]}
        ],
        "etch_stops": [
            {"min": [0, 0, 0], "max": [5, 5, 1]}
        ]
    })";
    const Layout layout = parse_layout(doc);
    CHECK(layout.rotation_deg == doctest::Approx(45.0));
    REQUIRE(layout.top.size() == 1);
    REQUIRE(layout.top[0].size() == 4);
    CHECK(layout.top[0][2].x == doctest::Approx(10.0));
    REQUIRE(layout.bottom.size() == 1);
    REQUIRE(layout.etch_stops.size() == 1);
    CHECK(layout.etch_stops[0].max.z == doctest::Approx(1.0));

    // Round trip through the serializer.
    const Layout again = parse_layout(layout_to_json(layout));
    CHECK(again.rotation_deg == doctest::Approx(45.0));
    CHECK(again.top.size() == 1);
    CHECK(again.bottom.size() == 1);
    CHECK(again.etch_stops.size() == 1);
    CHECK(again.top[0][1].x == doctest::Approx(10.0));
}

TEST_CASE("layout validation rejects malformed documents") {
    CHECK_THROWS_AS(parse_layout("nope"), ConfigError);
    CHECK_THROWS_AS(parse_layout(R"({"units": "mm"})"), ConfigError);
    CHECK_THROWS_AS(parse_layout(R"({"units": "um", "rotation_deg": "x"})"), ConfigError);
    CHECK_THROWS_AS(
        parse_layout(R"({"units": "um", "layers": [{"name": "side", "polygons": []}]})"),
        ConfigError);
    CHECK_THROWS_AS(
        parse_layout(R"({"units": "um", "layers": [{"name": "top",
            "polygons": [[[0, 0], [1, 1]]]}]})"),
        ConfigError);
    CHECK_THROWS_AS(
        parse_layout(R"({"units": "um", "etch_stops": [{"min": [0, 0, 0], "max": [0, 5, 5]}]})"),
        ConfigError);
    CHECK_THROWS_AS(parse_layout(R"({"units": "um", "etch_stops": [{"min": [0, 0]}]})"),
                    ConfigError);

    // A minimal valid document.
    const Layout empty = parse_layout(R"({"units": "um"})");
    CHECK(empty.top.empty());
    CHECK(empty.bottom.empty());
    CHECK(empty.etch_stops.empty());
}
