#include <doctest.h>

#include "sahi/geometry.hpp"
#include "sahi/rng.hpp"

using namespace sahi;

TEST_CASE("area of simple boxes") {
    CHECK(area(BBox(0, 0, 10, 10)) == doctest::Approx(100.0));
    CHECK(area(BBox(0, 0, 1, 1)) == doctest::Approx(1.0));
    CHECK(area(BBox(2, 3, 7, 11)) == doctest::Approx(40.0));
}

TEST_CASE("degenerate boxes are rejected at construction") {
    CHECK_THROWS_AS(BBox(0, 0, 0, 10), std::invalid_argument);
    CHECK_THROWS_AS(BBox(0, 0, 10, 0), std::invalid_argument);
    CHECK_THROWS_AS(BBox(5, 5, 5, 5), std::invalid_argument);
    CHECK_THROWS_AS(BBox(10, 0, 0, 10), std::invalid_argument);
    double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(BBox(0, 0, inf, 10), std::invalid_argument);
}

TEST_CASE("iou identities") {
    BBox a(0, 0, 10, 10);
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(iou(a, BBox(20, 20, 30, 30)) == 0.0);
    CHECK(iou(a, BBox(5, 0, 15, 10)) == doctest::Approx(1.0 / 3.0));
    // boxes touching on an edge have disjoint interiors
    CHECK(iou(a, BBox(10, 0, 20, 10)) == 0.0);
}

TEST_CASE("ios identities") {
    BBox a(0, 0, 10, 10);
    CHECK(ios(a, a) == doctest::Approx(1.0));
    CHECK(ios(a, BBox(2, 2, 4, 4)) == doctest::Approx(1.0));
    CHECK(ios(a, BBox(5, 0, 15, 10)) == doctest::Approx(0.5));
}

TEST_CASE("containment is boundary-inclusive") {
    BBox outer(0, 0, 128, 128);
    CHECK(contains(outer, BBox(10, 10, 20, 20)));
    CHECK_FALSE(contains(outer, BBox(120, 10, 130, 20)));
    CHECK(contains(outer, BBox(0, 0, 128, 128)));
}

TEST_CASE("frame transform examples") {
    FrameTransform identity(0, 0, 1.0);
    BBox b(3, 4, 9, 12);
    CHECK(to_global(identity, b) == b);
    CHECK(to_local(identity, b) == b);

    FrameTransform t(100, 200, 2.0);
    BBox g = to_global(t, BBox(0, 0, 256, 256));
    CHECK(g == BBox(100, 200, 228, 328));
}

TEST_CASE("transform round-trip and metric properties on random boxes") {
    SplitMix64 rng(42);
    auto random_box = [&rng](double span) {
        double x0 = rng.uniform() * span;
        double y0 = rng.uniform() * span;
        double w = 0.5 + rng.uniform() * span * 0.5;
        double h = 0.5 + rng.uniform() * span * 0.5;
        return BBox(x0, y0, x0 + w, y0 + h);
    };
    for (int i = 0; i < 10000; ++i) {
        BBox a = random_box(512);
        BBox b = random_box(512);
        double ab = iou(a, b);
        CHECK(ab == iou(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        CHECK(ios(a, b) >= ab);
        CHECK(ios(a, b) <= 1.0);

        FrameTransform t(rng.uniform() * 1000, rng.uniform() * 1000,
                         0.5 + rng.uniform() * 3.5);
        BBox round = to_local(t, to_global(t, a));
        CHECK(std::abs(round.x_min - a.x_min) < 1e-9);
        CHECK(std::abs(round.y_min - a.y_min) < 1e-9);
        CHECK(std::abs(round.x_max - a.x_max) < 1e-9);
        CHECK(std::abs(round.y_max - a.y_max) < 1e-9);
    }
}

TEST_CASE("containment implies the metric identities") {
    SplitMix64 rng(7);
    for (int i = 0; i < 1000; ++i) {
        double x0 = rng.uniform() * 100;
        double y0 = rng.uniform() * 100;
        double w = 1 + rng.uniform() * 50;
        double h = 1 + rng.uniform() * 50;
        BBox outer(x0, y0, x0 + w, y0 + h);
        double ix0 = x0 + rng.uniform() * w * 0.4;
        double iy0 = y0 + rng.uniform() * h * 0.4;
        BBox inner(ix0, iy0, ix0 + w * 0.3, iy0 + h * 0.3);
        REQUIRE(contains(outer, inner));
        CHECK(iou(outer, inner) == doctest::Approx(area(inner) / area(outer)));
        CHECK(ios(outer, inner) == doctest::Approx(1.0));
    }
}
