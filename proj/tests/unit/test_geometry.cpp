#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "saferl/geometry.hpp"

using namespace saferl;

namespace {
Segment seg(Vec3 a, Vec3 b) { return {a, b}; }
Capsule point_capsule(Vec3 c, double r) { return {{c, c}, r}; }
}  // namespace

TEST_CASE("point_segment_distance: perpendicular foot and clamped endpoint") {
    const Segment s = seg({0, 0, 0}, {1, 0, 0});
    CHECK(point_segment_distance({0, 1, 0}, s) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(point_segment_distance({2, 0, 0}, s) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("point_segment_distance: degenerate segment is a point") {
    const Segment s = seg({1, 2, 3}, {1, 2, 3});
    CHECK(point_segment_distance({1, 2, 5}, s) == doctest::Approx(2.0));
}

TEST_CASE("point_segment_distance matches dense sampling") {
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
        const Vec3 p = oracle::random_vec(rng, -2, 2);
        const Segment s = oracle::random_segment(rng);
        CHECK(std::abs(point_segment_distance(p, s) - oracle::sampled_point_segment(p, s)) <= 1e-6);
    }
}

TEST_CASE("segment_segment_distance: named cases") {
    CHECK(segment_segment_distance(seg({0, 0, 0}, {1, 0, 0}), seg({0, 1, 0}, {1, 1, 0})) ==
          doctest::Approx(1.0));
    CHECK(segment_segment_distance(seg({0, 0, 0}, {1, 0, 0}), seg({0.5, 1, -1}, {0.5, 1, 1})) ==
          doctest::Approx(1.0));
    // Collinear, disjoint.
    CHECK(segment_segment_distance(seg({0, 0, 0}, {1, 0, 0}), seg({3, 0, 0}, {2, 0, 0})) ==
          doctest::Approx(1.0));
    // Both points.
    CHECK(segment_segment_distance(seg({0, 0, 0}, {0, 0, 0}), seg({0, 3, 4}, {0, 3, 4})) ==
          doctest::Approx(5.0));
    // Crossing.
    CHECK(segment_segment_distance(seg({-1, 0, 0}, {1, 0, 0}), seg({0, -1, 0}, {0, 1, 0})) ==
          doctest::Approx(0.0));
}

TEST_CASE("segment_segment_distance is symmetric bit-for-bit and matches sampling") {
    Rng rng(12);
    // Unit-test scale; the acceptance suite runs the full 10^4 pairs.
    for (int i = 0; i < 1500; ++i) {
        Segment a = oracle::random_segment(rng);
        Segment b = oracle::random_segment(rng);
        if (rng.uniform() < 0.1) {
            // Nearly parallel pair.
            const Vec3 off = oracle::random_vec(rng, -0.5, 0.5);
            b = {a.p1 + off, a.p2 + off + oracle::random_vec(rng, -1e-9, 1e-9)};
        }
        const double d_ab = segment_segment_distance(a, b);
        const double d_ba = segment_segment_distance(b, a);
        CHECK(d_ab == d_ba);
        CHECK(d_ab >= 0.0);
        CHECK(std::abs(d_ab - oracle::sampled_segment_segment(a, b)) <= 1e-5);
    }
}

TEST_CASE("capsules_intersect: closed condition") {
    CHECK(capsules_intersect(point_capsule({0, 0, 0}, 0.5), point_capsule({0.9, 0, 0}, 0.5)));
    CHECK(capsules_intersect(point_capsule({0, 0, 0}, 0.5), point_capsule({1.0, 0, 0}, 0.5)));
    CHECK_FALSE(capsules_intersect(point_capsule({0, 0, 0}, 0.5), point_capsule({1.01, 0, 0}, 0.5)));
}

TEST_CASE("capsules_intersect: symmetric, monotone in radius, no false negatives on point clouds") {
    Rng rng(13);
    for (int i = 0; i < 2000; ++i) {
        Capsule a{oracle::random_segment(rng), rng.uniform(0.0, 0.6)};
        Capsule b{oracle::random_segment(rng), rng.uniform(0.0, 0.6)};
        const bool hit = capsules_intersect(a, b);
        CHECK(hit == capsules_intersect(b, a));
        if (hit) {
            Capsule grown = a;
            grown.radius += rng.uniform(0.0, 0.3);
            CHECK(capsules_intersect(grown, b));
        }
        bool cloud_hit = false;
        for (int k = 0; k < 1000 && !cloud_hit; ++k) {
            const Vec3 p = oracle::sample_capsule_point(rng, a, k % 2 == 0);
            cloud_hit = oracle::sampled_point_segment(p, b.seg, 64) <= b.radius - 1e-9;
        }
        if (cloud_hit) CHECK(hit);
    }
}

TEST_CASE("enclosing_capsule: idempotent and collinear midpoints") {
    const Capsule c{seg({0, 0, 0}, {1, 2, 3}), 0.3};
    const Capsule e = enclosing_capsule(c, c);
    CHECK(e.seg.p1 == c.seg.p1);
    CHECK(e.seg.p2 == c.seg.p2);
    CHECK(e.radius == c.radius);

    const Capsule e2 = enclosing_capsule(point_capsule({0, 0, 0}, 0.1), point_capsule({1, 0, 0}, 0.1));
    CHECK(e2.seg.p1 == Vec3(0, 0, 0));
    CHECK(e2.seg.p2 == Vec3(1, 0, 0));
    CHECK(e2.radius == doctest::Approx(0.1));
}

TEST_CASE("enclosing_capsule is never looser than the midpoint-axis construction") {
    Rng rng(16);
    for (int i = 0; i < 500; ++i) {
        const Capsule a{oracle::random_segment(rng), rng.uniform(0.0, 0.5)};
        const Capsule b{oracle::random_segment(rng), rng.uniform(0.0, 0.5)};
        const Segment mid{0.5 * (a.seg.p1 + b.seg.p1), 0.5 * (a.seg.p2 + b.seg.p2)};
        double r = 0.0;
        for (const Capsule* c : {&a, &b}) {
            r = std::max(r, c->radius + std::max(point_segment_distance(c->seg.p1, mid),
                                                 point_segment_distance(c->seg.p2, mid)));
        }
        CHECK(enclosing_capsule(a, b).radius <= r);
    }
}

TEST_CASE("enclosing_capsule contains sampled points of both inputs") {
    Rng rng(14);
    for (int i = 0; i < 200; ++i) {
        const Capsule a{oracle::random_segment(rng), rng.uniform(0.0, 0.5)};
        const Capsule b{oracle::random_segment(rng), rng.uniform(0.0, 0.5)};
        const Capsule e = enclosing_capsule(a, b);
        for (int k = 0; k < 200; ++k) {
            CHECK(point_in_capsule(oracle::sample_capsule_point(rng, a, k % 2 == 0), e, 1e-9));
            CHECK(point_in_capsule(oracle::sample_capsule_point(rng, b, k % 2 == 0), e, 1e-9));
        }
    }
}

TEST_CASE("segment_box_distance matches sampling") {
    Rng rng(15);
    for (int i = 0; i < 2000; ++i) {
        Vec3 lo = oracle::random_vec(rng, -1, 0.5);
        Vec3 hi = lo + oracle::random_vec(rng, 0.01, 1.0);
        const Box box{lo, hi};
        const Segment s = oracle::random_segment(rng);
        double best = 1e300;
        for (int k = 0; k <= 20000; ++k) {
            best = std::min(best, oracle::point_box_distance(s.at(k / 20000.0), box));
        }
        CHECK(segment_box_distance(s, box) <= best + 1e-12);
        CHECK(segment_box_distance(s, box) >= best - 2e-4);
    }
}

TEST_CASE("geometry is deterministic") {
    const Segment a = seg({0.1, 0.2, 0.3}, {1.7, -0.4, 0.9});
    const Segment b = seg({-0.3, 0.5, 0.2}, {0.8, 0.8, -1.1});
    const double d = segment_segment_distance(a, b);
    for (int i = 0; i < 10; ++i) CHECK(segment_segment_distance(a, b) == d);
}
