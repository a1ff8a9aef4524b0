#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace saferl {

using Vec3 = Eigen::Vector3d;

/// Line segment l(p1, p2). p1 == p2 is a legal point.
struct Segment {
    Vec3 p1{Vec3::Zero()};
    Vec3 p2{Vec3::Zero()};

    Vec3 at(double t) const { return p1 + t * (p2 - p1); }
};

/// Cylinder with hemispherical caps: every point within `radius` of `seg`.
struct Capsule {
    Segment seg;
    double radius{0.0};
};

/// Axis-aligned box [lo, hi].
struct Box {
    Vec3 lo{Vec3::Zero()};
    Vec3 hi{Vec3::Zero()};
};

/// Closest points of two segments as parameters along each (s on a, t on b).
struct SegmentClosest {
    double s{0.0};
    double t{0.0};
    double distance{0.0};
};

double point_segment_distance(const Vec3& p, const Segment& s);

/// Exact closest-point query between two segments. Handles parallel,
/// degenerate (point) and skew configurations.
SegmentClosest closest_points(const Segment& a, const Segment& b);

double segment_segment_distance(const Segment& a, const Segment& b);

/// Closed test: touching capsules count as intersecting.
bool capsules_intersect(const Capsule& c1, const Capsule& c2);

/// Surface-to-surface gap, negative when the capsules overlap.
double capsule_clearance(const Capsule& c1, const Capsule& c2);

/// A capsule containing both inputs. For a candidate axis the radius covers
/// each input's endpoints plus its own radius, which bounds every interior
/// point because the distance to a segment is convex along another segment.
/// Candidates are the midpoint axis and the two cross chords; the smallest
/// radius wins.
Capsule enclosing_capsule(const Capsule& c1, const Capsule& c2);

bool point_in_capsule(const Vec3& p, const Capsule& c, double tol = 0.0);

/// Exact minimum distance between a segment and a solid box (0 if they touch).
double segment_box_distance(const Segment& s, const Box& box);

bool capsule_box_intersect(const Capsule& c, const Box& box);

}  // namespace saferl
