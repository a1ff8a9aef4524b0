#include "saferl/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace saferl {

namespace {

constexpr double kParallelEps = 1e-14;

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

double point_segment_distance(const Vec3& p, const Segment& s) {
    const Vec3 d = s.p2 - s.p1;
    const double dd = d.squaredNorm();
    double t = 0.0;
    if (dd > 0.0) {
        t = clamp01((p - s.p1).dot(d) / dd);
    }
    return (p - s.at(t)).norm();
}

// Ericson, Real-Time Collision Detection 5.1.9, with the degenerate branches
// kept explicit.
SegmentClosest closest_points(const Segment& a, const Segment& b) {
    const Vec3 d1 = a.p2 - a.p1;
    const Vec3 d2 = b.p2 - b.p1;
    const Vec3 r = a.p1 - b.p1;
    const double aa = d1.squaredNorm();
    const double ee = d2.squaredNorm();
    const double f = d2.dot(r);

    double s = 0.0;
    double t = 0.0;
    if (aa <= 0.0 && ee <= 0.0) {
        // both points
    } else if (aa <= 0.0) {
        t = clamp01(f / ee);
    } else {
        const double c = d1.dot(r);
        if (ee <= 0.0) {
            s = clamp01(-c / aa);
        } else {
            const double bb = d1.dot(d2);
            const double denom = aa * ee - bb * bb;
            if (denom > kParallelEps * aa * ee) {
                s = clamp01((bb * f - c * ee) / denom);
            } else {
                s = 0.0;
            }
            const double tnom = bb * s + f;
            if (tnom < 0.0) {
                t = 0.0;
                s = clamp01(-c / aa);
            } else if (tnom > ee) {
                t = 1.0;
                s = clamp01((bb - c) / aa);
            } else {
                t = tnom / ee;
            }
        }
    }
    return {s, t, (a.at(s) - b.at(t)).norm()};
}

double segment_segment_distance(const Segment& a, const Segment& b) {
    // Evaluate in a fixed argument order so that (a, b) and (b, a) give
    // bit-identical answers.
    const bool swap = std::lexicographical_compare(b.p1.data(), b.p1.data() + 3, a.p1.data(),
                                                   a.p1.data() + 3) ||
                      (a.p1 == b.p1 && std::lexicographical_compare(b.p2.data(), b.p2.data() + 3,
                                                                    a.p2.data(), a.p2.data() + 3));
    return swap ? closest_points(b, a).distance : closest_points(a, b).distance;
}

bool capsules_intersect(const Capsule& c1, const Capsule& c2) {
    return segment_segment_distance(c1.seg, c2.seg) <= c1.radius + c2.radius;
}

double capsule_clearance(const Capsule& c1, const Capsule& c2) {
    return segment_segment_distance(c1.seg, c2.seg) - c1.radius - c2.radius;
}

Capsule enclosing_capsule(const Capsule& c1, const Capsule& c2) {
    // Any axis works once the radius covers every input endpoint ball. Try the
    // midpoint axis and the two cross chords, keep the tightest; ties keep the
    // earlier candidate so enclosing_capsule(C, C) == C.
    const Segment axes[3] = {
        {0.5 * (c1.seg.p1 + c2.seg.p1), 0.5 * (c1.seg.p2 + c2.seg.p2)},
        {c1.seg.p1, c2.seg.p2},
        {c2.seg.p1, c1.seg.p2},
    };
    Capsule best;
    best.radius = std::numeric_limits<double>::infinity();
    for (const Segment& axis : axes) {
        double radius = 0.0;
        for (const Capsule* c : {&c1, &c2}) {
            const double reach = std::max(point_segment_distance(c->seg.p1, axis),
                                          point_segment_distance(c->seg.p2, axis));
            radius = std::max(radius, c->radius + reach);
        }
        if (radius < best.radius) best = {axis, radius};
    }
    return best;
}

bool point_in_capsule(const Vec3& p, const Capsule& c, double tol) {
    return point_segment_distance(p, c.seg) <= c.radius + tol;
}

double segment_box_distance(const Segment& s, const Box& box) {
    // The squared distance to a box is a sum of per-axis terms, each a
    // piecewise quadratic in t with kinks where the coordinate crosses a
    // slab face. Between kinks it is one quadratic; minimise each piece.
    const Vec3 d = s.p2 - s.p1;
    std::array<double, 8> cuts{};
    std::size_t n = 0;
    cuts[n++] = 0.0;
    cuts[n++] = 1.0;
    for (int i = 0; i < 3; ++i) {
        if (d[i] == 0.0) continue;
        for (double face : {box.lo[i], box.hi[i]}) {
            const double t = (face - s.p1[i]) / d[i];
            if (t > 0.0 && t < 1.0) cuts[n++] = t;
        }
    }
    std::sort(cuts.begin(), cuts.begin() + static_cast<std::ptrdiff_t>(n));

    auto sq_dist = [&](double t) {
        const Vec3 p = s.at(t);
        double acc = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double excess = p[i] < box.lo[i] ? box.lo[i] - p[i]
                                  : p[i] > box.hi[i] ? p[i] - box.hi[i]
                                                     : 0.0;
            acc += excess * excess;
        }
        return acc;
    };

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double t0 = cuts[k];
        const double t1 = cuts[k + 1];
        best = std::min({best, sq_dist(t0), sq_dist(t1)});
        if (t1 <= t0) continue;
        // Active faces are fixed inside the piece; read them at the midpoint.
        const Vec3 mid = s.at(0.5 * (t0 + t1));
        double qa = 0.0;
        double qb = 0.0;
        for (int i = 0; i < 3; ++i) {
            double face;
            if (mid[i] < box.lo[i]) {
                face = box.lo[i];
            } else if (mid[i] > box.hi[i]) {
                face = box.hi[i];
            } else {
                continue;
            }
            // (p1 + t d - face)^2
            const double off = s.p1[i] - face;
            qa += d[i] * d[i];
            qb += 2.0 * d[i] * off;
        }
        if (qa > 0.0) {
            const double t = std::clamp(-qb / (2.0 * qa), t0, t1);
            best = std::min(best, sq_dist(t));
        }
    }
    return std::sqrt(best);
}

bool capsule_box_intersect(const Capsule& c, const Box& box) {
    return segment_box_distance(c.seg, box) <= c.radius;
}

}  // namespace saferl
