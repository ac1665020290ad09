/*
 * Copyright (c) 2026 The quard authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <variant>

namespace quard {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

struct Pose2 {
    double x = 0.0;
    double y = 0.0;
    double yaw = 0.0;

    Vec2 position() const { return {x, y}; }
    Vec2 heading() const { return {std::cos(yaw), std::sin(yaw)}; }

    // World point expressed in this pose's frame.
    Vec2 to_local(Vec2 p) const {
        const double c = std::cos(yaw), s = std::sin(yaw);
        const Vec2 d = p - position();
        return {c * d.x + s * d.y, -s * d.x + c * d.y};
    }

    Vec2 to_world(Vec2 p) const {
        const double c = std::cos(yaw), s = std::sin(yaw);
        return {x + c * p.x - s * p.y, y + s * p.x + c * p.y};
    }

    friend bool operator==(const Pose2&, const Pose2&) = default;
};

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * M_PI);
    return a <= -M_PI ? a + 2.0 * M_PI : a;
}

inline double bearing(const Pose2& from, Vec2 to) {
    return wrap_angle(std::atan2(to.y - from.y, to.x - from.x) - from.yaw);
}

// Oriented rectangle with half extents along its local axes.
struct OrientedRect {
    Pose2 pose;
    double half_length = 0.0; // local x
    double half_width = 0.0;  // local y
};

struct Disc {
    Vec2 center;
    double radius = 0.0;
};

using Footprint = std::variant<OrientedRect, Disc>;

inline double distance_to(const OrientedRect& r, Vec2 p) {
    const Vec2 l = r.pose.to_local(p);
    const double dx = std::max(std::abs(l.x) - r.half_length, 0.0);
    const double dy = std::max(std::abs(l.y) - r.half_width, 0.0);
    return std::hypot(dx, dy);
}

inline double distance_to(const Disc& d, Vec2 p) {
    return std::max(distance(d.center, p) - d.radius, 0.0);
}

inline double distance_to(const Footprint& f, Vec2 p) {
    return std::visit([p](const auto& shape) { return distance_to(shape, p); }, f);
}

inline bool contains(const OrientedRect& r, Vec2 p) {
    const Vec2 l = r.pose.to_local(p);
    return std::abs(l.x) <= r.half_length && std::abs(l.y) <= r.half_width;
}

// Strict overlap of a disc with a footprint (touching is not overlap).
inline bool disc_overlaps(Vec2 center, double radius, const Footprint& f) {
    return distance_to(f, center) < radius;
}

} // namespace quard
