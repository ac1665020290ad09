/*
 * Copyright (c) 2026 The quard authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

// Deterministic kinematic world for the seven command-level tasks.
//
// Commands are held for one command tick (1 / f_low) and integrated in
// N = f_high / f_low substeps. Joint-level tracking is abstracted away: the
// body parameters (height, pitch, stance, foot height, gait) only matter for
// feasibility checks such as crawling under a bar.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "quard/action_codec.hpp"
#include "quard/error.hpp"
#include "quard/geometry.hpp"
#include "quard/types.hpp"

namespace quard {

// ---- configuration -----------------------------------------------------------

struct RateConfig {
    double f_high = 50.0; // low-level integration rate (Hz)
    double f_low = 2.0;   // command rate (Hz)

    int substeps() const { return static_cast<int>(std::lround(f_high / f_low)); }

    void validate() const {
        if (!(f_low > 0.0) || !(f_high > 0.0)) throw ConfigError("rates must be positive");
        const int n = substeps();
        if (n < 1 || static_cast<double>(n) * f_low != f_high) {
            throw ConfigError("f_high / f_low must be a positive integer");
        }
    }

    friend bool operator==(const RateConfig&, const RateConfig&) = default;
};

struct CameraIntrinsics {
    int width = 64;
    int height = 48;
    double hfov_deg = 69.0;
    double mount_forward = 0.20;    // camera ahead of the body center (m)
    double mount_above_body = 0.05; // camera above the body height (m)
    double near_plane = 0.05;

    double focal() const {
        return 0.5 * width / std::tan(0.5 * hfov_deg * M_PI / 180.0);
    }

    friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

// Realized body parameters, slewed toward the last command.
struct BodyState {
    double h_z = 0.25;
    double phi = 0.0;
    double s_y = 0.20;
    double h_z_f = 0.08;
    std::array<double, 3> theta = {0.5, 0.0, 0.0};
    double f = 3.0;

    friend bool operator==(const BodyState&, const BodyState&) = default;
};

struct SlewRates {
    double h_z = 0.2;   // m/s
    double phi = 0.5;   // rad/s
    double s_y = 0.2;   // m/s
    double h_z_f = 0.2; // m/s
    double f = 2.0;     // Hz/s
};

struct SimConfig {
    double footprint_radius = 0.20;
    SlewRates slew;
    BodyState standing;
    int max_steps = 120;
    double success_radius = 1.0;
    double distinguish_bearing_deg = 10.0;
    int distinguish_hold_ticks = 4;
    double go_through_margin = 0.3;
    double release_pitch = 0.3;
    double drop_offset = 0.55;
    double foot_size = 0.10; // added to s_y for the lateral extent inside tunnels
    double arena_min_x = -2.5;
    double arena_max_x = 6.5;
    double arena_min_y = -3.5;
    double arena_max_y = 4.5;
    CameraIntrinsics camera;
};

// ---- scene -------------------------------------------------------------------

enum class EntityKind { TargetObject, Obstacle, Tunnel, Bar, Receptacle, LetterBox, CarriedBall };

inline constexpr std::array<std::string_view, 7> kEntityKindNames = {
    "target_object", "obstacle", "tunnel", "bar", "receptacle", "letter_box", "carried_ball"};
inline constexpr std::array<std::string_view, 8> kShapeNames = {
    "cube", "ball", "cylinder", "furniture", "tunnel_frame", "bar", "tray", "box"};

enum class CrossSection { Rectangle, Triangle, Arch };
inline constexpr std::array<std::string_view, 3> kCrossSectionNames = {"rectangle", "triangle",
                                                                       "arch"};

struct Entity {
    EntityKind kind = EntityKind::TargetObject;
    Shape shape = Shape::Cube;
    Color color = Color::Red;
    Pose2 pose;
    double length = 0.3; // local x extent (m)
    double width = 0.3;  // local y extent (m)
    double height = 0.3;
    std::string category;
    bool target = false;
    double clearance = 0.0; // bars: underside height
    double wall = 0.0;      // tunnels: wall thickness
    CrossSection section = CrossSection::Rectangle;
    char letter = 0; // letter boxes

    double inner_half_width() const { return 0.5 * width - wall; }

    friend bool operator==(const Entity&, const Entity&) = default;
};

struct Scene {
    std::vector<Entity> entities;
    std::optional<Entity> carried;
    Pose2 start;

    friend bool operator==(const Scene&, const Scene&) = default;
};

inline void validate_entity(const Entity& e) {
    if (!(e.length > 0.0) || !(e.width > 0.0) || !(e.height > 0.0)) {
        throw ConfigError("entity '" + e.category + "' must have strictly positive dims");
    }
    if (e.kind == EntityKind::Tunnel && !(e.inner_half_width() > 0.0)) {
        throw ConfigError("tunnel walls leave no passage");
    }
}

// ---- state -------------------------------------------------------------------

enum class Status { Running, Success, Collision, Timeout, OutOfBounds };
inline constexpr std::array<std::string_view, 5> kStatusNames = {"running", "success", "collision",
                                                                 "timeout", "out_of_bounds"};
inline std::string_view name(Status s) { return enum_name(s, kStatusNames); }

inline bool is_terminal(Status s) { return s != Status::Running; }

struct WorldState {
    Pose2 robot;
    BodyState body;
    std::optional<Entity> carried;
    std::vector<Entity> entities;
    double sim_time = 0.0;
    std::int64_t step_count = 0;
    Status status = Status::Running;
    std::string violation;
    int aligned_ticks = 0; // consecutive command ticks facing the target

    friend bool operator==(const WorldState&, const WorldState&) = default;
};

struct StepOutcome {
    Status status = Status::Running;
    double distance_to_target = 0.0;
    std::string violation;

    friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

inline WorldState initial_state(const Scene& scene, const SimConfig& cfg) {
    WorldState s;
    s.robot = scene.start;
    s.body = cfg.standing;
    s.carried = scene.carried;
    s.entities = scene.entities;
    for (const auto& e : s.entities) validate_entity(e);
    return s;
}

inline const Entity* find_target(const WorldState& s) {
    for (const auto& e : s.entities) {
        if (e.target) return &e;
    }
    return nullptr;
}

// ---- solid geometry ----------------------------------------------------------

inline Footprint entity_footprint(const Entity& e) {
    if (e.shape == Shape::Ball || e.shape == Shape::Cylinder) {
        return Disc{e.pose.position(), 0.5 * std::max(e.length, e.width)};
    }
    return OrientedRect{e.pose, 0.5 * e.length, 0.5 * e.width};
}

// Footprints the robot may never overlap. Bars are handled separately: the
// beam is passable when the body is low enough, the posts never are.
inline std::vector<Footprint> solid_parts(const Entity& e) {
    switch (e.kind) {
    case EntityKind::Obstacle:
    case EntityKind::Receptacle:
    case EntityKind::LetterBox:
        return {entity_footprint(e)};
    case EntityKind::Tunnel: {
        const double off = 0.5 * e.width - 0.5 * e.wall;
        return {OrientedRect{Pose2{e.pose.to_world({0.0, off}).x, e.pose.to_world({0.0, off}).y,
                                   e.pose.yaw},
                             0.5 * e.length, 0.5 * e.wall},
                OrientedRect{Pose2{e.pose.to_world({0.0, -off}).x, e.pose.to_world({0.0, -off}).y,
                                   e.pose.yaw},
                             0.5 * e.length, 0.5 * e.wall}};
    }
    case EntityKind::Bar: {
        const double off = 0.5 * e.width;
        return {Disc{e.pose.to_world({0.0, off}), 0.05}, Disc{e.pose.to_world({0.0, -off}), 0.05}};
    }
    default:
        return {};
    }
}

inline OrientedRect bar_beam(const Entity& bar) {
    return OrientedRect{bar.pose, 0.5 * bar.length, 0.5 * bar.width};
}

// Returns a description of the violated constraint, if any.
inline std::optional<std::string> check_collision(const WorldState& s, const SimConfig& cfg) {
    const Vec2 p = s.robot.position();
    const double r = cfg.footprint_radius;
    for (const auto& e : s.entities) {
        for (const auto& part : solid_parts(e)) {
            if (disc_overlaps(p, r, part)) {
                return "collision with " + std::string(enum_name(e.kind, kEntityKindNames)) +
                       (e.category.empty() ? "" : " '" + e.category + "'");
            }
        }
        if (e.kind == EntityKind::Bar && s.body.h_z >= e.clearance &&
            disc_overlaps(p, r, Footprint{bar_beam(e)})) {
            return "body height above bar clearance";
        }
        if (e.kind == EntityKind::Tunnel) {
            const Vec2 l = e.pose.to_local(p);
            const double half_extent = 0.5 * (s.body.s_y + cfg.foot_size);
            if (std::abs(l.x) <= 0.5 * e.length && std::abs(l.y) < 0.5 * e.width &&
                std::abs(l.y) + half_extent >= e.inner_half_width()) {
                return "stance too wide for tunnel";
            }
        }
    }
    return std::nullopt;
}

// ---- dynamics ----------------------------------------------------------------

namespace detail {

inline double slew(double current, double target, double max_delta) {
    return current + std::clamp(target - current, -max_delta, max_delta);
}

} // namespace detail

// One low-level substep of duration 1 / f_high. Sets the Collision status
// and stops moving once a constraint is violated.
inline void integrate_substep(WorldState& s, const ActionCommand& a, const RateConfig& rates,
                              const SimConfig& cfg) {
    if (is_terminal(s.status)) return;
    const double c = std::cos(s.robot.yaw), sn = std::sin(s.robot.yaw);
    s.robot.x += (a.v_x * c - a.v_y * sn) / rates.f_high;
    s.robot.y += (a.v_x * sn + a.v_y * c) / rates.f_high;
    s.robot.yaw = wrap_angle(s.robot.yaw + a.omega_z / rates.f_high);

    const double dt = 1.0 / rates.f_high;
    auto& b = s.body;
    b.h_z = detail::slew(b.h_z, a.h_z, cfg.slew.h_z * dt);
    b.phi = detail::slew(b.phi, a.phi, cfg.slew.phi * dt);
    b.s_y = detail::slew(b.s_y, a.s_y, cfg.slew.s_y * dt);
    b.h_z_f = detail::slew(b.h_z_f, a.h_z_f, cfg.slew.h_z_f * dt);
    b.f = detail::slew(b.f, a.f, cfg.slew.f * dt);
    b.theta = {a.theta_1, a.theta_2, a.theta_3};

    if (s.carried && b.phi >= cfg.release_pitch) {
        Entity ball = *s.carried;
        ball.kind = EntityKind::CarriedBall;
        const Vec2 drop = s.robot.to_world({cfg.drop_offset, 0.0});
        ball.pose = Pose2{drop.x, drop.y, 0.0};
        ball.target = false;
        s.entities.push_back(ball);
        s.carried.reset();
    }

    if (auto v = check_collision(s, cfg)) {
        s.status = Status::Collision;
        s.violation = *v;
    }
}

// Advances one command tick. Throws SimError when the state is already
// terminal or the integration produced a non-finite pose.
inline WorldState apply_command(WorldState s, const ActionCommand& a, const RateConfig& rates,
                                const SimConfig& cfg) {
    if (is_terminal(s.status)) {
        throw SimError("apply_command on terminal state (" + std::string(name(s.status)) + ")");
    }
    const int n = rates.substeps();
    for (int i = 0; i < n && !is_terminal(s.status); ++i) integrate_substep(s, a, rates, cfg);
    if (!std::isfinite(s.robot.x) || !std::isfinite(s.robot.y) || !std::isfinite(s.robot.yaw)) {
        throw SimError("non-finite robot pose after integration");
    }
    s.step_count += 1;
    s.sim_time = static_cast<double>(s.step_count) / rates.f_low;

    if (const Entity* t = find_target(s)) {
        const double err = std::abs(bearing(s.robot, t->pose.position()));
        s.aligned_ticks = err < cfg.distinguish_bearing_deg * M_PI / 180.0 ? s.aligned_ticks + 1 : 0;
    }
    if (!is_terminal(s.status) &&
        (s.robot.x < cfg.arena_min_x || s.robot.x > cfg.arena_max_x ||
         s.robot.y < cfg.arena_min_y || s.robot.y > cfg.arena_max_y)) {
        s.status = Status::OutOfBounds;
        s.violation = "left the arena";
    }
    return s;
}

// ---- success criteria ---------------------------------------------------------

namespace detail {

inline const Entity& require_kind(const WorldState& s, EntityKind kind, bool target,
                                  std::string_view task) {
    for (const auto& e : s.entities) {
        if (e.kind == kind && (!target || e.target)) return e;
    }
    throw ConfigError("scene does not match task " + std::string(task) + ": missing " +
                      (target ? "target " : "") + std::string(enum_name(kind, kEntityKindNames)));
}

} // namespace detail

inline StepOutcome check_success(const WorldState& s, const TaskSpec& task, const SimConfig& cfg) {
    const auto tname = name(task.skill);
    const Entity* target = nullptr;
    switch (task.skill) {
    case Skill::GoTo:
        target = &detail::require_kind(s, EntityKind::TargetObject, true, tname);
        break;
    case Skill::GoAvoid:
        target = &detail::require_kind(s, EntityKind::TargetObject, true, tname);
        detail::require_kind(s, EntityKind::Obstacle, false, tname);
        break;
    case Skill::Crawl:
        target = &detail::require_kind(s, EntityKind::TargetObject, true, tname);
        detail::require_kind(s, EntityKind::Bar, false, tname);
        break;
    case Skill::GoThrough:
        target = &detail::require_kind(s, EntityKind::Tunnel, true, tname);
        break;
    case Skill::Unload:
        target = &detail::require_kind(s, EntityKind::Receptacle, true, tname);
        break;
    case Skill::Distinguish:
        target = &detail::require_kind(s, EntityKind::LetterBox, true, tname);
        break;
    }

    StepOutcome out;
    out.distance_to_target = distance(s.robot.position(), target->pose.position());
    out.violation = s.violation;
    if (is_terminal(s.status)) {
        out.status = s.status;
        return out;
    }

    bool success = false;
    switch (task.skill) {
    case Skill::GoTo:
    case Skill::GoAvoid:
        success = out.distance_to_target < cfg.success_radius;
        break;
    case Skill::Crawl: {
        const Entity& bar = detail::require_kind(s, EntityKind::Bar, false, tname);
        const bool passed =
            bar.pose.to_local(s.robot.position()).x > 0.5 * bar.length + cfg.footprint_radius;
        success = passed && out.distance_to_target < cfg.success_radius;
        break;
    }
    case Skill::GoThrough: {
        const Vec2 l = target->pose.to_local(s.robot.position());
        success = l.x > 0.5 * target->length + cfg.go_through_margin &&
                  std::abs(l.y) < target->inner_half_width();
        break;
    }
    case Skill::Unload: {
        const OrientedRect box{target->pose, 0.5 * target->length, 0.5 * target->width};
        for (const auto& e : s.entities) {
            if (e.kind == EntityKind::CarriedBall && contains(box, e.pose.position())) success = true;
        }
        if (!s.carried && !success) {
            bool any_ball = false;
            for (const auto& e : s.entities) any_ball |= e.kind == EntityKind::CarriedBall;
            if (!any_ball) throw ConfigError("scene does not match task unload: no ball");
        }
        break;
    }
    case Skill::Distinguish:
        success = s.aligned_ticks >= cfg.distinguish_hold_ticks;
        break;
    }

    if (success) {
        out.status = Status::Success;
    } else if (s.step_count >= cfg.max_steps) {
        out.status = Status::Timeout;
    }
    return out;
}

// ---- observation --------------------------------------------------------------

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline Rgb palette(Color c) {
    switch (c) {
    case Color::Green: return {40, 170, 60};
    case Color::Red: return {200, 40, 40};
    case Color::Blue: return {40, 70, 200};
    case Color::Yellow: return {230, 210, 40};
    case Color::Gold: return {212, 175, 55};
    case Color::Pink: return {240, 130, 180};
    case Color::Orange: return {240, 140, 30};
    case Color::Purple: return {130, 50, 160};
    case Color::Gray: return {90, 90, 90};
    }
    return {};
}

inline constexpr Rgb kSkyColor{170, 200, 235};
inline constexpr Rgb kGroundColor{120, 115, 100};
inline constexpr Rgb kGlyphColor{250, 250, 250};

struct Observation {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb; // row-major, 3 bytes per pixel
    CameraIntrinsics intrinsics;

    Rgb at(int u, int v) const {
        const auto i = 3 * (static_cast<std::size_t>(v) * width + u);
        return {rgb[i], rgb[i + 1], rgb[i + 2]};
    }

    friend bool operator==(const Observation&, const Observation&) = default;
};

namespace detail {

// 3x5 glyphs, rows top to bottom, bit 2 = left column.
inline std::array<std::uint8_t, 5> glyph(char letter) {
    switch (letter) {
    case 'A': return {0b010, 0b101, 0b111, 0b101, 0b101};
    case 'B': return {0b110, 0b101, 0b110, 0b101, 0b110};
    case 'C': return {0b011, 0b100, 0b100, 0b100, 0b011};
    case 'D': return {0b110, 0b101, 0b101, 0b101, 0b110};
    case 'E': return {0b111, 0b100, 0b110, 0b100, 0b111};
    case 'F': return {0b111, 0b100, 0b110, 0b100, 0b100};
    default: return {0b111, 0b101, 0b101, 0b101, 0b111};
    }
}

struct RenderBox {
    OrientedRect base;
    double z0 = 0.0, z1 = 0.0;
    Rgb color;
    bool ellipse = false;
    char glyph = 0;
};

inline RenderBox make_box(const Pose2& pose, double hl, double hw, double z0, double z1, Rgb c) {
    return RenderBox{OrientedRect{pose, hl, hw}, z0, z1, c};
}

inline std::vector<RenderBox> render_boxes(const Entity& e) {
    const Rgb c = palette(e.color);
    std::vector<RenderBox> out;
    switch (e.kind) {
    case EntityKind::Tunnel: {
        const double off = 0.5 * e.width - 0.5 * e.wall;
        const double h = e.height;
        const double wall_top = e.section == CrossSection::Rectangle ? h
                                : e.section == CrossSection::Arch    ? 0.7 * h
                                                                     : 0.45 * h;
        for (double side : {off, -off}) {
            const Vec2 p = e.pose.to_world({0.0, side});
            out.push_back(make_box({p.x, p.y, e.pose.yaw}, 0.5 * e.length, 0.5 * e.wall, 0.0,
                                   wall_top, c));
        }
        if (e.section == CrossSection::Rectangle) {
            out.push_back(make_box(e.pose, 0.5 * e.length, 0.5 * e.width, h - 0.08, h, c));
        } else {
            const int slabs = e.section == CrossSection::Triangle ? 3 : 1;
            const double dz = (h - wall_top) / slabs;
            for (int i = 0; i < slabs; ++i) {
                const double shrink = e.section == CrossSection::Triangle ? 1.0 - 0.3 * i : 0.85;
                out.push_back(make_box(e.pose, 0.5 * e.length, 0.5 * e.width * shrink,
                                       wall_top + i * dz, wall_top + (i + 1) * dz, c));
            }
        }
        break;
    }
    case EntityKind::Bar: {
        const double top = e.clearance + 0.05;
        out.push_back(make_box(e.pose, 0.5 * e.length, 0.5 * e.width, e.clearance, top, c));
        for (double side : {0.5 * e.width, -0.5 * e.width}) {
            const Vec2 p = e.pose.to_world({0.0, side});
            out.push_back(make_box({p.x, p.y, e.pose.yaw}, 0.05, 0.05, 0.0, top, c));
        }
        break;
    }
    default: {
        auto b = make_box(e.pose, 0.5 * e.length, 0.5 * e.width, 0.0, e.height, c);
        b.ellipse = e.shape == Shape::Ball || e.kind == EntityKind::CarriedBall;
        if (e.kind == EntityKind::LetterBox) b.glyph = e.letter;
        out.push_back(b);
        break;
    }
    }
    return out;
}

struct CameraFrame {
    double x, y, z, yaw, pitch;

    // (depth, left, up) in camera coordinates; pitch > 0 tilts the view down.
    std::array<double, 3> project_point(double px, double py, double pz) const {
        const double dx = px - x, dy = py - y, dz = pz - z;
        const double c = std::cos(yaw), s = std::sin(yaw);
        const double fwd = c * dx + s * dy;
        const double left = -s * dx + c * dy;
        const double cp = std::cos(pitch), sp = std::sin(pitch);
        return {fwd * cp - dz * sp, left, fwd * sp + dz * cp};
    }
};

} // namespace detail

inline Observation render_observation(const WorldState& s, const CameraIntrinsics& cam) {
    Observation obs;
    obs.width = cam.width;
    obs.height = cam.height;
    obs.intrinsics = cam;
    obs.rgb.resize(static_cast<std::size_t>(cam.width) * cam.height * 3);

    const double f = cam.focal();
    const double cx = 0.5 * cam.width, cy = 0.5 * cam.height;
    const Vec2 mount = s.robot.to_world({cam.mount_forward, 0.0});
    const detail::CameraFrame frame{mount.x, mount.y, s.body.h_z + cam.mount_above_body,
                                    s.robot.yaw, s.body.phi};

    auto put = [&](int u, int v, Rgb c) {
        const auto i = 3 * (static_cast<std::size_t>(v) * cam.width + u);
        obs.rgb[i] = c.r;
        obs.rgb[i + 1] = c.g;
        obs.rgb[i + 2] = c.b;
    };

    const double sp = std::sin(frame.pitch), cp = std::cos(frame.pitch);
    for (int v = 0; v < cam.height; ++v) {
        const double ray_up = (cy - (v + 0.5)) / f;
        const Rgb c = (-sp + ray_up * cp) < 0.0 ? kGroundColor : kSkyColor;
        for (int u = 0; u < cam.width; ++u) put(u, v, c);
    }

    struct Projected {
        double depth;
        double u0, u1, v0, v1;
        const detail::RenderBox* box;
    };
    std::vector<detail::RenderBox> boxes;
    for (const auto& e : s.entities) {
        auto b = detail::render_boxes(e);
        boxes.insert(boxes.end(), b.begin(), b.end());
    }
    std::vector<Projected> visible;
    for (const auto& b : boxes) {
        const auto center = frame.project_point(b.base.pose.x, b.base.pose.y, 0.5 * (b.z0 + b.z1));
        double u0 = 1e300, u1 = -1e300, v0 = 1e300, v1 = -1e300;
        bool any_front = false;
        for (double lx : {-b.base.half_length, b.base.half_length}) {
            for (double ly : {-b.base.half_width, b.base.half_width}) {
                const Vec2 w = b.base.pose.to_world({lx, ly});
                for (double z : {b.z0, b.z1}) {
                    auto p = frame.project_point(w.x, w.y, z);
                    if (p[0] > cam.near_plane) any_front = true;
                    const double d = std::max(p[0], cam.near_plane);
                    const double u = cx - f * p[1] / d;
                    const double v = cy - f * p[2] / d;
                    u0 = std::min(u0, u);
                    u1 = std::max(u1, u);
                    v0 = std::min(v0, v);
                    v1 = std::max(v1, v);
                }
            }
        }
        if (!any_front) continue;
        visible.push_back({center[0], u0, u1, v0, v1, &b});
    }
    // Painter's order: farthest first; stable for equal depth.
    std::stable_sort(visible.begin(), visible.end(),
                     [](const Projected& a, const Projected& b) { return a.depth > b.depth; });

    for (const auto& p : visible) {
        const int iu0 = std::max(0, static_cast<int>(std::ceil(p.u0 - 0.5)));
        const int iu1 = std::min(cam.width - 1, static_cast<int>(std::ceil(p.u1 - 0.5)) - 1);
        const int iv0 = std::max(0, static_cast<int>(std::ceil(p.v0 - 0.5)));
        const int iv1 = std::min(cam.height - 1, static_cast<int>(std::ceil(p.v1 - 0.5)) - 1);
        const double w = p.u1 - p.u0, h = p.v1 - p.v0;
        const auto glyph = detail::glyph(p.box->glyph);
        for (int v = iv0; v <= iv1; ++v) {
            for (int u = iu0; u <= iu1; ++u) {
                const double nu = (u + 0.5 - p.u0) / w; // [0,1) across the box
                const double nv = (v + 0.5 - p.v0) / h;
                if (p.box->ellipse) {
                    const double du = 2.0 * nu - 1.0, dv = 2.0 * nv - 1.0;
                    if (du * du + dv * dv > 1.0) continue;
                }
                Rgb c = p.box->color;
                if (p.box->glyph != 0 && nu >= 0.2 && nu < 0.8 && nv >= 0.15 && nv < 0.85) {
                    const int gx = static_cast<int>((nu - 0.2) / 0.6 * 3.0);
                    const int gy = static_cast<int>((nv - 0.15) / 0.7 * 5.0);
                    if (glyph[gy] & (0b100 >> gx)) c = kGlyphColor;
                }
                put(u, v, c);
            }
        }
    }
    return obs;
}

// ---- PPM (P6) ----------------------------------------------------------------

inline std::string encode_ppm(const Observation& obs) {
    std::string out = "P6\n" + std::to_string(obs.width) + " " + std::to_string(obs.height) +
                      "\n255\n";
    out.append(reinterpret_cast<const char*>(obs.rgb.data()), obs.rgb.size());
    return out;
}

inline Observation decode_ppm(const std::string& bytes) {
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size()) {
            if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        return bytes.substr(start, pos - start);
    };
    if (token() != "P6") throw ParseError("not a binary PPM (P6)");
    Observation obs;
    try {
        obs.width = std::stoi(token());
        obs.height = std::stoi(token());
        if (std::stoi(token()) != 255) throw ParseError("PPM maxval must be 255");
    } catch (const std::logic_error&) {
        throw ParseError("malformed PPM header");
    }
    ++pos; // single whitespace after maxval
    const std::size_t n = static_cast<std::size_t>(obs.width) * obs.height * 3;
    if (obs.width <= 0 || obs.height <= 0 || bytes.size() < pos + n) {
        throw ParseError("truncated PPM payload");
    }
    obs.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
    obs.intrinsics.width = obs.width;
    obs.intrinsics.height = obs.height;
    return obs;
}

inline void write_ppm(const std::filesystem::path& path, const Observation& obs) {
    std::ofstream out(path, std::ios::binary);
    const auto bytes = encode_ppm(obs);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw StoreError("cannot write " + path.string());
}

inline Observation read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_ppm(bytes);
}

// ---- simulator ---------------------------------------------------------------

// Owns one episode's world: steps commands and tracks the task outcome.
class Simulator {
public:
    Simulator(const Scene& scene, TaskSpec task, SimConfig cfg = {}, RateConfig rates = {})
        : task_(std::move(task)), cfg_(std::move(cfg)), rates_(rates),
          state_(initial_state(scene, cfg_)) {
        rates_.validate();
        outcome_ = check_success(state_, task_, cfg_);
        state_.status = outcome_.status;
    }

    const WorldState& state() const { return state_; }
    const StepOutcome& outcome() const { return outcome_; }
    const TaskSpec& task() const { return task_; }
    const SimConfig& config() const { return cfg_; }
    const RateConfig& rates() const { return rates_; }
    bool done() const { return is_terminal(outcome_.status); }

    Observation observe() const { return render_observation(state_, cfg_.camera); }

    // Outcome the command would produce, without committing it.
    StepOutcome predict(const ActionCommand& a) const {
        WorldState next = apply_command(state_, a, rates_, cfg_);
        return check_success(next, task_, cfg_);
    }

    const StepOutcome& step(const ActionCommand& a) {
        state_ = apply_command(state_, a, rates_, cfg_);
        outcome_ = check_success(state_, task_, cfg_);
        state_.status = outcome_.status;
        return outcome_;
    }

private:
    TaskSpec task_;
    SimConfig cfg_;
    RateConfig rates_;
    WorldState state_;
    StepOutcome outcome_;
};

// ---- scene files -------------------------------------------------------------

inline nlohmann::json to_json(const Entity& e) {
    nlohmann::json j = {{"kind", enum_name(e.kind, kEntityKindNames)},
                        {"shape", enum_name(e.shape, kShapeNames)},
                        {"color", name(e.color)},
                        {"pose", {e.pose.x, e.pose.y, e.pose.yaw}},
                        {"dims", {e.length, e.width, e.height}},
                        {"category", e.category},
                        {"target", e.target}};
    if (e.kind == EntityKind::Bar) j["clearance"] = e.clearance;
    if (e.kind == EntityKind::Tunnel) {
        j["wall"] = e.wall;
        j["section"] = enum_name(e.section, kCrossSectionNames);
    }
    if (e.letter != 0) j["letter"] = std::string(1, e.letter);
    return j;
}

inline Entity entity_from_json(const nlohmann::json& j) {
    Entity e;
    try {
        e.kind = require_enum<EntityKind>(j.at("kind").get<std::string>(), kEntityKindNames, "kind");
        e.shape = require_enum<Shape>(j.at("shape").get<std::string>(), kShapeNames, "shape");
        e.color = color_from_name(j.at("color").get<std::string>());
        const auto& p = j.at("pose");
        e.pose = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
        const auto& d = j.at("dims");
        e.length = d.at(0).get<double>();
        e.width = d.at(1).get<double>();
        e.height = d.at(2).get<double>();
        e.category = j.value("category", "");
        e.target = j.value("target", false);
        e.clearance = j.value("clearance", 0.0);
        e.wall = j.value("wall", 0.0);
        e.section = require_enum<CrossSection>(j.value("section", "rectangle"), kCrossSectionNames,
                                               "section");
        const std::string letter = j.value("letter", "");
        e.letter = letter.empty() ? 0 : letter[0];
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("scene entity: ") + ex.what());
    }
    validate_entity(e);
    return e;
}

inline nlohmann::json to_json(const Scene& s) {
    nlohmann::json ents = nlohmann::json::array();
    for (const auto& e : s.entities) ents.push_back(to_json(e));
    nlohmann::json j = {{"start", {s.start.x, s.start.y, s.start.yaw}}, {"entities", ents}};
    if (s.carried) j["carried"] = to_json(*s.carried);
    return j;
}

inline Scene scene_from_json(const nlohmann::json& j) {
    Scene s;
    try {
        if (j.contains("start")) {
            const auto& p = j.at("start");
            s.start = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
        }
        for (const auto& e : j.at("entities")) s.entities.push_back(entity_from_json(e));
        if (j.contains("carried")) s.carried = entity_from_json(j.at("carried"));
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("scene: ") + ex.what());
    }
    return s;
}

} // namespace quard
