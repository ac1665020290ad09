// Copyright (c) 2026 The quard authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "quard/world_sim.hpp"

using namespace quard;

namespace {

Entity target_at(double x, double y) {
    Entity e;
    e.kind = EntityKind::TargetObject;
    e.shape = Shape::Cube;
    e.color = Color::Red;
    e.category = "cube";
    e.pose = {x, y, 0.0};
    e.target = true;
    return e;
}

Scene goto_scene(double tx = 3.0, double ty = 1.0) {
    Scene s;
    s.entities.push_back(target_at(tx, ty));
    return s;
}

TaskSpec goto_task() {
    TaskSpec t;
    t.skill = Skill::GoTo;
    t.object = {"cube", Color::Red, 0};
    return t;
}

ActionCommand walk(double v_x, double omega_z = 0.0) {
    ActionCommand a;
    a.v_x = v_x;
    a.omega_z = omega_z;
    a.f = 3.0;
    a.h_z = 0.25;
    a.s_y = 0.20;
    a.h_z_f = 0.08;
    return a;
}

// Brute-force distance from p to a rectangle by sampling its area.
double sampled_distance(const OrientedRect& r, Vec2 p, int n) {
    double best = 1e9;
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
            const double lx = -r.half_length + 2 * r.half_length * i / n;
            const double ly = -r.half_width + 2 * r.half_width * j / n;
            best = std::min(best, distance(r.pose.to_world({lx, ly}), p));
        }
    }
    return best;
}

} // namespace

TEST(RateConfig, SubstepsDivideExactly) {
    RateConfig r;
    EXPECT_EQ(r.substeps(), 25);
    EXPECT_NO_THROW(r.validate());
    r.f_high = 50.0;
    r.f_low = 3.0;
    EXPECT_THROW(r.validate(), ConfigError);
    r.f_low = 0.0;
    EXPECT_THROW(r.validate(), ConfigError);
    r = {10.0, 10.0};
    EXPECT_EQ(r.substeps(), 1);
    EXPECT_NO_THROW(r.validate());
}

TEST(WorldSim, RobotStartsAtOrigin) {
    const auto s = initial_state(goto_scene(), SimConfig{});
    EXPECT_EQ(s.robot.x, 0.0);
    EXPECT_EQ(s.robot.y, 0.0);
    EXPECT_EQ(s.robot.yaw, 0.0);
    EXPECT_EQ(s.step_count, 0);
    EXPECT_EQ(s.status, Status::Running);
}

TEST(WorldSim, StraightLineMatchesClosedForm) {
    const SimConfig cfg;
    const RateConfig rates;
    auto s = initial_state(goto_scene(), cfg);
    for (int k = 1; k <= 4; ++k) {
        s = apply_command(s, walk(0.4), rates, cfg);
        EXPECT_NEAR(s.robot.x, 0.4 * k / rates.f_low, 1e-12);
        EXPECT_NEAR(s.robot.y, 0.0, 1e-12);
        EXPECT_DOUBLE_EQ(s.sim_time, static_cast<double>(s.step_count) / rates.f_low);
    }
}

TEST(WorldSim, ArcApproachesContinuousSolution) {
    const SimConfig cfg;
    const RateConfig rates;
    const double v = 0.5, w = 0.8, T = 1.0 / rates.f_low;
    auto s = initial_state(goto_scene(), cfg);
    s = apply_command(s, walk(v, w), rates, cfg);
    // Continuous unicycle: x = v/w sin(wT), y = v/w (1 - cos(wT)).
    // Forward Euler with step dt differs by at most v*w*T*dt/2.
    const double dt = 1.0 / rates.f_high, bound = v * w * T * dt;
    EXPECT_NEAR(s.robot.x, v / w * std::sin(w * T), bound);
    EXPECT_NEAR(s.robot.y, v / w * (1 - std::cos(w * T)), bound);
    EXPECT_NEAR(s.robot.yaw, w * T, 1e-12);
}

TEST(WorldSim, LateralVelocityMovesSideways) {
    const SimConfig cfg;
    auto s = initial_state(goto_scene(), cfg);
    auto a = walk(0.0);
    a.v_y = 0.3;
    s = apply_command(s, a, RateConfig{}, cfg);
    EXPECT_NEAR(s.robot.x, 0.0, 1e-12);
    EXPECT_NEAR(s.robot.y, 0.15, 1e-12);
}

TEST(WorldSim, BodyFieldsSlewTowardCommand) {
    SimConfig cfg;
    auto s = initial_state(goto_scene(), cfg);
    auto a = walk(0.0);
    a.h_z = 0.12;
    s = apply_command(s, a, RateConfig{}, cfg);
    // 0.2 m/s for 0.5 s reaches 0.15 from 0.25.
    EXPECT_NEAR(s.body.h_z, 0.15, 1e-9);
    s = apply_command(s, a, RateConfig{}, cfg);
    EXPECT_NEAR(s.body.h_z, 0.12, 1e-9);
}

TEST(WorldSim, SuccessRadiusIsStrict) {
    const SimConfig cfg;
    auto s = initial_state(goto_scene(3.0, 1.0), cfg);
    s.robot = {2.0, 1.0, 0.0};
    EXPECT_EQ(check_success(s, goto_task(), cfg).status, Status::Running);
    s.robot = {2.0 + 1e-9, 1.0, 0.0};
    EXPECT_EQ(check_success(s, goto_task(), cfg).status, Status::Success);
}

TEST(WorldSim, TerminalStatusesAreAbsorbing) {
    Simulator sim(goto_scene(0.9, 0.0), goto_task());
    EXPECT_EQ(sim.outcome().status, Status::Success);
    EXPECT_TRUE(sim.done());
    EXPECT_THROW(sim.step(walk(0.5)), SimError);
    EXPECT_EQ(sim.outcome().status, Status::Success);
}

TEST(WorldSim, TimeoutAfterMaxSteps) {
    SimConfig cfg;
    cfg.max_steps = 5;
    Simulator sim(goto_scene(), goto_task(), cfg);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(sim.step(walk(0.0)).status, Status::Running);
    EXPECT_EQ(sim.step(walk(0.0)).status, Status::Timeout);
}

TEST(WorldSim, CollisionWithObstacle) {
    Scene scene = goto_scene();
    Entity ob;
    ob.kind = EntityKind::Obstacle;
    ob.color = Color::Gray;
    ob.pose = {1.0, 0.0, 0.0};
    ob.length = ob.width = 0.4;
    scene.entities.push_back(ob);
    Simulator sim(scene, goto_task());
    StepOutcome out;
    for (int i = 0; i < 6 && !sim.done(); ++i) out = sim.step(walk(0.8));
    EXPECT_EQ(out.status, Status::Collision);
    // The robot stops at first contact: center within one substep of radius + half size.
    EXPECT_NEAR(sim.state().robot.x, 1.0 - 0.2 - 0.2, 0.8 / 50 + 1e-9);
    EXPECT_NE(out.violation.find("obstacle"), std::string::npos);
}

TEST(WorldSim, OutOfBounds) {
    SimConfig cfg;
    cfg.arena_min_x = -0.2;
    Simulator sim(goto_scene(), goto_task(), cfg);
    EXPECT_EQ(sim.step(walk(-0.8)).status, Status::OutOfBounds);
}

TEST(WorldSim, BarRequiresLoweredBody) {
    Scene scene = goto_scene(3.0, 0.0);
    Entity bar;
    bar.kind = EntityKind::Bar;
    bar.shape = Shape::Bar;
    bar.color = Color::Gray;
    bar.pose = {1.0, 0.0, 0.0};
    bar.length = 0.06;
    bar.width = 1.6;
    bar.clearance = 0.18;
    bar.height = 0.23;
    scene.entities.push_back(bar);
    TaskSpec task = goto_task();
    task.skill = Skill::Crawl;

    Simulator high(scene, task);
    StepOutcome out;
    for (int i = 0; i < 6 && !high.done(); ++i) out = high.step(walk(0.5));
    EXPECT_EQ(out.status, Status::Collision);
    EXPECT_EQ(out.violation, "body height above bar clearance");

    Simulator low(scene, task);
    auto crouch = walk(0.0);
    crouch.h_z = 0.12;
    low.step(crouch);
    low.step(crouch);
    auto crawl = walk(0.5);
    crawl.h_z = 0.12;
    for (int i = 0; i < 12 && !low.done(); ++i) out = low.step(crawl);
    EXPECT_EQ(out.status, Status::Success);
}

TEST(WorldSim, TunnelRejectsWideStance) {
    Entity tunnel;
    tunnel.kind = EntityKind::Tunnel;
    tunnel.shape = Shape::TunnelFrame;
    tunnel.pose = {1.5, 0.0, 0.0};
    tunnel.length = 1.0;
    tunnel.width = 1.2;
    tunnel.height = 0.6;
    tunnel.wall = 0.1;
    tunnel.target = true;
    Scene scene;
    scene.entities.push_back(tunnel);
    TaskSpec task;
    task.skill = Skill::GoThrough;
    task.object = {"rectangle", Color::Blue, 0};

    SimConfig cfg;
    WorldState s = initial_state(scene, cfg);
    s.robot = {1.5, 0.28, 0.0};
    s.body.s_y = 0.40;
    EXPECT_EQ(check_collision(s, cfg).value_or(""), "stance too wide for tunnel");
    s.body.s_y = 0.20;
    EXPECT_FALSE(check_collision(s, cfg).has_value());
    // Outside the tunnel footprint the stance is unconstrained.
    s.robot = {1.5, 2.0, 0.0};
    s.body.s_y = 0.45;
    EXPECT_FALSE(check_collision(s, cfg).has_value());

    s = initial_state(scene, cfg);
    s.robot = {1.5 + 0.5 + 0.31, 0.0, 0.0};
    EXPECT_EQ(check_success(s, task, cfg).status, Status::Success);
    s.robot = {1.5 + 0.5 + 0.29, 0.0, 0.0};
    EXPECT_EQ(check_success(s, task, cfg).status, Status::Running);
}

TEST(WorldSim, PitchReleasesCarriedBallIntoReceptacle) {
    SimConfig cfg;
    Entity tray;
    tray.kind = EntityKind::Receptacle;
    tray.shape = Shape::Tray;
    tray.category = "traybox";
    tray.pose = {cfg.drop_offset, 0.0, 0.0};
    tray.length = tray.width = 0.5;
    tray.target = true;
    Entity ball;
    ball.kind = EntityKind::CarriedBall;
    ball.shape = Shape::Ball;
    ball.length = ball.width = ball.height = 0.1;
    Scene scene;
    scene.entities.push_back(tray);
    scene.carried = ball;
    TaskSpec task;
    task.skill = Skill::Unload;
    task.object = {"traybox", Color::Green, 0};

    Simulator sim(scene, task, cfg);
    auto tilt = walk(0.0);
    tilt.phi = 0.4;
    // Pitch reaches the release angle during the second tick; the ball
    // drops drop_offset ahead of the robot, inside the tray.
    EXPECT_EQ(sim.step(tilt).status, Status::Running);
    EXPECT_TRUE(sim.state().carried.has_value());
    const auto out = sim.step(tilt);
    EXPECT_FALSE(sim.state().carried.has_value());
    EXPECT_EQ(out.status, Status::Success);
}

TEST(WorldSim, DistinguishNeedsHeldAlignment) {
    Entity box;
    box.kind = EntityKind::LetterBox;
    box.shape = Shape::Box;
    box.category = "letterbox";
    box.letter = 'C';
    box.pose = {2.0, 0.0, 0.0};
    box.target = true;
    Scene scene;
    scene.entities.push_back(box);
    TaskSpec task;
    task.skill = Skill::Distinguish;
    task.object = {"letterbox", Color::Red, 'C'};
    SimConfig cfg;
    Simulator sim(scene, task, cfg);
    for (int i = 1; i < cfg.distinguish_hold_ticks; ++i) EXPECT_EQ(sim.step(walk(0.0)).status, Status::Running);
    EXPECT_EQ(sim.step(walk(0.0)).status, Status::Success);
}

TEST(WorldSim, ObservationIsDeterministic) {
    const SimConfig cfg;
    auto s = initial_state(goto_scene(), cfg);
    s = apply_command(s, walk(0.3, 0.2), RateConfig{}, cfg);
    const auto a = render_observation(s, cfg.camera);
    const auto b = render_observation(s, cfg.camera);
    EXPECT_EQ(a.rgb, b.rgb);
    EXPECT_EQ(a.width, 64);
    EXPECT_EQ(a.height, 48);
    EXPECT_EQ(a.rgb.size(), 64u * 48u * 3u);
    EXPECT_EQ(encode_ppm(a), encode_ppm(b));
}

TEST(WorldSim, TargetIsVisibleWhenFacingIt) {
    const SimConfig cfg;
    auto s = initial_state(goto_scene(2.0, 0.0), cfg);
    const auto obs = render_observation(s, cfg.camera);
    const Rgb red = palette(Color::Red);
    int hits = 0;
    for (int v = 0; v < obs.height; ++v) {
        for (int u = 0; u < obs.width; ++u) hits += obs.at(u, v) == red;
    }
    EXPECT_GT(hits, 0);
    s.robot.yaw = M_PI;
    const auto away = render_observation(s, cfg.camera);
    hits = 0;
    for (int v = 0; v < away.height; ++v) {
        for (int u = 0; u < away.width; ++u) hits += away.at(u, v) == red;
    }
    EXPECT_EQ(hits, 0);
}

TEST(WorldSim, PpmRoundTrip) {
    const SimConfig cfg;
    const auto obs = render_observation(initial_state(goto_scene(), cfg), cfg.camera);
    const auto back = decode_ppm(encode_ppm(obs));
    EXPECT_EQ(back.width, obs.width);
    EXPECT_EQ(back.height, obs.height);
    EXPECT_EQ(back.rgb, obs.rgb);
    EXPECT_THROW(decode_ppm("P5\n1 1\n255\n\0"), ParseError);
    EXPECT_THROW(decode_ppm("P6\n4 4\n255\nabc"), ParseError);
}

TEST(Geometry, RectDistanceMatchesDenseSampling) {
    std::mt19937_64 g(21);
    std::uniform_real_distribution<double> u(-2.0, 2.0), ext(0.05, 0.8), ang(-M_PI, M_PI);
    for (int n = 0; n < 300; ++n) {
        const OrientedRect r{{u(g), u(g), ang(g)}, ext(g), ext(g)};
        const Vec2 p{u(g), u(g)};
        const int samples = 200;
        // Sample spacing bounds the oracle's error.
        const double tol = std::hypot(r.half_length, r.half_width) * 2.0 / samples;
        EXPECT_NEAR(distance_to(r, p), sampled_distance(r, p, samples), tol);
        EXPECT_EQ(contains(r, p), distance_to(r, p) == 0.0);
    }
}

TEST(Geometry, DiscOverlapIsStrict) {
    const Disc d{{1.0, 0.0}, 0.5};
    EXPECT_FALSE(disc_overlaps({0.0, 0.0}, 0.5, Footprint{d}));
    EXPECT_TRUE(disc_overlaps({0.0, 0.0}, 0.5000001, Footprint{d}));
}

TEST(WorldSim, SceneJsonRoundTrip) {
    Scene scene = goto_scene(3.1, 0.95);
    Entity t;
    t.kind = EntityKind::Tunnel;
    t.shape = Shape::TunnelFrame;
    t.section = CrossSection::Triangle;
    t.wall = 0.1;
    t.width = 1.2;
    t.length = 1.0;
    t.color = Color::Purple;
    t.category = "triangle";
    scene.entities.push_back(t);
    scene.start = {0.0, 0.0, 0.25};
    EXPECT_EQ(scene_from_json(to_json(scene)), scene);
}

TEST(WorldSim, EntityDimsMustBePositive) {
    Scene scene = goto_scene();
    scene.entities[0].width = 0.0;
    EXPECT_THROW(initial_state(scene, SimConfig{}), ConfigError);
}
