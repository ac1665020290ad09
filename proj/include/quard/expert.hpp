/*
 * Copyright (c) 2026 The quard authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

// Automated demonstration collection: scene sampling under the collection
// constraints, grid planning, and a PD path tracker whose speed is post-scaled
// into the requested speed band.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "quard/action_codec.hpp"
#include "quard/episode.hpp"
#include "quard/instruction.hpp"
#include "quard/planning.hpp"
#include "quard/random.hpp"
#include "quard/types.hpp"
#include "quard/world_sim.hpp"

namespace quard {

struct SpeedBand {
    double lo = 0.4;
    double hi = 0.7;

    bool contains(double v) const { return v >= lo && v <= hi; }
};

struct PDGains {
    double k_p_lin = 1.0;
    double k_d_lin = 0.1;
    double k_p_ang = 2.0;
    double k_d_ang = 0.2;

    void validate() const {
        if (k_p_lin < 0 || k_d_lin < 0 || k_p_ang < 0 || k_d_ang < 0) {
            throw ConfigError("PD gains must be nonnegative");
        }
    }
};

struct GaitProfile {
    std::array<double, 3> theta{};
    double frequency = 3.0;
};

enum class PlannerKind { AStar, DStarLite };

struct ExpertConfig {
    PDGains gains;
    std::map<SpeedLevel, SpeedBand> bands = {{SpeedLevel::Slow, {0.2, 0.39}},
                                             {SpeedLevel::Normal, {0.4, 0.69}},
                                             {SpeedLevel::Fast, {0.7, 1.0}}};
    // Turn-rate caps for in-place rotation, per speed level (rad/s).
    std::map<SpeedLevel, double> turn_rates = {
        {SpeedLevel::Slow, 0.4}, {SpeedLevel::Normal, 0.7}, {SpeedLevel::Fast, 1.0}};
    std::map<Gait, GaitProfile> gaits = {{Gait::Trot, {{0.5, 0.0, 0.0}, 3.0}},
                                         {Gait::Bound, {{0.0, 0.5, 0.0}, 2.5}},
                                         {Gait::Pace, {{0.0, 0.0, 0.5}, 2.5}},
                                         {Gait::Pronk, {{0.0, 0.0, 0.0}, 2.0}}};
    // Sampling weights for gaits in generated plans (trot dominates).
    std::map<Gait, double> gait_weights = {
        {Gait::Trot, 0.6}, {Gait::Bound, 0.15}, {Gait::Pace, 0.15}, {Gait::Pronk, 0.1}};
    double lookahead = 0.4;
    double max_turn_rate = 1.0;
    GridSpec grid;
    PlannerKind planner = PlannerKind::AStar;
    double crawl_below_clearance = 0.05;
    double crawl_lower_distance = 1.2;
    double release_pitch_command = 0.35;
    double align_tolerance_deg = 3.0;
    double arrive_tolerance = 0.1;
    double go_through_overshoot = 0.45;
    double tunnel_approach = 0.6;
    double receptacle_approach = 0.4;

    // Bands must cover every level, be nonempty, and be disjoint in
    // slow < normal < fast order.
    void validate() const {
        gains.validate();
        const SpeedBand* prev = nullptr;
        for (SpeedLevel lvl : kAllSpeeds) {
            const auto it = bands.find(lvl);
            if (it == bands.end()) throw ConfigError("missing speed band " + std::string(name(lvl)));
            const SpeedBand& b = it->second;
            if (!(b.lo >= 0.0 && b.lo < b.hi)) throw ConfigError("speed band must satisfy 0 <= lo < hi");
            if (prev && !(prev->hi < b.lo)) throw ConfigError("speed bands must be disjoint and ordered");
            prev = &b;
        }
    }
};

// ---- scene sampling ----------------------------------------------------------

struct SceneRules {
    double target_x_min = 2.7, target_x_max = 3.3;
    double target_y_min = 0.9, target_y_max = 1.1;
    double obstacle_offset_x = 1.5;
    double obstacle_size = 0.5;
    double bar_offset_x = 1.5;
    double bar_span = 1.6;
    double bar_clearance_min = 0.17, bar_clearance_max = 0.20;
    double tunnel_spacing = 2.0;
    double tunnel_wall = 0.15;
    double letter_spacing = 1.0;
};

namespace detail {

inline Entity entity_from_catalog(const CatalogEntry& c, EntityKind kind, Color color, Pose2 pose) {
    Entity e;
    e.kind = kind;
    e.shape = c.shape;
    e.color = color;
    e.pose = pose;
    e.length = c.length;
    e.width = c.width;
    e.height = c.height;
    e.category = std::string(c.category);
    return e;
}

inline CrossSection section_of(std::string_view category) {
    if (category == "triangle") return CrossSection::Triangle;
    if (category == "arch") return CrossSection::Arch;
    return CrossSection::Rectangle;
}

} // namespace detail

// Robot at the origin facing +x; target uniformly in the collection box.
// Per-task rules:
//   go_avoid    gray obstacle at (target_x - 1.5, target_y)
//   crawl       gray bar across the straight approach at target_x - 1.5
//   go_through  target tunnel at the target point, a distractor tunnel of
//               another color and cross-section 2 m to its right
//   unload      receptacle at the target point, ball carried on the back
//   distinguish target letter box plus two distractor boxes at y = 0 and
//               y = -target_y, all the same color
inline Scene sample_scene(const TaskSpec& task, std::uint64_t seed, const SceneRules& rules = {}) {
    validate_task(task);
    Rng rng(seed);
    const double tx = rng.uniform(rules.target_x_min, rules.target_x_max);
    const double ty = rng.uniform(rules.target_y_min, rules.target_y_max);
    const double facing = std::atan2(ty, tx);
    const CatalogEntry cat = require_catalog(task.skill, task.object.category);

    Scene s;
    switch (task.skill) {
    case Skill::GoTo:
    case Skill::GoAvoid:
    case Skill::Crawl: {
        auto target = detail::entity_from_catalog(cat, EntityKind::TargetObject, task.object.color,
                                                  {tx, ty, facing});
        target.target = true;
        s.entities.push_back(target);
        if (task.skill == Skill::GoAvoid) {
            Entity ob;
            ob.kind = EntityKind::Obstacle;
            ob.shape = Shape::Cube;
            ob.color = Color::Gray;
            ob.pose = {tx - rules.obstacle_offset_x, ty, 0.0};
            ob.length = ob.width = ob.height = rules.obstacle_size;
            ob.category = "obstacle";
            s.entities.push_back(ob);
        }
        if (task.skill == Skill::Crawl) {
            const double bx = tx - rules.bar_offset_x;
            Entity bar;
            bar.kind = EntityKind::Bar;
            bar.shape = Shape::Bar;
            bar.color = Color::Gray;
            bar.pose = {bx, ty * bx / tx, facing};
            bar.length = 0.06;
            bar.width = rules.bar_span;
            bar.clearance = rng.uniform(rules.bar_clearance_min, rules.bar_clearance_max);
            bar.height = bar.clearance + 0.05;
            bar.category = "bar";
            s.entities.push_back(bar);
        }
        break;
    }
    case Skill::GoThrough: {
        auto target = detail::entity_from_catalog(cat, EntityKind::Tunnel, task.object.color,
                                                  {tx, ty, 0.0});
        target.target = true;
        target.wall = rules.tunnel_wall;
        target.section = detail::section_of(target.category);
        s.entities.push_back(target);

        std::vector<Color> others;
        for (Color c : kSeenColors) {
            if (c != task.object.color) others.push_back(c);
        }
        const Color dc = others[rng.below(others.size())];
        const std::string_view dcat = target.section == CrossSection::Triangle ? "rectangle" : "triangle";
        auto distractor = detail::entity_from_catalog(require_catalog(Skill::GoThrough, dcat),
                                                      EntityKind::Tunnel, dc,
                                                      {tx, ty - rules.tunnel_spacing, 0.0});
        distractor.wall = rules.tunnel_wall;
        distractor.section = detail::section_of(dcat);
        s.entities.push_back(distractor);
        break;
    }
    case Skill::Unload: {
        auto rec = detail::entity_from_catalog(cat, EntityKind::Receptacle, task.object.color,
                                               {tx, ty, facing});
        rec.target = true;
        s.entities.push_back(rec);
        Entity ball;
        ball.kind = EntityKind::CarriedBall;
        ball.shape = Shape::Ball;
        ball.color = Color::Gray;
        ball.length = ball.width = ball.height = 0.12;
        ball.category = "ball";
        s.carried = ball;
        break;
    }
    case Skill::Distinguish: {
        std::vector<char> others;
        for (char l : kLetters) {
            if (l != task.object.letter) others.push_back(l);
        }
        rng.shuffle(others.begin(), others.end());
        const std::array<double, 3> ys = {ty, ty - rules.letter_spacing * ty, -ty};
        for (std::size_t i = 0; i < ys.size(); ++i) {
            auto box = detail::entity_from_catalog(cat, EntityKind::LetterBox, task.object.color,
                                                   {tx, ys[i], std::atan2(ys[i], tx)});
            box.letter = i == 0 ? task.object.letter : others[i - 1];
            box.target = i == 0;
            s.entities.push_back(box);
        }
        break;
    }
    }
    return s;
}

// ---- path tracking -------------------------------------------------------------

// Lookahead point selection plus a PD law on heading error and remaining
// along-track distance. Holds the previous errors for the derivative terms.
class PathTracker {
public:
    PathTracker(PlannedPath path, SpeedBand band, PDGains gains, double lookahead, double f_low,
                double max_turn_rate = 1.0)
        : path_(std::move(path)), band_(band), gains_(gains), lookahead_(lookahead),
          f_low_(f_low), max_turn_(max_turn_rate) {
        if (path_.empty()) throw ConfigError("path tracker needs a nonempty path");
        arc_.resize(path_.waypoints.size(), 0.0);
        for (std::size_t i = 1; i < arc_.size(); ++i) {
            arc_[i] = arc_[i - 1] + distance(path_.waypoints[i - 1], path_.waypoints[i]);
        }
    }

    struct Output {
        double v_x = 0.0;
        double omega_z = 0.0;
        double remaining = 0.0;
        double cross_track = 0.0;
    };

    Output track(const Pose2& pose) {
        const Vec2 p = pose.position();
        // Closest waypoint, searched forward from the last match.
        std::size_t best = progress_;
        double best_d = distance(p, path_.waypoints[best]);
        for (std::size_t i = progress_; i < path_.waypoints.size(); ++i) {
            if (arc_[i] - arc_[progress_] > 2.0 + lookahead_) break;
            const double d = distance(p, path_.waypoints[i]);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        progress_ = best;

        // The lookahead never falls inside one command tick of travel.
        const double reach = std::max(lookahead_, 1.5 * band_.hi / f_low_);
        std::size_t look = best;
        while (look + 1 < path_.waypoints.size() && arc_[look] - arc_[best] < reach) ++look;
        const Vec2 target = path_.waypoints[look];

        Output out;
        out.cross_track = best_d;
        out.remaining = arc_.back() - arc_[best] + best_d;
        const double err = look == best && best_d < 1e-9 ? 0.0 : bearing(pose, target);

        const double d_err = first_ ? 0.0 : (err - prev_err_) * f_low_;
        const double d_rem = first_ ? 0.0 : (out.remaining - prev_remaining_) * f_low_;
        first_ = false;
        prev_err_ = err;
        prev_remaining_ = out.remaining;

        out.omega_z = std::clamp(gains_.k_p_ang * err + gains_.k_d_ang * d_err, -max_turn_, max_turn_);
        const double v_raw = gains_.k_p_lin * out.remaining + gains_.k_d_lin * d_rem;
        // Post-scale into the band, then never overshoot the end of the path.
        double v = std::clamp(v_raw, band_.lo, band_.hi);
        v = std::min(v, out.remaining * f_low_);
        out.v_x = std::max(v, 0.0);
        return out;
    }

    const PlannedPath& path() const { return path_; }

private:
    PlannedPath path_;
    std::vector<double> arc_;
    SpeedBand band_;
    PDGains gains_;
    double lookahead_;
    double f_low_;
    double max_turn_;
    std::size_t progress_ = 0;
    bool first_ = true;
    double prev_err_ = 0.0;
    double prev_remaining_ = 0.0;
};

// One-shot tracking command (no derivative history) with the gait and body
// fields filled in.
inline ActionCommand track_path(const WorldState& state, const PlannedPath& path, SpeedBand band,
                                const PDGains& gains, const GaitProfile& gait,
                                const BodyState& body, double lookahead = 0.4, double f_low = 2.0) {
    PathTracker tracker(path, band, gains, lookahead, f_low);
    const auto out = tracker.track(state.robot);
    ActionCommand a;
    a.v_x = out.v_x;
    a.omega_z = out.omega_z;
    a.theta_1 = gait.theta[0];
    a.theta_2 = gait.theta[1];
    a.theta_3 = gait.theta[2];
    a.f = gait.frequency;
    a.h_z = body.h_z;
    a.phi = body.phi;
    a.s_y = body.s_y;
    a.h_z_f = body.h_z_f;
    return a;
}

// ---- expert controller ----------------------------------------------------------

// Privileged per-task expert. Plans lazily from the state it first sees.
class ExpertController {
public:
    ExpertController(TaskSpec task, ExpertConfig cfg = {}, SimConfig sim = {}, RateConfig rates = {})
        : task_(std::move(task)), cfg_(std::move(cfg)), sim_(std::move(sim)), rates_(rates) {
        cfg_.validate();
    }

    const TaskSpec& task() const { return task_; }
    const std::optional<PathTracker>& tracker() const { return tracker_; }

    // Throws NoPathError when the navigation goal cannot be reached.
    ActionCommand act(const WorldState& s) {
        ActionCommand a = base_command();
        const Entity* target = find_target(s);
        if (!target) throw ConfigError("expert needs a target entity");

        if (task_.skill == Skill::Distinguish) {
            a.omega_z = turn_toward(s.robot, target->pose.position());
            return a;
        }

        if (!tracker_) plan(s, *target);

        if (phase_ == Phase::Navigate) {
            const auto out = tracker_->track(s.robot);
            last_cross_track_ = out.cross_track;
            a.v_x = out.v_x;
            a.omega_z = out.omega_z;
            if (task_.skill == Skill::Unload && out.remaining < cfg_.arrive_tolerance) {
                phase_ = Phase::Align;
            }
        }
        if (phase_ == Phase::Align) {
            a.v_x = 0.0;
            const double err = bearing(s.robot, target->pose.position());
            a.omega_z = turn_toward(s.robot, target->pose.position());
            if (std::abs(err) < cfg_.align_tolerance_deg * M_PI / 180.0) phase_ = Phase::Release;
        }
        if (phase_ == Phase::Release) {
            a.v_x = 0.0;
            a.omega_z = 0.0;
            a.phi = cfg_.release_pitch_command;
        }
        if (task_.skill == Skill::Crawl) a.h_z = crawl_height(s);
        return a;
    }

    double last_cross_track() const { return last_cross_track_; }

private:
    enum class Phase { Navigate, Align, Release };

    TaskSpec task_;
    ExpertConfig cfg_;
    SimConfig sim_;
    RateConfig rates_;
    std::optional<PathTracker> tracker_;
    Phase phase_ = Phase::Navigate;
    double last_cross_track_ = 0.0;

    ActionCommand base_command() const {
        const auto& g = cfg_.gaits.at(task_.gait);
        ActionCommand a;
        a.theta_1 = g.theta[0];
        a.theta_2 = g.theta[1];
        a.theta_3 = g.theta[2];
        a.f = g.frequency;
        a.h_z = sim_.standing.h_z;
        a.phi = sim_.standing.phi;
        a.s_y = sim_.standing.s_y;
        a.h_z_f = sim_.standing.h_z_f;
        return a;
    }

    double turn_toward(const Pose2& robot, Vec2 p) const {
        const double cap = std::min(cfg_.turn_rates.at(task_.speed), cfg_.max_turn_rate);
        // Deadbeat gain for one command tick, capped by the speed level.
        return std::clamp(bearing(robot, p) * rates_.f_low, -cap, cap);
    }

    Vec2 navigation_goal(const WorldState& s, const Entity& target) const {
        switch (task_.skill) {
        case Skill::GoThrough:
            return target.pose.to_world({0.5 * target.length + cfg_.go_through_overshoot, 0.0});
        case Skill::Unload: {
            const Vec2 d = target.pose.position() - s.robot.position();
            const double n = norm(d);
            return target.pose.position() - (sim_.drop_offset / n) * d;
        }
        default:
            return target.pose.position();
        }
    }

    void plan(const WorldState& s, const Entity& target) {
        const OccupancyGrid grid = build_grid(s.entities, cfg_.grid);
        const Vec2 goal = navigation_goal(s, target);
        // Tunnels and receptacles end with a straight run from an approach
        // point; the planner only covers the leg up to it.
        Vec2 approach = goal;
        if (task_.skill == Skill::GoThrough) {
            approach = target.pose.to_world({-(0.5 * target.length + cfg_.tunnel_approach), 0.0});
        } else if (task_.skill == Skill::Unload) {
            const Vec2 d = goal - s.robot.position();
            approach = goal - (cfg_.receptacle_approach / norm(d)) * d;
        }
        const bool straight_run = distance(approach, goal) > 0.0;
        PlannedPath path;
        if (cfg_.planner == PlannerKind::DStarLite) {
            DStarLite d(grid, grid.cell_of(s.robot.position()), grid.cell_of(approach));
            path = d.path();
        } else {
            path = plan_astar(grid, s.robot.position(), approach);
        }
        // Pin the endpoints to the continuous start and goal.
        path.waypoints.front() = s.robot.position();
        path.waypoints.back() = approach;
        if (straight_run) {
            const double len = distance(approach, goal);
            const int n = std::max(1, static_cast<int>(std::ceil(len / cfg_.grid.resolution)));
            for (int i = 1; i <= n; ++i) {
                const double u = static_cast<double>(i) / n;
                path.waypoints.push_back(approach + u * (goal - approach));
            }
        }
        tracker_.emplace(std::move(path), cfg_.bands.at(task_.speed), cfg_.gains, cfg_.lookahead,
                         rates_.f_low, cfg_.max_turn_rate);
    }

    double crawl_height(const WorldState& s) const {
        for (const auto& e : s.entities) {
            if (e.kind != EntityKind::Bar) continue;
            const Vec2 l = e.pose.to_local(s.robot.position());
            const bool passed = l.x > 0.5 * e.length + sim_.footprint_radius + 0.05;
            const double d = distance_to(Footprint{bar_beam(e)}, s.robot.position());
            if (!passed && d < cfg_.crawl_lower_distance) {
                return e.clearance - cfg_.crawl_below_clearance;
            }
        }
        return sim_.standing.h_z;
    }
};

// ---- episode generation ------------------------------------------------------------

struct CollectionConfig {
    ActionSpaceSpec action_space = ActionSpaceSpec::defaults();
    RateConfig rates;
    SimConfig sim;
    ExpertConfig expert;
    SceneRules scene;
};

inline std::string episode_id(Skill skill, Source source, std::uint64_t seed) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s-%s-%016llx", std::string(name(skill)).c_str(),
                  std::string(name(source)).c_str(), static_cast<unsigned long long>(seed));
    return buf;
}

// Operator noise applied on top of the expert to imitate remote-control data.
struct TeleopNoise {
    double omega_std = 0.0;
    double speed_std = 0.0;
};

namespace detail {

inline Episode rollout(const TaskSpec& task, std::uint64_t seed, const CollectionConfig& cfg,
                       Source source, const TeleopNoise& noise) {
    Episode ep;
    ep.id = episode_id(task.skill, source, seed);
    ep.instruction = render_instruction(task);
    ep.source = source;
    ep.seed = seed;
    ep.scene = sample_scene(task, seed, cfg.scene);

    Simulator sim(ep.scene, task, cfg.sim, cfg.rates);
    ExpertController expert(task, cfg.expert, cfg.sim, cfg.rates);
    Rng noise_rng(derive_seed(seed, 0x7e1e0b));

    auto record = [&](const ActionCommand& a) {
        EpisodeStep st;
        st.command = a;
        st.tokens = tokenize(a, cfg.action_space);
        st.pose = sim.state().robot;
        ep.steps.push_back(st);
        ep.frames.push_back(sim.observe());
    };

    while (!sim.done()) {
        ActionCommand a;
        try {
            a = expert.act(sim.state());
        } catch (const NoPathError& e) {
            ep.unplannable = true;
            ep.outcome = sim.outcome();
            ep.outcome.violation = std::string("unplannable: ") + e.what();
            ActionCommand stop = clamp_to_space(ActionCommand{}, cfg.action_space);
            stop.terminate = true;
            record(stop);
            ep.final_pose = sim.state().robot;
            return ep;
        }
        if (noise.omega_std > 0.0) a.omega_z += noise.omega_std * noise_rng.normal();
        if (noise.speed_std > 0.0) a.v_x *= 1.0 + noise.speed_std * noise_rng.normal();
        a = clamp_to_space(a, cfg.action_space);
        // The world executes the bin-center reconstruction, so stored tokens
        // replay the recorded trajectory exactly.
        ActionCommand exec = detokenize(tokenize(a, cfg.action_space), cfg.action_space);
        a.terminate = exec.terminate = sim.predict(exec).status == Status::Success;
        record(a);
        sim.step(exec);
    }
    // The final action always carries the terminate flag.
    auto& last = ep.steps.back();
    last.command.terminate = true;
    last.tokens = tokenize(last.command, cfg.action_space);
    ep.outcome = sim.outcome();
    ep.final_pose = sim.state().robot;
    return ep;
}

} // namespace detail

inline Episode generate_episode(const TaskSpec& task, std::uint64_t seed,
                                const CollectionConfig& cfg = {}) {
    return detail::rollout(task, seed, cfg, Source::Sim, {});
}

// Expert plus operator noise, labeled as real data.
inline Episode generate_teleop_episode(const TaskSpec& task, std::uint64_t seed,
                                       const CollectionConfig& cfg = {},
                                       TeleopNoise noise = {0.15, 0.1}) {
    TaskSpec t = task;
    t.split = Split::SeenReal;
    return detail::rollout(t, seed, cfg, Source::Real, noise);
}

// ---- generation plans --------------------------------------------------------------

struct PlanEntry {
    Skill skill;
    Source source;
    std::size_t count;
};

// Episode counts per task row at full scale.
inline std::vector<PlanEntry> full_scale_plan() {
    return {{Skill::Distinguish, Source::Sim, 10000}, {Skill::GoTo, Source::Sim, 72000},
            {Skill::GoTo, Source::Real, 3000},        {Skill::GoThrough, Source::Sim, 48000},
            {Skill::GoAvoid, Source::Sim, 63000},     {Skill::Crawl, Source::Sim, 1000},
            {Skill::Unload, Source::Sim, 52000}};
}

inline std::vector<PlanEntry> scaled_plan(std::size_t divisor) {
    auto plan = full_scale_plan();
    for (auto& e : plan) e.count /= divisor;
    return plan;
}

inline std::vector<PlanEntry> desk_plan() { return scaled_plan(1000); }

struct PlannedEpisode {
    TaskSpec task;
    std::uint64_t seed;
    Source source;
};

inline Gait sample_gait(Rng& rng, const std::map<Gait, double>& weights) {
    double total = 0.0;
    for (const auto& [g, w] : weights) total += w;
    double u = rng.uniform() * total;
    for (const auto& [g, w] : weights) {
        if (u < w) return g;
        u -= w;
    }
    return weights.rbegin()->first;
}

inline TaskSpec sample_task(Skill skill, SpeedLevel speed, Rng& rng,
                            const std::map<Gait, double>& gait_weights) {
    TaskSpec t;
    t.skill = skill;
    t.speed = speed;
    t.gait = sample_gait(rng, gait_weights);
    const auto seen = catalog_for(skill, CatalogTier::Seen);
    t.object.category = std::string(seen[rng.below(seen.size())].category);
    t.object.color = kSeenColors[rng.below(kSeenColors.size())];
    if (skill == Skill::Distinguish) t.object.letter = kLetters[rng.below(kLetters.size())];
    return t;
}

// Expands a plan into concrete tasks. Speeds are block-randomized per row
// (each block of three holds every level once), so every row's speed shares
// are within 1/count of a third.
inline std::vector<PlannedEpisode> expand_plan(const std::vector<PlanEntry>& plan,
                                               std::uint64_t seed,
                                               const ExpertConfig& cfg = {}) {
    std::vector<PlannedEpisode> out;
    for (std::size_t row = 0; row < plan.size(); ++row) {
        const auto& e = plan[row];
        Rng rng(derive_seed(seed, 0x5eed0000 + row));
        std::array<SpeedLevel, 3> block = kAllSpeeds;
        for (std::size_t i = 0; i < e.count; ++i) {
            if (i % 3 == 0) rng.shuffle(block.begin(), block.end());
            PlannedEpisode p;
            p.task = sample_task(e.skill, block[i % 3], rng, cfg.gait_weights);
            p.source = e.source;
            if (e.source == Source::Real) p.task.split = Split::SeenReal;
            p.seed = derive_seed(seed, (static_cast<std::uint64_t>(row) << 32) | i);
            out.push_back(p);
        }
    }
    return out;
}

inline Episode generate_planned(const PlannedEpisode& p, const CollectionConfig& cfg = {}) {
    return p.source == Source::Real ? generate_teleop_episode(p.task, p.seed, cfg)
                                    : generate_episode(p.task, p.seed, cfg);
}

// ---- config file -------------------------------------------------------------------

inline CollectionConfig collection_config_from_json(const nlohmann::json& j) {
    CollectionConfig c;
    try {
        if (j.contains("action_space")) c.action_space = action_space_from_json(j.at("action_space"));
        if (j.contains("rates")) {
            c.rates.f_high = j["rates"].value("f_high", c.rates.f_high);
            c.rates.f_low = j["rates"].value("f_low", c.rates.f_low);
        }
        if (j.contains("sim")) {
            const auto& s = j.at("sim");
            c.sim.footprint_radius = s.value("footprint_radius", c.sim.footprint_radius);
            c.sim.max_steps = s.value("max_steps", c.sim.max_steps);
            c.sim.success_radius = s.value("success_radius", c.sim.success_radius);
            c.sim.distinguish_bearing_deg = s.value("distinguish_bearing_deg", c.sim.distinguish_bearing_deg);
            c.sim.distinguish_hold_ticks = s.value("distinguish_hold_ticks", c.sim.distinguish_hold_ticks);
            c.sim.go_through_margin = s.value("go_through_margin", c.sim.go_through_margin);
            c.sim.slew.h_z = s.value("slew_h_z", c.sim.slew.h_z);
            c.sim.slew.phi = s.value("slew_phi", c.sim.slew.phi);
        }
        if (j.contains("expert")) {
            const auto& e = j.at("expert");
            auto& g = c.expert.gains;
            g.k_p_lin = e.value("k_p_lin", g.k_p_lin);
            g.k_d_lin = e.value("k_d_lin", g.k_d_lin);
            g.k_p_ang = e.value("k_p_ang", g.k_p_ang);
            g.k_d_ang = e.value("k_d_ang", g.k_d_ang);
            c.expert.lookahead = e.value("lookahead", c.expert.lookahead);
            c.expert.grid.resolution = e.value("grid_resolution", c.expert.grid.resolution);
            c.expert.grid.inflation = e.value("inflation", c.expert.grid.inflation);
            if (e.contains("planner")) {
                const auto planner = e["planner"].get<std::string>();
                if (planner != "astar" && planner != "dstar_lite") throw ConfigError("unknown planner: " + planner);
                c.expert.planner = planner == "dstar_lite" ? PlannerKind::DStarLite : PlannerKind::AStar;
            }
            if (e.contains("bands")) {
                for (const auto& [k, v] : e["bands"].items()) {
                    c.expert.bands[speed_from_name(k)] = {v.at(0).get<double>(), v.at(1).get<double>()};
                }
            }
            if (e.contains("gaits")) {
                for (const auto& [k, v] : e["gaits"].items()) {
                    auto& gp = c.expert.gaits[gait_from_name(k)];
                    const auto& th = v.at("theta");
                    gp.theta = {th.at(0).get<double>(), th.at(1).get<double>(), th.at(2).get<double>()};
                    gp.frequency = v.value("f", gp.frequency);
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.rates.validate();
    c.expert.validate();
    return c;
}

inline nlohmann::json to_json(const CollectionConfig& c) {
    nlohmann::json bands, gaits;
    for (const auto& [k, v] : c.expert.bands) bands[std::string(name(k))] = {v.lo, v.hi};
    for (const auto& [k, v] : c.expert.gaits) {
        gaits[std::string(name(k))] = {{"theta", v.theta}, {"f", v.frequency}};
    }
    return {
        {"action_space", to_json(c.action_space)},
        {"rates", {{"f_high", c.rates.f_high}, {"f_low", c.rates.f_low}}},
        {"sim",
         {{"footprint_radius", c.sim.footprint_radius},
          {"max_steps", c.sim.max_steps},
          {"success_radius", c.sim.success_radius},
          {"distinguish_bearing_deg", c.sim.distinguish_bearing_deg},
          {"distinguish_hold_ticks", c.sim.distinguish_hold_ticks},
          {"go_through_margin", c.sim.go_through_margin},
          {"slew_h_z", c.sim.slew.h_z},
          {"slew_phi", c.sim.slew.phi}}},
        {"expert",
         {{"k_p_lin", c.expert.gains.k_p_lin},
          {"k_d_lin", c.expert.gains.k_d_lin},
          {"k_p_ang", c.expert.gains.k_p_ang},
          {"k_d_ang", c.expert.gains.k_d_ang},
          {"lookahead", c.expert.lookahead},
          {"grid_resolution", c.expert.grid.resolution},
          {"inflation", c.expert.grid.inflation},
          {"planner", c.expert.planner == PlannerKind::DStarLite ? "dstar_lite" : "astar"},
          {"bands", bands},
          {"gaits", gaits}}},
    };
}

} // namespace quard
