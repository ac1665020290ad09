/*
 * Copyright (c) 2026 The quard authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

// Task vocabulary shared by the simulator, the expert and the instruction
// templates: skills, colors, speed levels, gaits and the object catalog.

#include <algorithm>
#include <array>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quard/error.hpp"

namespace quard {

enum class Skill { Distinguish, GoTo, GoAvoid, GoThrough, Crawl, Unload };

inline constexpr std::array<Skill, 6> kAllSkills = {Skill::Distinguish, Skill::GoTo,
                                                    Skill::GoAvoid,     Skill::GoThrough,
                                                    Skill::Crawl,       Skill::Unload};

// Gray is reserved for scene clutter (obstacles, bars); it never names a target.
enum class Color { Green, Red, Blue, Yellow, Gold, Pink, Orange, Purple, Gray };

inline constexpr std::array<Color, 4> kSeenColors = {Color::Green, Color::Red, Color::Blue,
                                                     Color::Yellow};
inline constexpr std::array<Color, 4> kUnseenColors = {Color::Gold, Color::Pink, Color::Orange,
                                                       Color::Purple};

enum class SpeedLevel { Slow, Normal, Fast };
inline constexpr std::array<SpeedLevel, 3> kAllSpeeds = {SpeedLevel::Slow, SpeedLevel::Normal,
                                                         SpeedLevel::Fast};

enum class Gait { Trot, Bound, Pace, Pronk };
inline constexpr std::array<Gait, 4> kAllGaits = {Gait::Trot, Gait::Bound, Gait::Pace,
                                                  Gait::Pronk};

enum class Split { SeenSim, SeenReal, UnseenObject, UnseenVerbal };

enum class Source { Sim, Real };

// ---- names -------------------------------------------------------------------

inline constexpr std::array<std::string_view, 6> kSkillNames = {
    "distinguish", "go_to", "go_avoid", "go_through", "crawl", "unload"};
inline constexpr std::array<std::string_view, 9> kColorNames = {
    "green", "red", "blue", "yellow", "gold", "pink", "orange", "purple", "gray"};
inline constexpr std::array<std::string_view, 3> kSpeedNames = {"slow", "normal", "fast"};
inline constexpr std::array<std::string_view, 4> kGaitNames = {"trot", "bound", "pace", "pronk"};
inline constexpr std::array<std::string_view, 4> kSplitNames = {"seen_sim", "seen_real",
                                                                "unseen_object", "unseen_verbal"};
inline constexpr std::array<std::string_view, 2> kSourceNames = {"sim", "real"};

template <typename E, std::size_t N>
constexpr std::string_view enum_name(E e, const std::array<std::string_view, N>& names) {
    return names[static_cast<std::size_t>(e)];
}

inline std::string_view name(Skill s) { return enum_name(s, kSkillNames); }
inline std::string_view name(Color c) { return enum_name(c, kColorNames); }
inline std::string_view name(SpeedLevel s) { return enum_name(s, kSpeedNames); }
inline std::string_view name(Gait g) { return enum_name(g, kGaitNames); }
inline std::string_view name(Split s) { return enum_name(s, kSplitNames); }
inline std::string_view name(Source s) { return enum_name(s, kSourceNames); }

template <typename E, std::size_t N>
std::optional<E> enum_from_name(std::string_view text, const std::array<std::string_view, N>& names) {
    for (std::size_t i = 0; i < N; ++i) {
        if (names[i] == text) return static_cast<E>(i);
    }
    return std::nullopt;
}

template <typename E, std::size_t N>
E require_enum(std::string_view text, const std::array<std::string_view, N>& names,
               std::string_view what) {
    if (auto v = enum_from_name<E>(text, names)) return *v;
    throw ConfigError("unknown " + std::string(what) + ": " + std::string(text));
}

inline Skill skill_from_name(std::string_view s) { return require_enum<Skill>(s, kSkillNames, "skill"); }
inline Color color_from_name(std::string_view s) { return require_enum<Color>(s, kColorNames, "color"); }
inline SpeedLevel speed_from_name(std::string_view s) { return require_enum<SpeedLevel>(s, kSpeedNames, "speed"); }
inline Gait gait_from_name(std::string_view s) { return require_enum<Gait>(s, kGaitNames, "gait"); }
inline Split split_from_name(std::string_view s) { return require_enum<Split>(s, kSplitNames, "split"); }
inline Source source_from_name(std::string_view s) { return require_enum<Source>(s, kSourceNames, "source"); }

inline bool is_seen_color(Color c) {
    return std::find(kSeenColors.begin(), kSeenColors.end(), c) != kSeenColors.end();
}

// ---- task spec -----------------------------------------------------------------

struct ObjectRef {
    std::string category; // catalog name, e.g. "cube", "triangle", "traybox", "letterbox"
    Color color = Color::Red;
    char letter = 0;       // only for letter boxes

    friend bool operator==(const ObjectRef&, const ObjectRef&) = default;
};

struct TaskSpec {
    Skill skill = Skill::GoTo;
    ObjectRef object;
    SpeedLevel speed = SpeedLevel::Normal;
    Gait gait = Gait::Trot;
    Split split = Split::SeenSim;

    friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

// ---- object catalog ----------------------------------------------------------------

enum class Shape { Cube, Ball, Cylinder, Furniture, TunnelFrame, Bar, Tray, Box };

enum class CatalogTier { Seen, Variant, Novel };

struct CatalogEntry {
    std::string_view category;
    Shape shape;
    double length, width, height; // local x, local y, z extents (m)
    CatalogTier tier;
    std::string_view seen_counterpart; // for variants: the seen category they stand in for
};

// Generic targets for GoTo / GoAvoid / Crawl.
inline constexpr std::array<CatalogEntry, 27> kObjectCatalog = {{
    {"cube", Shape::Cube, 0.30, 0.30, 0.30, CatalogTier::Seen, ""},
    {"ball", Shape::Ball, 0.30, 0.30, 0.30, CatalogTier::Seen, ""},
    {"cylinder", Shape::Cylinder, 0.30, 0.30, 0.40, CatalogTier::Seen, ""},
    {"bookshelf", Shape::Furniture, 0.35, 0.80, 1.20, CatalogTier::Seen, ""},
    {"oven", Shape::Furniture, 0.50, 0.60, 0.50, CatalogTier::Seen, ""},
    {"vase", Shape::Cylinder, 0.25, 0.25, 0.45, CatalogTier::Seen, ""},
    {"cooker", Shape::Furniture, 0.50, 0.60, 0.85, CatalogTier::Seen, ""},
    {"drawers", Shape::Furniture, 0.45, 0.70, 0.80, CatalogTier::Seen, ""},
    {"fan", Shape::Cylinder, 0.35, 0.35, 1.00, CatalogTier::Seen, ""},
    {"sofa", Shape::Furniture, 0.80, 1.60, 0.80, CatalogTier::Seen, ""},
    {"trashcan", Shape::Cylinder, 0.40, 0.40, 0.70, CatalogTier::Seen, ""},
    {"bench", Shape::Furniture, 0.50, 1.40, 0.45, CatalogTier::Seen, ""},
    {"cuboid", Shape::Cube, 0.30, 0.45, 0.25, CatalogTier::Variant, "cube"},
    {"ovoid", Shape::Ball, 0.30, 0.30, 0.40, CatalogTier::Variant, "ball"},
    {"prism", Shape::Furniture, 0.30, 0.30, 0.50, CatalogTier::Variant, "cylinder"},
    {"wardrobe", Shape::Furniture, 0.50, 1.00, 1.60, CatalogTier::Variant, "bookshelf"},
    {"microwave", Shape::Furniture, 0.40, 0.50, 0.30, CatalogTier::Variant, "oven"},
    {"jar", Shape::Cylinder, 0.20, 0.20, 0.30, CatalogTier::Variant, "vase"},
    {"stove", Shape::Furniture, 0.55, 0.70, 0.90, CatalogTier::Variant, "cooker"},
    {"dresser", Shape::Furniture, 0.45, 1.00, 0.75, CatalogTier::Variant, "drawers"},
    {"heater", Shape::Furniture, 0.30, 0.50, 0.60, CatalogTier::Variant, "fan"},
    {"armchair", Shape::Furniture, 0.80, 0.80, 0.80, CatalogTier::Variant, "sofa"},
    {"bin", Shape::Cylinder, 0.35, 0.35, 0.50, CatalogTier::Variant, "trashcan"},
    {"stool", Shape::Cylinder, 0.35, 0.35, 0.45, CatalogTier::Variant, "bench"},
    {"pillow", Shape::Furniture, 0.40, 0.60, 0.15, CatalogTier::Novel, ""},
    {"computer", Shape::Furniture, 0.40, 0.50, 0.40, CatalogTier::Novel, ""},
    {"window", Shape::Furniture, 0.10, 1.00, 1.00, CatalogTier::Novel, ""},
}};

// Tunnel cross-sections for GoThrough; "arch" is the unseen variant.
inline constexpr std::array<CatalogEntry, 3> kTunnelCatalog = {{
    {"rectangle", Shape::TunnelFrame, 1.00, 1.20, 0.60, CatalogTier::Seen, ""},
    {"triangle", Shape::TunnelFrame, 1.00, 1.20, 0.70, CatalogTier::Seen, ""},
    {"arch", Shape::TunnelFrame, 1.00, 1.20, 0.65, CatalogTier::Variant, "rectangle"},
}};

// Receptacles for Unload.
inline constexpr std::array<CatalogEntry, 2> kReceptacleCatalog = {{
    {"traybox", Shape::Tray, 0.50, 0.50, 0.20, CatalogTier::Seen, ""},
    {"crate", Shape::Tray, 0.50, 0.50, 0.30, CatalogTier::Variant, "traybox"},
}};

inline constexpr std::string_view kLetterBoxCategory = "letterbox";
inline constexpr std::array<char, 6> kLetters = {'A', 'B', 'C', 'D', 'E', 'F'};

// Catalog consulted for the target object of a skill.
inline std::vector<CatalogEntry> catalog_for(Skill skill) {
    switch (skill) {
    case Skill::GoThrough:
        return {kTunnelCatalog.begin(), kTunnelCatalog.end()};
    case Skill::Unload:
        return {kReceptacleCatalog.begin(), kReceptacleCatalog.end()};
    case Skill::Distinguish:
        return {{kLetterBoxCategory, Shape::Box, 0.40, 0.40, 0.40, CatalogTier::Seen, ""}};
    default:
        return {kObjectCatalog.begin(), kObjectCatalog.end()};
    }
}

inline std::vector<CatalogEntry> catalog_for(Skill skill, CatalogTier tier) {
    auto all = catalog_for(skill);
    std::vector<CatalogEntry> out;
    std::copy_if(all.begin(), all.end(), std::back_inserter(out),
                 [tier](const CatalogEntry& e) { return e.tier == tier; });
    return out;
}

inline std::optional<CatalogEntry> find_catalog(Skill skill, std::string_view category) {
    for (const auto& e : catalog_for(skill)) {
        if (e.category == category) return e;
    }
    return std::nullopt;
}

inline CatalogEntry require_catalog(Skill skill, std::string_view category) {
    if (auto e = find_catalog(skill, category)) return *e;
    throw ConfigError("object '" + std::string(category) + "' is not valid for skill " +
                      std::string(name(skill)));
}

} // namespace quard
