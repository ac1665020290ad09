/*
 * Copyright (c) 2026 The quard authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

// Grid planners over an inflated occupancy grid: A* (default expert planner)
// and D*-Lite for incremental replanning when cells change.
//
// Moves are 8-connected. A diagonal move is allowed only when both cells it
// cuts past are free, so paths never squeeze between two blocked corners.
// Path costs are reported as (straight, diagonal) step counts; the metric
// cost is derived from the counts so equal-cost paths compare bit-exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>
#include <vector>

#include "quard/error.hpp"
#include "quard/geometry.hpp"
#include "quard/world_sim.hpp"

namespace quard {

struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

inline constexpr double kSqrt2 = 1.41421356237309504880;

class OccupancyGrid {
public:
    OccupancyGrid() = default;

    OccupancyGrid(int width, int height, double resolution, Vec2 origin = {})
        : width_(width), height_(height), resolution_(resolution), origin_(origin),
          cells_(static_cast<std::size_t>(width) * height, 0) {
        if (width <= 0 || height <= 0 || !(resolution > 0.0)) {
            throw ConfigError("grid needs positive size and resolution");
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    double resolution() const { return resolution_; }
    Vec2 origin() const { return origin_; }

    bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }

    bool occupied(Cell c) const { return !in_bounds(c) || cells_[index(c)] != 0; }
    bool free(Cell c) const { return !occupied(c); }

    void set(Cell c, bool occ) {
        if (!in_bounds(c)) throw ConfigError("cell outside grid");
        cells_[index(c)] = occ ? 1 : 0;
    }

    Cell cell_of(Vec2 p) const {
        return {static_cast<int>(std::floor((p.x - origin_.x) / resolution_)),
                static_cast<int>(std::floor((p.y - origin_.y) / resolution_))};
    }

    Vec2 center_of(Cell c) const {
        return {origin_.x + (c.x + 0.5) * resolution_, origin_.y + (c.y + 0.5) * resolution_};
    }

    std::size_t index(Cell c) const {
        return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(c.x);
    }

    Cell cell_at(std::size_t i) const {
        return {static_cast<int>(i % static_cast<std::size_t>(width_)),
                static_cast<int>(i / static_cast<std::size_t>(width_))};
    }

    std::size_t size() const { return cells_.size(); }

    // Cost of a single move between neighbors, infinity when blocked.
    double move_cost(Cell a, Cell b) const {
        if (occupied(a) || occupied(b)) return std::numeric_limits<double>::infinity();
        const int dx = b.x - a.x, dy = b.y - a.y;
        if (dx != 0 && dy != 0) {
            if (occupied({a.x + dx, a.y}) || occupied({a.x, a.y + dy})) {
                return std::numeric_limits<double>::infinity();
            }
            return kSqrt2 * resolution_;
        }
        return resolution_;
    }

    template <typename F>
    void for_each_neighbor(Cell c, F&& fn) const {
        static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
        static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
        for (int k = 0; k < 8; ++k) {
            const Cell n{c.x + kDx[k], c.y + kDy[k]};
            if (in_bounds(n)) fn(n);
        }
    }

    // Octile distance; admissible for the 8-connected move set.
    double heuristic(Cell a, Cell b) const {
        const int dx = std::abs(a.x - b.x), dy = std::abs(a.y - b.y);
        return resolution_ * (std::max(dx, dy) + (kSqrt2 - 1.0) * std::min(dx, dy));
    }

private:
    int width_ = 0;
    int height_ = 0;
    double resolution_ = 0.05;
    Vec2 origin_;
    std::vector<std::uint8_t> cells_;
};

struct GridSpec {
    double resolution = 0.05;
    double inflation = 0.35; // footprint radius + 0.15
    double min_x = -2.5, max_x = 6.5, min_y = -3.5, max_y = 4.5;
};

// Rasterizes the solid parts of the entities, grown by the inflation radius.
inline OccupancyGrid build_grid(const std::vector<Entity>& entities, const GridSpec& spec) {
    const int w = static_cast<int>(std::ceil((spec.max_x - spec.min_x) / spec.resolution));
    const int h = static_cast<int>(std::ceil((spec.max_y - spec.min_y) / spec.resolution));
    OccupancyGrid grid(w, h, spec.resolution, {spec.min_x, spec.min_y});
    std::vector<Footprint> parts;
    for (const auto& e : entities) {
        auto p = solid_parts(e);
        parts.insert(parts.end(), p.begin(), p.end());
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Cell c = grid.cell_at(i);
        const Vec2 p = grid.center_of(c);
        for (const auto& part : parts) {
            if (distance_to(part, p) <= spec.inflation) {
                grid.set(c, true);
                break;
            }
        }
    }
    return grid;
}

struct PlannedPath {
    std::vector<Cell> cells;
    std::vector<Vec2> waypoints;
    int straight_steps = 0;
    int diagonal_steps = 0;
    double cost = 0.0;

    bool empty() const { return waypoints.empty(); }
};

inline PlannedPath make_path(const OccupancyGrid& grid, std::vector<Cell> cells) {
    PlannedPath p;
    for (std::size_t i = 1; i < cells.size(); ++i) {
        const bool diag = cells[i].x != cells[i - 1].x && cells[i].y != cells[i - 1].y;
        (diag ? p.diagonal_steps : p.straight_steps) += 1;
    }
    p.cost = grid.resolution() * (p.straight_steps + kSqrt2 * p.diagonal_steps);
    for (const auto& c : cells) p.waypoints.push_back(grid.center_of(c));
    p.cells = std::move(cells);
    return p;
}

namespace detail {

inline void require_free_endpoints(const OccupancyGrid& grid, Cell start, Cell goal) {
    if (!grid.in_bounds(start) || grid.occupied(start)) throw NoPathError("start cell is blocked");
    if (!grid.in_bounds(goal) || grid.occupied(goal)) throw NoPathError("goal cell is blocked");
}

} // namespace detail

inline PlannedPath plan_astar(const OccupancyGrid& grid, Cell start, Cell goal) {
    detail::require_free_endpoints(grid, start, goal);
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> g(grid.size(), kInf);
    std::vector<std::int64_t> parent(grid.size(), -1);
    std::vector<std::uint8_t> closed(grid.size(), 0);

    struct Node {
        double f;
        double h;
        std::uint64_t order;
        std::size_t idx;
        bool operator>(const Node& o) const {
            if (f != o.f) return f > o.f;
            if (h != o.h) return h > o.h;
            return order > o.order;
        }
    };
    std::priority_queue<Node, std::vector<Node>, std::greater<>> open;
    std::uint64_t counter = 0;

    const auto s = grid.index(start);
    g[s] = 0.0;
    open.push({grid.heuristic(start, goal), grid.heuristic(start, goal), counter++, s});
    const auto gi = grid.index(goal);
    while (!open.empty()) {
        const Node n = open.top();
        open.pop();
        if (closed[n.idx]) continue;
        closed[n.idx] = 1;
        if (n.idx == gi) break;
        const Cell c = grid.cell_at(n.idx);
        grid.for_each_neighbor(c, [&](Cell nb) {
            const auto ni = grid.index(nb);
            if (closed[ni]) return;
            const double step = grid.move_cost(c, nb);
            if (!std::isfinite(step)) return;
            const double cand = g[n.idx] + step;
            if (cand < g[ni]) {
                g[ni] = cand;
                parent[ni] = static_cast<std::int64_t>(n.idx);
                const double h = grid.heuristic(nb, goal);
                open.push({cand + h, h, counter++, ni});
            }
        });
    }
    if (!closed[gi]) throw NoPathError("goal unreachable");

    std::vector<Cell> cells;
    for (std::int64_t i = static_cast<std::int64_t>(gi); i >= 0; i = parent[static_cast<std::size_t>(i)]) {
        cells.push_back(grid.cell_at(static_cast<std::size_t>(i)));
    }
    std::reverse(cells.begin(), cells.end());
    return make_path(grid, std::move(cells));
}

inline PlannedPath plan_astar(const OccupancyGrid& grid, Vec2 start, Vec2 goal) {
    return plan_astar(grid, grid.cell_of(start), grid.cell_of(goal));
}

// Incremental planner (D*-Lite, optimized variant). Searches backwards from
// the goal so that cell updates and start moves reuse previous work.
class DStarLite {
public:
    DStarLite(OccupancyGrid grid, Cell start, Cell goal)
        : grid_(std::move(grid)), start_(start), goal_(goal), last_start_(start),
          g_(grid_.size(), kInf), rhs_(grid_.size(), kInf), key_(grid_.size()),
          in_open_(grid_.size(), 0) {
        detail::require_free_endpoints(grid_, start, goal);
        rhs_[grid_.index(goal_)] = 0.0;
        push(goal_);
        compute();
    }

    const OccupancyGrid& grid() const { return grid_; }
    Cell start() const { return start_; }
    Cell goal() const { return goal_; }

    bool reachable() const { return std::isfinite(g_[grid_.index(start_)]); }

    // Current shortest path; throws NoPathError when the goal is cut off.
    PlannedPath path() const {
        if (!reachable()) throw NoPathError("goal unreachable");
        std::vector<Cell> cells{start_};
        Cell cur = start_;
        const std::size_t limit = grid_.size();
        while (!(cur == goal_)) {
            Cell best = cur;
            double best_v = kInf;
            grid_.for_each_neighbor(cur, [&](Cell nb) {
                const double v = grid_.move_cost(cur, nb) + g_[grid_.index(nb)];
                if (v < best_v) {
                    best_v = v;
                    best = nb;
                }
            });
            if (!std::isfinite(best_v) || cells.size() > limit) {
                throw NoPathError("path extraction failed");
            }
            cells.push_back(best);
            cur = best;
        }
        return make_path(grid_, std::move(cells));
    }

    // Changes one cell and repairs the search.
    void update_cell(Cell c, bool occupied) {
        if (grid_.occupied(c) == occupied) return;
        grid_.set(c, occupied);
        update_vertex(c);
        grid_.for_each_neighbor(c, [&](Cell nb) { update_vertex(nb); });
        compute();
    }

    // Moves the search start (e.g. after the robot advanced along the path).
    void move_start(Cell s) {
        if (!grid_.in_bounds(s)) throw ConfigError("start outside grid");
        km_ += grid_.heuristic(last_start_, s);
        last_start_ = s;
        start_ = s;
        compute();
    }

private:
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    struct Key {
        double k1 = kInf, k2 = kInf;
        bool operator<(const Key& o) const { return k1 < o.k1 || (k1 == o.k1 && k2 < o.k2); }
        bool operator==(const Key& o) const { return k1 == o.k1 && k2 == o.k2; }
    };

    struct Entry {
        Key key;
        std::uint64_t order;
        std::size_t idx;
        bool operator>(const Entry& o) const {
            if (o.key < key) return true;
            if (key < o.key) return false;
            return order > o.order;
        }
    };

    OccupancyGrid grid_;
    Cell start_, goal_, last_start_;
    double km_ = 0.0;
    std::vector<double> g_, rhs_;
    std::vector<Key> key_;
    std::vector<std::uint8_t> in_open_;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open_;
    std::uint64_t counter_ = 0;

    Key calculate_key(Cell c) const {
        const auto i = grid_.index(c);
        const double m = std::min(g_[i], rhs_[i]);
        return {m + grid_.heuristic(start_, c) + km_, m};
    }

    void push(Cell c) {
        const auto i = grid_.index(c);
        key_[i] = calculate_key(c);
        in_open_[i] = 1;
        open_.push({key_[i], counter_++, i});
    }

    // Drops stale heap entries so top() reflects the live open set.
    void prune() {
        while (!open_.empty()) {
            const auto& e = open_.top();
            if (in_open_[e.idx] && e.key == key_[e.idx]) return;
            open_.pop();
        }
    }

    Key top_key() {
        prune();
        return open_.empty() ? Key{} : open_.top().key;
    }

    void update_vertex(Cell u) {
        const auto i = grid_.index(u);
        if (!(u == goal_)) {
            double best = kInf;
            grid_.for_each_neighbor(u, [&](Cell nb) {
                best = std::min(best, grid_.move_cost(u, nb) + g_[grid_.index(nb)]);
            });
            rhs_[i] = best;
        }
        in_open_[i] = 0;
        if (g_[i] != rhs_[i]) push(u);
    }

    void compute() {
        const auto si = grid_.index(start_);
        // Keys tied with the start up to rounding are expanded too, so no
        // stale vertex can tie with the true path during extraction.
        const double eps = 1e-9 * grid_.resolution();
        auto pending = [&] {
            const Key top = top_key(), ks = calculate_key(start_);
            return top.k1 < ks.k1 + eps || rhs_[si] != g_[si];
        };
        while (pending()) {
            prune();
            if (open_.empty()) break;
            const Entry top = open_.top();
            const Cell u = grid_.cell_at(top.idx);
            const Key k_new = calculate_key(u);
            if (top.key < k_new) {
                open_.pop();
                push(u);
            } else if (g_[top.idx] > rhs_[top.idx]) {
                g_[top.idx] = rhs_[top.idx];
                in_open_[top.idx] = 0;
                open_.pop();
                grid_.for_each_neighbor(u, [&](Cell nb) { update_vertex(nb); });
            } else {
                g_[top.idx] = kInf;
                in_open_[top.idx] = 0;
                open_.pop();
                update_vertex(u);
                grid_.for_each_neighbor(u, [&](Cell nb) { update_vertex(nb); });
            }
        }
    }
};

// Waypoints as CSV (index,x,y) for debugging.
inline void write_path_csv(std::ostream& out, const PlannedPath& path) {
    out << "index,x,y\n";
    out << std::fixed << std::setprecision(4);
    for (std::size_t i = 0; i < path.waypoints.size(); ++i) {
        out << i << ',' << path.waypoints[i].x << ',' << path.waypoints[i].y << '\n';
    }
}

} // namespace quard
