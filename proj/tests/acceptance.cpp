// Copyright (c) 2026 The quard authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>

#include "quard/quard.hpp"

using namespace quard;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Result {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

// 1. Codec round trip.
Result codec() {
    Result r;
    const auto t0 = Clock::now();
    const auto spec = ActionSpaceSpec::defaults();
    std::size_t exact_fail = 0;
    for (std::size_t d = 0; d < kContinuousDims; ++d) {
        for (int b = 0; b < spec.bin_count; ++b) {
            std::array<double, kContinuousDims> v{};
            for (std::size_t o = 0; o < kContinuousDims; ++o) v[o] = bin_center(spec, o, 0);
            v[d] = bin_center(spec, d, b);
            const auto cmd = ActionCommand::from_continuous(v, false);
            const auto tok = tokenize(cmd, spec);
            if (tok.tokens[d] != spec.token_offset + b || detokenize(tok, spec).continuous()[d] != v[d]) ++exact_fail;
        }
    }
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) {
        std::array<double, kContinuousDims> v{};
        for (std::size_t d = 0; d < kContinuousDims; ++d) {
            std::uniform_real_distribution<double> u(spec.dims[d].min, spec.dims[d].max);
            v[d] = u(rng);
        }
        const auto back = detokenize(tokenize(ActionCommand::from_continuous(v, false), spec), spec).continuous();
        for (std::size_t d = 0; d < kContinuousDims; ++d) {
            double err = std::abs(back[d] - v[d]);
            if (is_cyclic(d)) err = std::min(err, (spec.dims[d].max - spec.dims[d].min) - err);
            worst = std::max(worst, err / (spec.bin_width(d) / 2));
        }
    }
    const double secs = seconds_since(t0);
    r.require(exact_fail == 0, std::to_string(exact_fail) + " bin centers not exact");
    r.require(worst <= 1.0 + 1e-9, "error exceeds half a bin");
    r.require(secs < 1.0, "runtime over 1 s");
    char buf[160];
    std::snprintf(buf, sizeof buf, "2816 centers exact, worst random error %.4f half-bins, %.3f s", worst, secs);
    r.detail = r.pass ? buf : r.detail + " (" + buf + ")";
    return r;
}

// Reference single-source shortest path on the raw occupancy; no corner cutting.
std::pair<int, int> dijkstra(const std::vector<std::vector<bool>>& blocked, Cell s, Cell g) {
    const int n = static_cast<int>(blocked.size());
    auto open = [&](int x, int y) { return x >= 0 && y >= 0 && x < n && y < n && !blocked[x][y]; };
    std::vector<std::vector<std::pair<int, int>>> best(n, std::vector<std::pair<int, int>>(n, {-1, -1}));
    std::vector<std::vector<bool>> done(n, std::vector<bool>(n, false));
    auto metric = [](std::pair<int, int> c) { return c.first + std::sqrt(2.0) * c.second; };
    best[s.x][s.y] = {0, 0};
    for (;;) {
        int bx = -1, by = -1;
        for (int x = 0; x < n; ++x) {
            for (int y = 0; y < n; ++y) {
                if (done[x][y] || best[x][y].first < 0) continue;
                if (bx < 0 || metric(best[x][y]) < metric(best[bx][by])) bx = x, by = y;
            }
        }
        if (bx < 0) break;
        done[bx][by] = true;
        for (int dx = -1; dx <= 1; ++dx) {
            for (int dy = -1; dy <= 1; ++dy) {
                const int nx = bx + dx, ny = by + dy;
                if ((!dx && !dy) || !open(nx, ny)) continue;
                if (dx && dy && (!open(bx + dx, by) || !open(bx, by + dy))) continue;
                auto c = best[bx][by];
                (dx && dy ? c.second : c.first) += 1;
                if (best[nx][ny].first < 0 || metric(c) < metric(best[nx][ny]) - 1e-12) best[nx][ny] = c;
            }
        }
    }
    return best[g.x][g.y];
}

// 2. Planner optimality and incremental repair.
Result planner() {
    Result r;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> cell(0, 15);
    auto make = [&](double density, std::vector<std::vector<bool>>& blocked, Cell& s, Cell& g) {
        OccupancyGrid grid(16, 16, 1.0);
        std::bernoulli_distribution occ(density);
        blocked.assign(16, std::vector<bool>(16));
        for (int x = 0; x < 16; ++x) {
            for (int y = 0; y < 16; ++y) grid.set({x, y}, blocked[x][y] = occ(rng));
        }
        s = {cell(rng), cell(rng)};
        do g = {cell(rng), cell(rng)};
        while (g == s);
        for (Cell c : {s, g}) grid.set(c, blocked[c.x][c.y] = false);
        return grid;
    };
    int astar_mismatch = 0, dstar_mismatch = 0, checks = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<bool>> blocked;
        Cell s, g;
        const auto grid = make(0.3, blocked, s, g);
        const auto ref = dijkstra(blocked, s, g);
        try {
            const auto p = plan_astar(grid, s, g);
            astar_mismatch += std::make_pair(p.straight_steps, p.diagonal_steps) != ref;
        } catch (const NoPathError&) {
            astar_mismatch += ref.first >= 0;
        }
    }
    for (int seq = 0; seq < 50; ++seq) {
        std::vector<std::vector<bool>> blocked;
        Cell s, g;
        auto grid = make(0.2, blocked, s, g);
        DStarLite d(grid, s, g);
        for (int u = 0; u < 20; ++u) {
            const Cell c{cell(rng), cell(rng)};
            if (c == s || c == g) continue;
            const bool occ = !blocked[c.x][c.y];
            grid.set(c, blocked[c.x][c.y] = occ);
            d.update_cell(c, occ);
        }
        ++checks;
        bool fresh_ok = true;
        PlannedPath fresh;
        try {
            fresh = plan_astar(grid, s, g);
        } catch (const NoPathError&) {
            fresh_ok = false;
        }
        if (d.reachable() != fresh_ok) {
            ++dstar_mismatch;
        } else if (fresh_ok) {
            const auto p = d.path();
            dstar_mismatch += p.straight_steps != fresh.straight_steps || p.diagonal_steps != fresh.diagonal_steps;
        }
    }
    const double secs = seconds_since(t0);
    r.require(astar_mismatch == 0, std::to_string(astar_mismatch) + "/200 A* costs differ from Dijkstra");
    r.require(dstar_mismatch == 0, std::to_string(dstar_mismatch) + "/50 D*-Lite repairs differ from A*");
    r.require(secs < 10.0, "runtime over 10 s");
    char buf[120];
    std::snprintf(buf, sizeof buf, "200 grids, %d update sequences, %.2f s", checks, secs);
    r.detail = r.pass ? buf : r.detail + " (" + buf + ")";
    return r;
}

// 3. GoAvoid scene layout.
Result scenes() {
    Result r;
    std::size_t violations = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        Rng rng(seed);
        const auto task = sample_task(Skill::GoAvoid, kAllSpeeds[seed % 3], rng, ExpertConfig{}.gait_weights);
        const auto scene = sample_scene(task, seed);
        const Entity* target = nullptr;
        std::vector<const Entity*> obstacles;
        for (const auto& e : scene.entities) {
            if (e.target) target = &e;
            if (e.kind == EntityKind::Obstacle) obstacles.push_back(&e);
        }
        if (!target || obstacles.size() != 1) {
            ++violations;
            continue;
        }
        const double tx = target->pose.x, ty = target->pose.y;
        const bool ok = tx >= 2.7 && tx <= 3.3 && ty >= 0.9 && ty <= 1.1 &&
                        std::abs(obstacles[0]->pose.x - (tx - 1.5)) <= 1e-12 &&
                        std::abs(obstacles[0]->pose.y - ty) <= 1e-12;
        violations += !ok;
    }
    r.require(violations == 0, std::to_string(violations) + " violating scenes");
    r.detail = r.pass ? "10000 scenes, 0 violations" : r.detail;
    return r;
}

// 4. Oracle success and terminate placement.
Result oracle() {
    Result r;
    const auto t0 = Clock::now();
    const auto plan = expand_plan({{Skill::GoTo, Source::Sim, 100}}, 4242);
    std::size_t ok = 0, bad_terminate = 0;
    for (const auto& p : plan) {
        const auto e = generate_planned(p);
        if (!e.succeeded()) continue;
        ++ok;
        std::size_t count = 0;
        for (const auto& st : e.steps) count += st.command.terminate;
        bad_terminate += count != 1 || !e.steps.back().command.terminate;
    }
    const double secs = seconds_since(t0);
    const double sr = static_cast<double>(ok) / plan.size();
    r.require(sr >= 0.95, "success rate below 0.95");
    r.require(bad_terminate == 0, std::to_string(bad_terminate) + " episodes with misplaced terminate");
    r.require(secs < 60.0, "runtime over 60 s");
    char buf[120];
    std::snprintf(buf, sizeof buf, "SR %.2f over 100 GoTo episodes, terminate once and last, %.1f s", sr, secs);
    r.detail = r.pass ? buf : r.detail + " (" + buf + ")";
    return r;
}

// 5. Per-task length ordering and speed balance.
Result statistics() {
    Result r;
    std::vector<PlanEntry> entries;
    for (Skill s : kAllSkills) entries.push_back({s, Source::Sim, 200});
    std::vector<Episode> eps;
    for (const auto& p : expand_plan(entries, 99)) {
        auto e = generate_planned(p);
        e.frames.clear();
        eps.push_back(std::move(e));
    }
    const auto rep = compute_stats(eps);
    for (Skill s : kAllSkills) {
        r.require(rep.per_task.count(s) && rep.per_task.at(s).episodes >= 200,
                  std::string(name(s)) + " has fewer than 200 episodes");
    }
    const double dist = rep.per_task.at(Skill::Distinguish).mean, go = rep.per_task.at(Skill::GoTo).mean,
                 unload = rep.per_task.at(Skill::Unload).mean;
    r.require(dist < go && go < unload, "mean length ordering violated");
    double worst = 0.0;
    for (SpeedLevel s : kAllSpeeds) worst = std::max(worst, std::abs(rep.speed_share.at(s) - 1.0 / 3));
    r.require(worst <= 0.02, "speed share off by more than 2%");
    char buf[200];
    std::snprintf(buf, sizeof buf, "mean length distinguish %.1f < go_to %.1f < unload %.1f, speed share error %.4f",
                  dist, go, unload, worst);
    r.detail = r.pass ? buf : r.detail + " (" + buf + ")";
    return r;
}

// 6. Sim:real mixing regimes.
Result mixing() {
    Result r;
    std::string parts;
    for (const auto& policy : desk_regimes()) {
        const auto items = MixStream(policy, 3000, 30, 6).collect();
        std::size_t sim = 0;
        for (const auto& it : items) sim += it.source == Source::Sim;
        const double want = static_cast<double>(policy.sim_count) / policy.total();
        const double got = items.empty() ? 0.0 : static_cast<double>(sim) / items.size();
        r.require(std::abs(got - want) <= 0.01 && items.size() == policy.total(), policy.label() + " ratio off");
        if (policy.sim_count == 0) r.require(sim == 0, "0:30 stream contains sim episodes");
        char buf[80];
        std::snprintf(buf, sizeof buf, "%s sim share %.4f", policy.label().c_str(), got);
        parts += (parts.empty() ? "" : ", ") + std::string(buf);
    }
    r.detail = r.pass ? parts : r.detail + " (" + parts + ")";
    return r;
}

// 7. Baseline ordering and knn scaling.
Result baselines() {
    Result r;
    std::string detail;
    for (Skill sk : {Skill::GoTo, Skill::GoAvoid}) {
        std::vector<Episode> train;
        for (const auto& p : expand_plan({{sk, Source::Sim, 200}}, 1234)) train.push_back(generate_planned(p));
        const auto knn = knn_bc_policy(train, 1);
        std::vector<double> o, k, rnd;
        for (std::uint64_t s = 0; s < 5; ++s) {
            const auto suite = task_suite(sk, 20, 100 + s);
            o.push_back(run_suite(OraclePolicy{}, suite).overall_success_rate());
            k.push_back(run_suite(*knn, suite).overall_success_rate());
            rnd.push_back(run_suite(RandomPolicy{}, suite).overall_success_rate());
        }
        const double mo = median_of(o), mk = median_of(k), mr = median_of(rnd);
        r.require(mo > mk && mk > mr, std::string(name(sk)) + " ordering violated");
        char buf[120];
        std::snprintf(buf, sizeof buf, "%s oracle %.2f > knn %.2f > random %.2f; ", std::string(name(sk)).c_str(), mo,
                      mk, mr);
        detail += buf;
    }
    std::vector<Episode> sim, real;
    for (const auto& p : expand_plan({{Skill::GoTo, Source::Sim, 2560}}, 77)) {
        sim.push_back(generate_planned(p));
    }
    for (const auto& p : expand_plan({{Skill::GoTo, Source::Real, 30}}, 78)) real.push_back(generate_planned(p));
    const auto rows = scaling_experiment(
        [](const std::vector<Episode>& tr) { return std::unique_ptr<Policy>(knn_bc_policy(tr, 1)); }, desk_regimes(),
        task_suite(Skill::GoTo, 20, 5), sim, real, 9, 5);
    detail += "knn GoTo by regime:";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0) r.require(rows[i].median >= rows[i - 1].median, "knn success decreases at " + rows[i].regime.label());
        char buf[64];
        std::snprintf(buf, sizeof buf, " %s=%.2f", rows[i].regime.label().c_str(), rows[i].median);
        detail += buf;
    }
    r.detail = r.pass ? detail : r.detail + " (" + detail + ")";
    return r;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(QUARD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Byte comparison of every regular file under two directories.
bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
    std::set<fs::path> files;
    for (const auto& root : {a, b}) {
        for (const auto& e : fs::recursive_directory_iterator(root)) {
            if (e.is_regular_file()) files.insert(fs::relative(e.path(), root));
        }
    }
    for (const auto& f : files) {
        if (!fs::exists(a / f) || !fs::exists(b / f) || read_file(a / f) != read_file(b / f)) {
            why = f.string();
            return false;
        }
    }
    return !files.empty();
}

// 8. Collect and eval determinism through the CLI.
Result determinism() {
    Result r;
    const fs::path work = fs::temp_directory_path() / ("quard-accept-" + std::to_string(::getpid()));
    fs::remove_all(work);
    for (const char* run : {"1", "2"}) {
        const fs::path d = work / run;
        r.require(run_cli("collect --task go_to --task go_avoid --count 10 --seed 7 --workers 2 --out " +
                          (d / "store").string()) == 0,
                  "collect failed");
        r.require(run_cli("eval --policy oracle --suite go_to_20 --seed 3 --out " + (d / "eval").string()) == 0,
                  "eval failed");
        r.require(run_cli("eval --policy knn:" + (d / "store").string() + " --suite go_avoid_10 --seed 3 --out " +
                          (d / "knn").string()) == 0,
                  "knn eval failed");
    }
    std::string why;
    for (const char* sub : {"store", "eval", "knn"}) {
        if (!same_tree(work / "1" / sub, work / "2" / sub, why)) r.require(false, std::string(sub) + "/" + why + " differs");
    }
    fs::remove_all(work);
    if (r.pass) r.detail = "stores, report.csv and episodes.csv byte-identical across runs";
    return r;
}

// 9. Suite budgets.
Result suites() {
    Result r;
    const std::map<Skill, std::size_t> want{{Skill::GoTo, 425},  {Skill::GoAvoid, 500},    {Skill::GoThrough, 150},
                                            {Skill::Unload, 100}, {Skill::Distinguish, 100}, {Skill::Crawl, 75}};
    const auto seen = suite_by_name("seen", 1);
    r.require(seen.budgets() == want, "seen budgets differ");
    for (const char* n : {"unseen_object", "unseen_verbal"}) {
        const auto s = suite_by_name(n, 1);
        r.require(s.budgets() == want, std::string(n) + " budgets differ");
    }
    for (const auto& e : suite_by_name("unseen_object", 1).entries) {
        if (is_seen_color(e.task.object.color)) {
            r.require(false, "unseen_object suite contains a seen color");
            break;
        }
    }
    if (r.pass) r.detail = "seen/unseen budgets 425/500/150/100/100/75, unseen colors only";
    return r;
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Result()>>> criteria = {
        {"codec_roundtrip", codec},    {"planner_optimality", planner}, {"goavoid_scenes", scenes},
        {"oracle_success", oracle},    {"dataset_statistics", statistics}, {"sim_real_mixing", mixing},
        {"baseline_ordering", baselines}, {"determinism", determinism},  {"suite_budgets", suites},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Result r;
        try {
            r = criteria[i].second();
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        failed += !r.pass;
        std::printf("%s %zu %s: %s\n", r.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, r.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
