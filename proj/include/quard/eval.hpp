/*
 * Copyright (c) 2026 The quard authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "quard/action_codec.hpp"
#include "quard/dataset.hpp"
#include "quard/episode.hpp"
#include "quard/expert.hpp"
#include "quard/instruction.hpp"
#include "quard/random.hpp"
#include "quard/types.hpp"
#include "quard/world_sim.hpp"

namespace quard {

// ---- policies -----------------------------------------------------------------

// Called once per command tick. on_state exposes the true world state and
// is used only by privileged policies such as the oracle.
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    virtual void reset(std::uint64_t seed) = 0;
    virtual ActionTokens act(const Observation& obs, const std::string& instruction) = 0;
    virtual void on_state(const WorldState&) {}
    virtual std::unique_ptr<Policy> clone() const = 0;
};

class OraclePolicy : public Policy {
public:
    explicit OraclePolicy(CollectionConfig cfg = {}) : cfg_(std::move(cfg)) {}

    std::string name() const override { return "oracle"; }
    void reset(std::uint64_t) override {
        expert_.reset();
        state_.reset();
    }
    void on_state(const WorldState& s) override { state_ = s; }

    ActionTokens act(const Observation&, const std::string& instruction) override {
        if (!state_) throw ConfigError("oracle policy needs the world state");
        const auto& spec = cfg_.action_space;
        if (!expert_) expert_.emplace(parse_instruction(instruction), cfg_.expert, cfg_.sim, cfg_.rates);
        ActionCommand a;
        try {
            a = clamp_to_space(expert_->act(*state_), spec);
        } catch (const NoPathError&) {
            a = clamp_to_space(ActionCommand{}, spec);
            a.terminate = true;
            return tokenize(a, spec);
        }
        ActionCommand exec = detokenize(tokenize(a, spec), spec);
        const auto next = apply_command(*state_, exec, cfg_.rates, cfg_.sim);
        a.terminate = check_success(next, expert_->task(), cfg_.sim).status == Status::Success;
        return tokenize(a, spec);
    }

    std::unique_ptr<Policy> clone() const override { return std::make_unique<OraclePolicy>(cfg_); }

private:
    CollectionConfig cfg_;
    std::optional<ExpertController> expert_;
    std::optional<WorldState> state_;
};

// Uniform over every token position, terminate included.
class RandomPolicy : public Policy {
public:
    explicit RandomPolicy(ActionSpaceSpec spec = ActionSpaceSpec::defaults()) : spec_(std::move(spec)), rng_(0) {}

    std::string name() const override { return "random"; }
    void reset(std::uint64_t seed) override { rng_ = Rng(derive_seed(seed, 0xa11d0)); }

    ActionTokens act(const Observation&, const std::string&) override {
        ActionTokens t;
        for (std::size_t d = 0; d < kActionDims; ++d) {
            const auto n = d < kContinuousDims ? static_cast<std::uint64_t>(spec_.bin_count) : 2;
            t[d] = spec_.token_offset + static_cast<int>(rng_.below(n));
        }
        return t;
    }

    std::unique_ptr<Policy> clone() const override { return std::make_unique<RandomPolicy>(spec_); }

private:
    ActionSpaceSpec spec_;
    Rng rng_;
};

// ---- nearest-neighbor behavior cloning ---------------------------------------------

struct KnnFeatures {
    static constexpr int kPoolW = 8;
    static constexpr int kPoolH = 6;
    static constexpr std::size_t kRasterDims = kPoolW * kPoolH * 3;

    double instruction_weight = 1.0;

    // Category vocabulary covers every catalog entry, fixed in catalog order.
    static const std::vector<std::string>& categories() {
        static const std::vector<std::string> v = [] {
            std::vector<std::string> out;
            auto add = [&](const auto& cat) {
                for (const auto& e : cat) out.emplace_back(e.category);
            };
            add(kObjectCatalog);
            add(kTunnelCatalog);
            add(kReceptacleCatalog);
            out.emplace_back(kLetterBoxCategory);
            return out;
        }();
        return v;
    }

    static std::size_t instruction_dims() {
        return kSkillNames.size() + kColorNames.size() + categories().size() + kSpeedNames.size() +
               kGaitNames.size() + kLetters.size();
    }

    std::size_t dims() const { return kRasterDims + instruction_dims(); }

    // Mean-pooled color raster in [0, 1], then the weighted one-hot spec.
    std::vector<float> operator()(const Observation& obs, const std::optional<TaskSpec>& task) const {
        std::vector<float> f(dims(), 0.0f);
        if (obs.width > 0 && obs.height > 0) {
            for (int py = 0; py < kPoolH; ++py) {
                const int y0 = py * obs.height / kPoolH, y1 = (py + 1) * obs.height / kPoolH;
                for (int px = 0; px < kPoolW; ++px) {
                    const int x0 = px * obs.width / kPoolW, x1 = (px + 1) * obs.width / kPoolW;
                    std::array<double, 3> sum{};
                    for (int y = y0; y < y1; ++y) {
                        for (int x = x0; x < x1; ++x) {
                            const Rgb c = obs.at(x, y);
                            sum[0] += c.r;
                            sum[1] += c.g;
                            sum[2] += c.b;
                        }
                    }
                    const double n = std::max(1, (y1 - y0) * (x1 - x0)) * 255.0;
                    const std::size_t i = 3 * (static_cast<std::size_t>(py) * kPoolW + px);
                    for (int ch = 0; ch < 3; ++ch) f[i + ch] = static_cast<float>(sum[ch] / n);
                }
            }
        }
        if (!task) return f;
        const auto w = static_cast<float>(instruction_weight);
        std::size_t base = kRasterDims;
        auto hot = [&](std::size_t idx, std::size_t count) {
            if (idx < count) f[base + idx] = w;
            base += count;
        };
        hot(static_cast<std::size_t>(task->skill), kSkillNames.size());
        hot(static_cast<std::size_t>(task->object.color), kColorNames.size());
        const auto& cats = categories();
        const auto it = std::find(cats.begin(), cats.end(), task->object.category);
        hot(static_cast<std::size_t>(it - cats.begin()), cats.size());
        hot(static_cast<std::size_t>(task->speed), kSpeedNames.size());
        hot(static_cast<std::size_t>(task->gait), kGaitNames.size());
        const auto lt = std::find(kLetters.begin(), kLetters.end(), task->object.letter);
        hot(static_cast<std::size_t>(lt - kLetters.begin()), kLetters.size());
        return f;
    }
};

// Majority vote per token position over the k nearest stored samples.
// Distance ties and vote ties resolve toward the earlier sample.
class KnnPolicy : public Policy {
public:
    struct Data {
        std::vector<std::vector<float>> features;
        std::vector<ActionTokens> tokens;
    };

    KnnPolicy(std::shared_ptr<const Data> data, std::size_t k, KnnFeatures features = {})
        : data_(std::move(data)), k_(k), features_(features) {}

    std::string name() const override { return "knn"; }
    void reset(std::uint64_t) override {}

    ActionTokens act(const Observation& obs, const std::string& instruction) override {
        std::optional<TaskSpec> task;
        try {
            task = parse_instruction(instruction);
        } catch (const ParseError&) {
        }
        const auto q = features_(obs, task);
        const std::size_t n = data_->features.size();
        std::vector<std::pair<double, std::size_t>> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& f = data_->features[i];
            double d = 0.0;
            for (std::size_t j = 0; j < q.size(); ++j) {
                const double e = static_cast<double>(f[j]) - q[j];
                d += e * e;
            }
            dist[i] = {d, i};
        }
        const std::size_t k = std::min(k_, n);
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        ActionTokens out;
        for (std::size_t d = 0; d < kActionDims; ++d) {
            std::map<int, std::size_t> votes;
            for (std::size_t r = 0; r < k; ++r) ++votes[data_->tokens[dist[r].second][d]];
            int best = data_->tokens[dist[0].second][d];
            std::size_t best_votes = votes[best];
            for (std::size_t r = 1; r < k; ++r) {
                const int t = data_->tokens[dist[r].second][d];
                if (votes[t] > best_votes) {
                    best = t;
                    best_votes = votes[t];
                }
            }
            out[d] = best;
        }
        return out;
    }

    std::unique_ptr<Policy> clone() const override { return std::make_unique<KnnPolicy>(data_, k_, features_); }

private:
    std::shared_ptr<const Data> data_;
    std::size_t k_;
    KnnFeatures features_;
};

// `frames(e)` returns the rasters of episode e, parallel to its steps.
inline std::unique_ptr<KnnPolicy>
knn_bc_policy(const std::vector<Episode>& episodes, std::size_t k,
              const std::function<std::vector<Observation>(const Episode&)>& frames,
              KnnFeatures features = {}) {
    if (episodes.empty()) throw ConfigError("knn policy needs a nonempty training set");
    if (k == 0) throw ConfigError("knn needs k >= 1");
    if (k > episodes.size()) {
        throw ConfigError("k = " + std::to_string(k) + " exceeds the " + std::to_string(episodes.size()) +
                          " stored episodes");
    }
    auto data = std::make_shared<KnnPolicy::Data>();
    for (const auto& e : episodes) {
        const auto obs = frames(e);
        if (obs.size() != e.steps.size()) throw StoreError("episode " + e.id + ": frame count mismatch");
        for (std::size_t i = 0; i < obs.size(); ++i) {
            data->features.push_back(features(obs[i], e.task()));
            data->tokens.push_back(e.steps[i].tokens);
        }
    }
    return std::make_unique<KnnPolicy>(std::move(data), k, features);
}

// In-memory episodes carrying their frames.
inline std::unique_ptr<KnnPolicy> knn_bc_policy(const std::vector<Episode>& episodes, std::size_t k,
                                                KnnFeatures features = {}) {
    return knn_bc_policy(episodes, k, [](const Episode& e) { return e.frames; }, features);
}

inline std::unique_ptr<KnnPolicy> knn_bc_policy(const fs::path& store, std::size_t k, KnnFeatures features = {}) {
    DatasetReader reader(store);
    return knn_bc_policy(reader.episodes(), k, [&](const Episode& e) { return reader.frames(e); }, features);
}

// ---- suites ----------------------------------------------------------------------

struct SuiteEntry {
    TaskSpec task;
    std::uint64_t seed = 0;

    friend bool operator==(const SuiteEntry&, const SuiteEntry&) = default;
};

struct EvalSuite {
    std::string name;
    Split split = Split::SeenSim;
    std::vector<SuiteEntry> entries;
    // Uniform perturbation of the start pose (m, rad); zero keeps the
    // collection start.
    double start_jitter = 0.0;
    double yaw_jitter = 0.0;

    std::map<Skill, std::size_t> budgets() const {
        std::map<Skill, std::size_t> b;
        for (const auto& e : entries) ++b[e.task.skill];
        return b;
    }

    void validate() const {
        std::vector<std::uint64_t> seeds;
        for (const auto& e : entries) {
            validate_task(e.task);
            seeds.push_back(e.seed);
        }
        std::sort(seeds.begin(), seeds.end());
        if (std::adjacent_find(seeds.begin(), seeds.end()) != seeds.end()) {
            throw ConfigError("suite '" + name + "' repeats a seed");
        }
    }
};

// Episodes per task in the full seen suite.
inline std::map<Skill, std::size_t> seen_budgets() {
    return {{Skill::GoTo, 425},  {Skill::GoAvoid, 500},    {Skill::GoThrough, 150},
            {Skill::Unload, 100}, {Skill::Distinguish, 100}, {Skill::Crawl, 75}};
}

inline void append_task_entries(EvalSuite& suite, Skill skill, std::size_t count, std::uint64_t seed,
                                const ExpertConfig& cfg = {}) {
    Rng rng(derive_seed(seed, 0xe7a10000 + static_cast<std::uint64_t>(skill)));
    std::array<SpeedLevel, 3> block = kAllSpeeds;
    for (std::size_t i = 0; i < count; ++i) {
        if (i % 3 == 0) rng.shuffle(block.begin(), block.end());
        SuiteEntry e;
        e.task = sample_task(skill, block[i % 3], rng, cfg.gait_weights);
        e.task.split = suite.split;
        e.seed = derive_seed(seed, (static_cast<std::uint64_t>(skill) + 1) << 40 | i);
        suite.entries.push_back(e);
    }
}

inline EvalSuite make_suite(const std::string& name, const std::map<Skill, std::size_t>& budgets,
                            std::uint64_t seed) {
    EvalSuite s;
    s.name = name;
    for (Skill sk : kAllSkills) {
        auto it = budgets.find(sk);
        if (it != budgets.end()) append_task_entries(s, sk, it->second, seed);
    }
    return s;
}

inline EvalSuite seen_suite(std::uint64_t seed) { return make_suite("seen", seen_budgets(), seed); }

inline EvalSuite task_suite(Skill skill, std::size_t count, std::uint64_t seed) {
    return make_suite(std::string(name(skill)) + "_" + std::to_string(count), {{skill, count}}, seed);
}

// Object split: every entry gets an unseen color; categories cycle through
// the seen one, its variant and (where the catalog has them) a novel object.
// Verbal split: same tasks phrased with a paraphrase. Seeds are kept so the
// three suites are paired.
inline std::pair<EvalSuite, EvalSuite> make_unseen_suites(const EvalSuite& base) {
    EvalSuite obj = base, verbal = base;
    obj.name = base.name + "_unseen_object";
    obj.split = Split::UnseenObject;
    verbal.name = base.name + "_unseen_verbal";
    verbal.split = Split::UnseenVerbal;
    std::map<Skill, std::size_t> counters;
    for (auto& e : obj.entries) {
        const std::size_t i = counters[e.task.skill]++;
        e.task.split = Split::UnseenObject;
        e.task.object.color = kUnseenColors[i % kUnseenColors.size()];
        const auto variants = catalog_for(e.task.skill, CatalogTier::Variant);
        const auto novel = catalog_for(e.task.skill, CatalogTier::Novel);
        std::optional<std::string> variant;
        for (const auto& v : variants) {
            if (v.seen_counterpart == e.task.object.category) variant = std::string(v.category);
        }
        switch (i % 3) {
        case 1:
            if (variant) e.task.object.category = *variant;
            break;
        case 2:
            if (!novel.empty()) {
                e.task.object.category = std::string(novel[(i / 3) % novel.size()].category);
            } else if (variant) {
                e.task.object.category = *variant;
            }
            break;
        default:
            break;
        }
    }
    for (auto& e : verbal.entries) e.task.split = Split::UnseenVerbal;
    return {obj, verbal};
}

// Suite names: "seen", "unseen_object", "unseen_verbal", or "<task>_<N>".
inline EvalSuite suite_by_name(const std::string& name, std::uint64_t seed) {
    if (name == "seen") return seen_suite(seed);
    if (name == "unseen_object") return make_unseen_suites(seen_suite(seed)).first;
    if (name == "unseen_verbal") return make_unseen_suites(seen_suite(seed)).second;
    const auto us = name.rfind('_');
    if (us != std::string::npos && us + 1 < name.size()) {
        const std::string num = name.substr(us + 1);
        if (std::all_of(num.begin(), num.end(), [](char c) { return c >= '0' && c <= '9'; }) && num.size() < 9) {
            if (auto skill = enum_from_name<Skill>(name.substr(0, us), kSkillNames)) {
                return task_suite(*skill, std::stoul(num), seed);
            }
        }
    }
    throw ConfigError("unknown suite '" + name + "'");
}

inline nlohmann::json to_json(const EvalSuite& s) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : s.entries) {
        nlohmann::json t = {{"skill", name(e.task.skill)},
                            {"category", e.task.object.category},
                            {"color", name(e.task.object.color)},
                            {"speed", name(e.task.speed)},
                            {"gait", name(e.task.gait)},
                            {"split", name(e.task.split)},
                            {"seed", e.seed}};
        if (e.task.object.letter) t["letter"] = std::string(1, e.task.object.letter);
        entries.push_back(t);
    }
    return {{"name", s.name},
            {"split", name(s.split)},
            {"start_jitter", s.start_jitter},
            {"yaw_jitter", s.yaw_jitter},
            {"entries", entries}};
}

inline EvalSuite suite_from_json(const nlohmann::json& j) {
    EvalSuite s;
    try {
        s.name = j.at("name").get<std::string>();
        s.split = split_from_name(j.at("split").get<std::string>());
        s.start_jitter = j.value("start_jitter", 0.0);
        s.yaw_jitter = j.value("yaw_jitter", 0.0);
        for (const auto& e : j.at("entries")) {
            SuiteEntry se;
            se.task.skill = skill_from_name(e.at("skill").get<std::string>());
            se.task.object.category = e.at("category").get<std::string>();
            se.task.object.color = color_from_name(e.at("color").get<std::string>());
            se.task.speed = speed_from_name(e.at("speed").get<std::string>());
            se.task.gait = gait_from_name(e.at("gait").get<std::string>());
            se.task.split = split_from_name(e.at("split").get<std::string>());
            const std::string letter = e.value("letter", "");
            se.task.object.letter = letter.empty() ? 0 : letter[0];
            se.seed = e.at("seed").get<std::uint64_t>();
            s.entries.push_back(se);
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("suite: ") + ex.what());
    }
    s.validate();
    return s;
}

// ---- running -------------------------------------------------------------------------

enum class Failure { None, Collision, Timeout, WrongTarget, Malformed, OutOfBounds };
inline constexpr std::array<std::string_view, 6> kFailureNames = {"none",         "collision", "timeout",
                                                                  "wrong_target", "malformed", "out_of_bounds"};
inline std::string_view name(Failure f) { return enum_name(f, kFailureNames); }

struct EpisodeLog {
    std::size_t index = 0;
    TaskSpec task;
    std::uint64_t seed = 0;
    std::string instruction;
    bool success = false;
    Failure failure = Failure::None;
    std::size_t steps = 0;
    Pose2 final_pose;
    double distance_to_target = 0.0;
};

struct TaskResult {
    std::size_t budget = 0;
    std::size_t successes = 0;
    std::map<Failure, std::size_t> failures;

    double success_rate() const { return budget ? static_cast<double>(successes) / budget : 0.0; }
    std::size_t failure_count() const {
        std::size_t n = 0;
        for (const auto& [f, c] : failures) n += c;
        return n;
    }
};

struct EvalReport {
    std::string suite;
    std::string policy;
    std::map<Skill, TaskResult> per_task;
    std::vector<EpisodeLog> logs;

    double success_rate(Skill s) const {
        auto it = per_task.find(s);
        return it == per_task.end() ? 0.0 : it->second.success_rate();
    }

    double overall_success_rate() const {
        std::size_t n = 0, ok = 0;
        for (const auto& [s, r] : per_task) {
            n += r.budget;
            ok += r.successes;
        }
        return n ? static_cast<double>(ok) / n : 0.0;
    }

    // One row per task, success rate first, then the failure breakdown.
    std::string table() const {
        std::ostringstream os;
        char line[200];
        std::snprintf(line, sizeof line, "suite %s, policy %s\n", suite.c_str(), policy.c_str());
        os << line;
        std::snprintf(line, sizeof line, "%-12s %6s %6s %7s %9s %7s %12s %9s %13s\n", "task", "n", "ok", "SR",
                      "collision", "timeout", "wrong_target", "malformed", "out_of_bounds");
        os << line;
        for (const auto& [s, r] : per_task) {
            auto f = [&](Failure x) {
                auto it = r.failures.find(x);
                return it == r.failures.end() ? std::size_t{0} : it->second;
            };
            std::snprintf(line, sizeof line, "%-12s %6zu %6zu %7.3f %9zu %7zu %12zu %9zu %13zu\n",
                          std::string(name(s)).c_str(), r.budget, r.successes, r.success_rate(),
                          f(Failure::Collision), f(Failure::Timeout), f(Failure::WrongTarget),
                          f(Failure::Malformed), f(Failure::OutOfBounds));
            os << line;
        }
        std::snprintf(line, sizeof line, "%-12s %6s %6s %7.3f\n", "overall", "", "", overall_success_rate());
        os << line;
        return os.str();
    }

    std::string csv() const {
        std::ostringstream os;
        os << "task,budget,successes,success_rate,collision,timeout,wrong_target,malformed,out_of_bounds\n";
        char sr[32];
        for (const auto& [s, r] : per_task) {
            auto f = [&](Failure x) {
                auto it = r.failures.find(x);
                return it == r.failures.end() ? std::size_t{0} : it->second;
            };
            std::snprintf(sr, sizeof sr, "%.6f", r.success_rate());
            os << name(s) << "," << r.budget << "," << r.successes << "," << sr << "," << f(Failure::Collision)
               << "," << f(Failure::Timeout) << "," << f(Failure::WrongTarget) << "," << f(Failure::Malformed)
               << "," << f(Failure::OutOfBounds) << "\n";
        }
        return os.str();
    }

    std::string episodes_csv() const {
        std::ostringstream os;
        os << "index,task,seed,success,failure,steps,final_x,final_y,final_yaw,distance\n";
        char buf[200];
        for (const auto& l : logs) {
            std::snprintf(buf, sizeof buf, "%zu,%s,%llu,%d,%s,%zu,%.6f,%.6f,%.6f,%.6f\n", l.index,
                          std::string(name(l.task.skill)).c_str(), static_cast<unsigned long long>(l.seed),
                          l.success ? 1 : 0, std::string(name(l.failure)).c_str(), l.steps, l.final_pose.x,
                          l.final_pose.y, l.final_pose.yaw, l.distance_to_target);
            os << buf;
        }
        return os.str();
    }
};

struct EvalConfig {
    CollectionConfig world;
    std::size_t workers = 1;
};

inline Scene eval_scene(const EvalSuite& suite, const SuiteEntry& entry, const SceneRules& rules = {}) {
    Scene scene = sample_scene(entry.task, entry.seed, rules);
    if (suite.start_jitter > 0.0 || suite.yaw_jitter > 0.0) {
        Rng rng(derive_seed(entry.seed, 0x51a47));
        scene.start.x += rng.uniform(-suite.start_jitter, suite.start_jitter);
        scene.start.y += rng.uniform(-suite.start_jitter, suite.start_jitter);
        scene.start.yaw += rng.uniform(-suite.yaw_jitter, suite.yaw_jitter);
    }
    return scene;
}

// One closed-loop episode: observe, act, detokenize, step, until the world
// reaches a terminal status or the policy declares termination.
inline EpisodeLog run_episode(Policy& policy, const EvalSuite& suite, std::size_t index,
                              const EvalConfig& cfg = {}) {
    const auto& entry = suite.entries[index];
    const auto& world = cfg.world;
    EpisodeLog log;
    log.index = index;
    log.task = entry.task;
    log.seed = entry.seed;
    log.instruction = render_instruction(entry.task).text;

    Simulator sim(eval_scene(suite, entry, world.scene), entry.task, world.sim, world.rates);
    policy.reset(entry.seed);
    while (!sim.done()) {
        policy.on_state(sim.state());
        const ActionTokens tok = policy.act(sim.observe(), log.instruction);
        ActionCommand a;
        try {
            a = detokenize(tok, world.action_space);
        } catch (const CodecError&) {
            log.failure = Failure::Malformed;
            break;
        }
        sim.step(a);
        ++log.steps;
        if (sim.outcome().status == Status::Success) break;
        if (a.terminate) {
            log.failure = Failure::WrongTarget;
            break;
        }
    }
    const auto& out = sim.outcome();
    log.success = out.status == Status::Success;
    if (!log.success && log.failure == Failure::None) {
        switch (out.status) {
        case Status::Collision: log.failure = Failure::Collision; break;
        case Status::OutOfBounds: log.failure = Failure::OutOfBounds; break;
        default: log.failure = Failure::Timeout; break;
        }
    }
    log.final_pose = sim.state().robot;
    log.distance_to_target = out.distance_to_target;
    return log;
}

// Episodes are distributed over workers; each worker owns a policy clone and
// results are reduced in suite order.
inline EvalReport run_suite(const Policy& policy, const EvalSuite& suite, const EvalConfig& cfg = {}) {
    suite.validate();
    EvalReport report;
    report.suite = suite.name;
    report.policy = policy.name();
    report.logs.resize(suite.entries.size());

    const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, suite.entries.size()));
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](std::size_t w) {
        try {
            auto p = policy.clone();
            for (std::size_t i = next++; i < suite.entries.size(); i = next++) {
                report.logs[i] = run_episode(*p, suite, i, cfg);
            }
        } catch (...) {
            errors[w] = std::current_exception();
            next = suite.entries.size();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
        for (auto& t : threads) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    for (const auto& [skill, n] : suite.budgets()) report.per_task[skill].budget = n;
    for (const auto& l : report.logs) {
        auto& r = report.per_task[l.task.skill];
        if (l.success) {
            ++r.successes;
        } else {
            ++r.failures[l.failure];
        }
    }
    return report;
}

// ---- scaling experiment ----------------------------------------------------------------

struct ScalingRow {
    MixPolicy regime;
    std::vector<double> success_rates; // one per replication
    double median = 0.0;
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Same suite, fresh entry seeds.
inline EvalSuite reseed_suite(const EvalSuite& s, std::uint64_t seed) {
    EvalSuite out = s;
    for (std::size_t i = 0; i < out.entries.size(); ++i) out.entries[i].seed = derive_seed(seed, i);
    return out;
}

using PolicyFactory = std::function<std::unique_ptr<Policy>(const std::vector<Episode>&)>;

// For each regime and replication r: mix a training set with seed
// derive_seed(seed, r), build a policy, evaluate on the suite reseeded with
// the same r. Replication r uses identical eval seeds across regimes.
inline std::vector<ScalingRow> scaling_experiment(const PolicyFactory& factory, const std::vector<MixPolicy>& regimes,
                                                  const EvalSuite& suite, const std::vector<Episode>& sim,
                                                  const std::vector<Episode>& real, std::uint64_t seed,
                                                  std::size_t replications = 1, const EvalConfig& cfg = {}) {
    std::vector<ScalingRow> rows;
    for (const auto& regime : regimes) {
        ScalingRow row;
        row.regime = regime;
        for (std::size_t r = 0; r < replications; ++r) {
            const auto train = mix_episodes(regime, sim, real, derive_seed(seed, r));
            const auto policy = factory(train);
            const auto eval = reseed_suite(suite, derive_seed(seed, 0x5ca1e000 + r));
            row.success_rates.push_back(run_suite(*policy, eval, cfg).overall_success_rate());
        }
        row.median = median_of(row.success_rates);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string scaling_table(const std::vector<ScalingRow>& rows) {
    std::ostringstream os;
    char line[128];
    std::snprintf(line, sizeof line, "%-14s %8s  %s\n", "sim:real", "median", "per-replication SR");
    os << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-14s %8.3f ", r.regime.label().c_str(), r.median);
        os << line;
        for (double v : r.success_rates) {
            std::snprintf(line, sizeof line, " %.3f", v);
            os << line;
        }
        os << "\n";
    }
    return os.str();
}

} // namespace quard
