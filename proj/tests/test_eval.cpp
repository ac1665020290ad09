// Copyright (c) 2026 The quard authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>

#include "quard/eval.hpp"

using namespace quard;

namespace {

std::vector<Episode> expert_set(Skill skill, Source source, std::size_t n, std::uint64_t seed) {
    std::vector<Episode> out;
    for (const auto& p : expand_plan({{skill, source, n}}, seed)) out.push_back(generate_planned(p));
    return out;
}

} // namespace

TEST(Suites, SeenBudgets) {
    const auto s = suite_by_name("seen", 1);
    const std::map<Skill, std::size_t> want{{Skill::GoTo, 425},  {Skill::GoAvoid, 500},    {Skill::GoThrough, 150},
                                            {Skill::Unload, 100}, {Skill::Distinguish, 100}, {Skill::Crawl, 75}};
    EXPECT_EQ(s.budgets(), want);
    EXPECT_EQ(s.entries.size(), 1350u);
    std::set<std::uint64_t> seeds;
    for (const auto& e : s.entries) seeds.insert(e.seed);
    EXPECT_EQ(seeds.size(), s.entries.size());
    EXPECT_NO_THROW(s.validate());
}

TEST(Suites, UnseenSuitesPreserveBudgetsAndExcludeSeenColors) {
    const auto seen = suite_by_name("seen", 4);
    const auto obj = suite_by_name("unseen_object", 4);
    const auto verbal = suite_by_name("unseen_verbal", 4);
    EXPECT_EQ(obj.budgets(), seen.budgets());
    EXPECT_EQ(verbal.budgets(), seen.budgets());
    std::set<std::string> categories;
    for (const auto& e : obj.entries) {
        EXPECT_FALSE(is_seen_color(e.task.object.color)) << render_instruction(e.task).text;
        EXPECT_EQ(e.task.split, Split::UnseenObject);
        categories.insert(e.task.object.category);
    }
    EXPECT_TRUE(categories.count("pillow") || categories.count("computer") || categories.count("window"));
    for (std::size_t i = 0; i < verbal.entries.size(); ++i) {
        EXPECT_EQ(verbal.entries[i].seed, seen.entries[i].seed);
        EXPECT_EQ(verbal.entries[i].task.split, Split::UnseenVerbal);
    }
}

TEST(Suites, SpeedsBalancedWithinTask) {
    const auto s = task_suite(Skill::GoTo, 99, 2);
    std::map<SpeedLevel, int> n;
    for (const auto& e : s.entries) ++n[e.task.speed];
    for (SpeedLevel sp : kAllSpeeds) EXPECT_EQ(n[sp], 33);
}

TEST(Suites, NamesAndJson) {
    EXPECT_EQ(suite_by_name("go_to_100", 3).entries.size(), 100u);
    EXPECT_EQ(suite_by_name("crawl_7", 3).budgets().at(Skill::Crawl), 7u);
    EXPECT_THROW(suite_by_name("go_to_", 3), ConfigError);
    EXPECT_THROW(suite_by_name("fly_10", 3), ConfigError);
    EXPECT_THROW(suite_by_name("nonsense", 3), ConfigError);
    const auto s = suite_by_name("unseen_object", 2);
    const auto back = suite_from_json(to_json(s));
    EXPECT_EQ(back.entries, s.entries);
    EXPECT_EQ(back.split, s.split);
}

TEST(Eval, ReportInvariants) {
    const auto suite = task_suite(Skill::GoAvoid, 12, 8);
    const auto rep = run_suite(RandomPolicy{}, suite);
    ASSERT_EQ(rep.logs.size(), 12u);
    const auto& r = rep.per_task.at(Skill::GoAvoid);
    EXPECT_EQ(r.budget, 12u);
    EXPECT_EQ(r.successes + r.failure_count(), r.budget);
    for (const auto& l : rep.logs) {
        EXPECT_EQ(l.success, l.failure == Failure::None);
        EXPECT_GE(l.steps, 1u);
    }
    EXPECT_NE(rep.csv().find("go_avoid"), std::string::npos);
    const std::string eps = rep.episodes_csv();
    EXPECT_EQ(static_cast<std::size_t>(std::count(eps.begin(), eps.end(), '\n')), 13u);
}

TEST(Eval, DeterministicAndWorkerIndependent) {
    const auto suite = task_suite(Skill::GoTo, 9, 5);
    const auto a = run_suite(OraclePolicy{}, suite);
    EvalConfig cfg;
    cfg.workers = 3;
    const auto b = run_suite(OraclePolicy{}, suite, cfg);
    EXPECT_EQ(a.csv(), b.csv());
    EXPECT_EQ(a.episodes_csv(), b.episodes_csv());
    EXPECT_EQ(run_suite(RandomPolicy{}, suite).episodes_csv(), run_suite(RandomPolicy{}, suite).episodes_csv());
}

TEST(Eval, OracleSolvesEverySkill) {
    for (Skill sk : kAllSkills) {
        const auto rep = run_suite(OraclePolicy{}, task_suite(sk, 10, 17));
        EXPECT_GE(rep.success_rate(sk), 0.9) << name(sk) << "\n" << rep.table();
    }
}

TEST(Eval, BaselineOrderingOnGoTo) {
    const auto train = expert_set(Skill::GoTo, Source::Sim, 120, 1234);
    const auto knn = knn_bc_policy(train, 1);
    const auto suite = task_suite(Skill::GoTo, 20, 100);
    const double o = run_suite(OraclePolicy{}, suite).overall_success_rate();
    const double k = run_suite(*knn, suite).overall_success_rate();
    const double r = run_suite(RandomPolicy{}, suite).overall_success_rate();
    EXPECT_GT(o, k);
    EXPECT_GT(k, r);
}

TEST(Eval, KnnReplaysTrainingEpisode) {
    const auto train = expert_set(Skill::GoTo, Source::Sim, 1, 3);
    ASSERT_TRUE(train[0].succeeded());
    auto knn = knn_bc_policy(train, 1);
    const auto& e = train[0];
    // A training frame maps back to its own tokens unless an earlier step
    // has the same feature vector (ties go to the earlier sample).
    const KnnFeatures features;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < e.steps.size(); ++i) {
        const auto f = features(e.frames[i], e.task());
        std::size_t first = i;
        for (std::size_t j = 0; j < i; ++j) {
            if (features(e.frames[j], e.task()) == f) {
                first = j;
                break;
            }
        }
        EXPECT_EQ(knn->act(e.frames[i], e.instruction.text), e.steps[first].tokens) << i;
        checked += first == i;
    }
    EXPECT_GT(checked, e.steps.size() / 2);
    EXPECT_THROW(knn_bc_policy(train, 2), ConfigError);
    EXPECT_THROW(knn_bc_policy(std::vector<Episode>{}, 1), ConfigError);
}

TEST(Eval, RandomPolicyTokensAreValid) {
    RandomPolicy p;
    p.reset(4);
    const auto spec = ActionSpaceSpec::defaults();
    for (int i = 0; i < 200; ++i) EXPECT_NO_THROW(validate_tokens(p.act({}, ""), spec));
}

TEST(Scaling, RowsPerRegimeAndDeterministic) {
    const auto sim = expert_set(Skill::GoTo, Source::Sim, 40, 77);
    const auto real = expert_set(Skill::GoTo, Source::Real, 6, 78);
    const std::vector<MixPolicy> regimes{{0, 6}, {20, 6}, {40, 6}};
    auto factory = [](const std::vector<Episode>& tr) { return std::unique_ptr<Policy>(knn_bc_policy(tr, 1)); };
    const auto suite = task_suite(Skill::GoTo, 6, 5);
    const auto a = scaling_experiment(factory, regimes, suite, sim, real, 9, 2);
    const auto b = scaling_experiment(factory, regimes, suite, sim, real, 9, 2);
    ASSERT_EQ(a.size(), 3u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].success_rates, b[i].success_rates);
        EXPECT_EQ(a[i].success_rates.size(), 2u);
    }
    EXPECT_NE(scaling_table(a).find("40:6"), std::string::npos);
    EXPECT_THROW(scaling_experiment(factory, {{41, 6}}, suite, sim, real, 9), StoreError);
}
