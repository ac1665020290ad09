// Copyright (c) 2026 The quard authors
// SPDX-License-Identifier: Apache-2.0

// Trains a nearest-neighbor policy on expert GoTo episodes and compares it
// with the oracle and a random policy.

#include <iostream>

#include "quard/eval.hpp"

int main() {
    using namespace quard;
    std::vector<Episode> train;
    for (const auto& p : expand_plan({{Skill::GoTo, Source::Sim, 60}}, 11)) train.push_back(generate_planned(p));
    const auto knn = knn_bc_policy(train, 1);

    const auto suite = task_suite(Skill::GoTo, 15, 3);
    std::cout << run_suite(OraclePolicy{}, suite).table() << "\n";
    std::cout << run_suite(*knn, suite).table() << "\n";
    std::cout << run_suite(RandomPolicy{}, suite).table();
    return 0;
}
