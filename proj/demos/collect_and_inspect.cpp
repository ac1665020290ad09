// Copyright (c) 2026 The quard authors
// SPDX-License-Identifier: Apache-2.0

// Collects a few expert episodes into a temporary store, reads them back and
// prints the statistics table.

#include <iostream>

#include "quard/dataset.hpp"
#include "quard/expert.hpp"

int main(int argc, char** argv) {
    namespace fs = std::filesystem;
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "quard-demo-store";
    fs::remove_all(root);

    quard::CollectionConfig cfg;
    std::vector<quard::PlanEntry> plan;
    for (quard::Skill s : quard::kAllSkills) plan.push_back({s, quard::Source::Sim, 3});
    {
        quard::DatasetWriter writer(root, cfg.action_space, cfg.rates);
        for (const auto& p : quard::expand_plan(plan, 1)) writer.write_episode(quard::generate_planned(p, cfg));
    }

    quard::DatasetReader reader(root);
    for (const auto& e : reader.episodes()) {
        std::cout << e.id << "  " << quard::name(e.outcome.status) << "  " << e.length() << " steps  \""
                  << e.instruction.text << "\"\n";
    }
    std::cout << "\n" << quard::compute_stats(reader.episodes()).table();
    std::cout << "store: " << root.string() << "\n";
    return 0;
}
