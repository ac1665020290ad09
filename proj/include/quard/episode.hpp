/*
 * Copyright (c) 2026 The quard authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quard/action_codec.hpp"
#include "quard/instruction.hpp"
#include "quard/world_sim.hpp"

namespace quard {

struct EpisodeStep {
    std::string frame; // hex SHA-256 of the PPM bytes; empty until stored
    ActionTokens tokens;
    ActionCommand command; // raw command before quantization
    Pose2 pose;            // robot pose when the observation was taken

    friend bool operator==(const EpisodeStep&, const EpisodeStep&) = default;
};

// One recorded rollout. `frames` holds the rasters in memory (parallel to
// `steps`) until the episode is written; stored episodes reference frames by
// hash and leave this empty.
struct Episode {
    std::string id;
    Instruction instruction;
    std::vector<EpisodeStep> steps;
    StepOutcome outcome;
    bool unplannable = false;
    Source source = Source::Sim;
    std::uint64_t seed = 0;
    Scene scene;
    Pose2 final_pose;
    std::vector<Observation> frames;

    const TaskSpec& task() const { return instruction.spec; }
    bool succeeded() const { return outcome.status == Status::Success; }
    std::size_t length() const { return steps.size(); }

    friend bool operator==(const Episode&, const Episode&) = default;
};

} // namespace quard
