// Copyright (c) 2026 The quard authors
// SPDX-License-Identifier: Apache-2.0

// Umbrella header.
#pragma once

#include "quard/action_codec.hpp"
#include "quard/dataset.hpp"
#include "quard/episode.hpp"
#include "quard/error.hpp"
#include "quard/eval.hpp"
#include "quard/expert.hpp"
#include "quard/geometry.hpp"
#include "quard/instruction.hpp"
#include "quard/planning.hpp"
#include "quard/random.hpp"
#include "quard/types.hpp"
#include "quard/world_sim.hpp"
