/*
 * Copyright (c) 2026 The quard authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

// 12-dimensional command-level action space: 11 continuous commands plus a
// terminate flag. Continuous dimensions are quantized into uniform
// per-dimension bins; each bin index maps to the integer token
// `token_offset + bin`.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"
#include "quard/error.hpp"

namespace quard {

inline constexpr std::size_t kContinuousDims = 11;
inline constexpr std::size_t kActionDims = kContinuousDims + 1;

// Order matches the action vector [v_x, v_y, omega_z, theta_1..3, f, h_z, phi, s_y, h_z_f, t].
enum class Dim : std::size_t {
    VX = 0,
    VY,
    OmegaZ,
    Theta1,
    Theta2,
    Theta3,
    Freq,
    HeightZ,
    Pitch,
    StanceWidth,
    FootHeight,
};

inline constexpr std::array<std::string_view, kActionDims> kDimNames = {
    "v_x", "v_y", "omega_z", "theta_1", "theta_2", "theta_3",
    "f",   "h_z", "phi",     "s_y",     "h_z_f",   "t"};

constexpr bool is_cyclic(std::size_t dim) noexcept {
    return dim >= static_cast<std::size_t>(Dim::Theta1) &&
           dim <= static_cast<std::size_t>(Dim::Theta3);
}

struct ActionCommand {
    double v_x = 0.0;
    double v_y = 0.0;
    double omega_z = 0.0;
    double theta_1 = 0.0;
    double theta_2 = 0.0;
    double theta_3 = 0.0;
    double f = 0.0;
    double h_z = 0.0;
    double phi = 0.0;
    double s_y = 0.0;
    double h_z_f = 0.0;
    bool terminate = false;

    std::array<double, kContinuousDims> continuous() const {
        return {v_x, v_y, omega_z, theta_1, theta_2, theta_3, f, h_z, phi, s_y, h_z_f};
    }

    static ActionCommand from_continuous(const std::array<double, kContinuousDims>& v,
                                         bool terminate) {
        ActionCommand a;
        a.v_x = v[0];
        a.v_y = v[1];
        a.omega_z = v[2];
        a.theta_1 = v[3];
        a.theta_2 = v[4];
        a.theta_3 = v[5];
        a.f = v[6];
        a.h_z = v[7];
        a.phi = v[8];
        a.s_y = v[9];
        a.h_z_f = v[10];
        a.terminate = terminate;
        return a;
    }

    friend bool operator==(const ActionCommand&, const ActionCommand&) = default;
};

struct DimensionRange {
    double min = 0.0;
    double max = 1.0;
    std::string unit;

    friend bool operator==(const DimensionRange&, const DimensionRange&) = default;
};

struct ActionSpaceSpec {
    std::array<DimensionRange, kContinuousDims> dims;
    int bin_count = 256;
    int token_offset = 0;

    double bin_width(std::size_t dim) const {
        return (dims[dim].max - dims[dim].min) / static_cast<double>(bin_count);
    }

    // Throws ConfigError when a range is empty or the bin count is degenerate.
    void validate() const {
        if (bin_count < 2) throw ConfigError("bin_count must be >= 2");
        if (token_offset < 0) throw ConfigError("token_offset must be nonnegative");
        for (std::size_t i = 0; i < kContinuousDims; ++i) {
            const auto& r = dims[i];
            if (!std::isfinite(r.min) || !std::isfinite(r.max) || !(r.min < r.max)) {
                throw ConfigError("dimension " + std::string(kDimNames[i]) +
                                  ": need finite min < max");
            }
        }
    }

    static ActionSpaceSpec defaults() {
        ActionSpaceSpec s;
        s.dims = {{
            {-1.0, 1.0, "m/s"},
            {-0.6, 0.6, "m/s"},
            {-1.0, 1.0, "rad/s"},
            {0.0, 1.0, "cycle"},
            {0.0, 1.0, "cycle"},
            {0.0, 1.0, "cycle"},
            {1.5, 4.0, "Hz"},
            {0.10, 0.35, "m"},
            {-0.4, 0.4, "rad"},
            {0.0, 0.45, "m"},
            {0.03, 0.25, "m"},
        }};
        return s;
    }

    friend bool operator==(const ActionSpaceSpec&, const ActionSpaceSpec&) = default;
};

struct ActionTokens {
    std::array<int, kActionDims> tokens{};

    int operator[](std::size_t i) const { return tokens[i]; }
    int& operator[](std::size_t i) { return tokens[i]; }

    friend bool operator==(const ActionTokens&, const ActionTokens&) = default;
};

namespace detail {

inline double wrap_unit(double v) {
    double w = v - std::floor(v);
    // floor can round v - floor(v) up to exactly 1 for tiny negative v.
    return w >= 1.0 ? 0.0 : w;
}

inline void require_finite(std::size_t dim, double v) {
    if (!std::isfinite(v)) {
        throw CodecError(std::string(kDimNames[dim]),
                         "non-finite value in dimension " + std::string(kDimNames[dim]));
    }
}

} // namespace detail

// Bin index of a value within one dimension, clamped into [0, bin_count - 1].
inline int bin_index(const ActionSpaceSpec& spec, std::size_t dim, double v) {
    detail::require_finite(dim, v);
    if (is_cyclic(dim)) v = detail::wrap_unit(v);
    const auto& r = spec.dims[dim];
    const double w = spec.bin_width(dim);
    const double q = std::floor((v - r.min) / w);
    if (q < 0.0) return 0;
    if (q > spec.bin_count - 1) return spec.bin_count - 1;
    // Snap to the edge table min + k * w, which the division can miss by one ulp.
    int k = static_cast<int>(q);
    if (k + 1 < spec.bin_count && r.min + (k + 1) * w <= v) ++k;
    if (k > 0 && r.min + k * w > v) --k;
    return k;
}

inline double bin_center(const ActionSpaceSpec& spec, std::size_t dim, int bin) {
    return spec.dims[dim].min + (static_cast<double>(bin) + 0.5) * spec.bin_width(dim);
}

inline ActionTokens tokenize(const ActionCommand& a, const ActionSpaceSpec& spec) {
    ActionTokens out;
    const auto values = a.continuous();
    for (std::size_t i = 0; i < kContinuousDims; ++i) {
        out[i] = spec.token_offset + bin_index(spec, i, values[i]);
    }
    out[kContinuousDims] = spec.token_offset + (a.terminate ? 1 : 0);
    return out;
}

// Checks every token against its dimension's valid range.
inline void validate_tokens(const ActionTokens& tok, const ActionSpaceSpec& spec) {
    for (std::size_t i = 0; i < kActionDims; ++i) {
        const int hi = i < kContinuousDims ? spec.bin_count - 1 : 1;
        const int bin = tok[i] - spec.token_offset;
        if (bin < 0 || bin > hi) {
            throw CodecError(std::string(kDimNames[i]),
                             "token " + std::to_string(tok[i]) + " out of range for dimension " +
                                 std::string(kDimNames[i]));
        }
    }
}

inline ActionCommand detokenize(const ActionTokens& tok, const ActionSpaceSpec& spec) {
    validate_tokens(tok, spec);
    std::array<double, kContinuousDims> v{};
    for (std::size_t i = 0; i < kContinuousDims; ++i) {
        v[i] = bin_center(spec, i, tok[i] - spec.token_offset);
    }
    return ActionCommand::from_continuous(v, tok[kContinuousDims] == spec.token_offset + 1);
}

inline ActionCommand clamp_to_space(const ActionCommand& a, const ActionSpaceSpec& spec) {
    auto v = a.continuous();
    for (std::size_t i = 0; i < kContinuousDims; ++i) {
        detail::require_finite(i, v[i]);
        if (is_cyclic(i)) v[i] = detail::wrap_unit(v[i]);
        v[i] = std::clamp(v[i], spec.dims[i].min, spec.dims[i].max);
    }
    return ActionCommand::from_continuous(v, a.terminate);
}

// ---- config file -----------------------------------------------------------

inline nlohmann::json to_json(const ActionSpaceSpec& spec) {
    nlohmann::json dims = nlohmann::json::object();
    for (std::size_t i = 0; i < kContinuousDims; ++i) {
        dims[std::string(kDimNames[i])] = {
            {"min", spec.dims[i].min}, {"max", spec.dims[i].max}, {"unit", spec.dims[i].unit}};
    }
    return {{"bin_count", spec.bin_count}, {"token_offset", spec.token_offset}, {"dimensions", dims}};
}

// Missing keys fall back to the defaults; unknown dimension names are rejected.
inline ActionSpaceSpec action_space_from_json(const nlohmann::json& j) {
    ActionSpaceSpec spec = ActionSpaceSpec::defaults();
    try {
        spec.bin_count = j.value("bin_count", spec.bin_count);
        spec.token_offset = j.value("token_offset", spec.token_offset);
        if (j.contains("dimensions")) {
            for (const auto& [name, range] : j.at("dimensions").items()) {
                std::size_t idx = kContinuousDims;
                for (std::size_t i = 0; i < kContinuousDims; ++i) {
                    if (kDimNames[i] == name) idx = i;
                }
                if (idx == kContinuousDims) throw ConfigError("unknown action dimension: " + name);
                auto& r = spec.dims[idx];
                r.min = range.value("min", r.min);
                r.max = range.value("max", r.max);
                r.unit = range.value("unit", r.unit);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("action space config: ") + e.what());
    }
    spec.validate();
    return spec;
}

inline ActionSpaceSpec load_action_space(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open action space config " + path.string());
    try {
        return action_space_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("action space config " + path.string() + ": " + e.what());
    }
}

} // namespace quard
