// Copyright (c) 2026 The quard authors
// SPDX-License-Identifier: Apache-2.0

// Tokenizes a command, prints the tokens and the decoded bin centers.

#include <cstdio>

#include "quard/action_codec.hpp"

int main() {
    const auto spec = quard::ActionSpaceSpec::defaults();
    quard::ActionCommand cmd;
    cmd.v_x = 0.55;
    cmd.v_y = -0.1;
    cmd.omega_z = 0.3;
    cmd.theta_1 = 0.5;
    cmd.f = 3.0;
    cmd.h_z = 0.22;
    cmd.phi = 0.05;
    cmd.s_y = 0.2;
    cmd.h_z_f = 0.08;

    const auto tokens = quard::tokenize(cmd, spec);
    const auto back = quard::detokenize(tokens, spec);
    const auto in = cmd.continuous(), out = back.continuous();
    std::printf("%-8s %10s %6s %10s %10s\n", "dim", "value", "token", "decoded", "half_bin");
    for (std::size_t d = 0; d < quard::kContinuousDims; ++d) {
        std::printf("%-8s %10.4f %6d %10.4f %10.4f\n", std::string(quard::kDimNames[d]).c_str(), in[d],
                    tokens.tokens[d], out[d], spec.bin_width(d) / 2);
    }
    std::printf("%-8s %10d %6d\n", "t", cmd.terminate ? 1 : 0, tokens.tokens[quard::kContinuousDims]);
    return 0;
}
