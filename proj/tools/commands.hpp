#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace amdp::cli {

/// Flags shared by every subcommand. Flag values override config entries.
struct CommonFlags {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    int workers = 1;
    bool force = false;
};

/// Exit codes are a stable contract:
///   0 ok, 2 config, 3 solver, 4 data, 5 invariant failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitData = 4;
inline constexpr int kExitInvariant = 5;

int cmd_gen_env(const CommonFlags& flags);
int cmd_solve(const CommonFlags& flags);
int cmd_irl(const CommonFlags& flags);
int cmd_verify(const CommonFlags& flags);

} // namespace amdp::cli
